import math

import numpy as np
import pytest

from agebench import integrate
from agebench.service import ServiceKind, ServiceModel


def all_models():
    grid = [(0.0, 0.0), (0.5, 1.0), (1.0, 1.4), (1.5, 1.0), (2.0, 0.0)]
    return {
        "exponential": ServiceModel.exponential(1.0),
        "deterministic": ServiceModel.deterministic(1.0),
        "uniform": ServiceModel.uniform(1.0),
        "custom": ServiceModel.custom(grid),
    }


def total_density_integral(model):
    upper = model.support_upper()
    cont = integrate(model.density, 0.0, upper, tol=1e-11,
                     points=list(model.density_breakpoints()))
    return cont + sum(m for _, m in model.atoms())


def test_laplace_exponential_value():
    assert ServiceModel.exponential(1.0).laplace(0.6) == pytest.approx(0.625, abs=1e-12)


def test_laplace_at_zero_is_one():
    for name, model in all_models().items():
        assert model.laplace(0.0) == pytest.approx(1.0, abs=1e-12), name


def test_laplace_deterministic_value():
    got = ServiceModel.deterministic(1.0).laplace(0.6)
    assert got == pytest.approx(math.exp(-0.6), abs=1e-12)
    # the same number from direct quadrature of the atom representation
    assert got == pytest.approx(math.exp(-0.6 * 1.0), rel=1e-12)


def test_laplace_rejects_negative_real_argument():
    for model in all_models().values():
        with pytest.raises(ValueError):
            model.laplace(-0.1)


def test_laplace_matches_quadrature():
    for name, model in all_models().items():
        for s in (0.0, 0.1, 0.6, 1.0, 5.0):
            quad = integrate(lambda x: math.exp(-s * x) * model.density(x),
                             0.0, model.support_upper(), tol=1e-11,
                             points=list(model.density_breakpoints()))
            quad += sum(m * math.exp(-s * loc) for loc, m in model.atoms())
            assert model.laplace(s) == pytest.approx(quad, abs=1e-8), (name, s)


def test_laplace_log_convex():
    s = np.linspace(0.05, 6.0, 60)
    h = s[1] - s[0]
    for name, model in all_models().items():
        logv = np.log([model.laplace(float(x)) for x in s])
        second = logv[2:] - 2 * logv[1:-1] + logv[:-2]
        assert np.all(second / h ** 2 >= -1e-10), name


def test_density_examples():
    models = all_models()
    assert models["exponential"].density(0.0) == pytest.approx(1.0)
    assert models["uniform"].density(1.0) == pytest.approx(0.5)
    for name, model in models.items():
        assert model.density(-1.0) == 0.0, name


def test_density_normalization_with_atoms():
    for name, model in all_models().items():
        assert total_density_integral(model) == pytest.approx(1.0, abs=1e-8), name


def test_deterministic_is_an_atom():
    model = ServiceModel.deterministic(2.0)
    assert model.atoms() == ((2.0, 1.0),)
    assert model.density(2.0) == 0.0


def test_moments():
    assert ServiceModel.deterministic(1.0).variance() == 0.0
    assert ServiceModel.exponential(1.0).variance() == pytest.approx(1.0)
    assert ServiceModel.uniform(1.0).variance() == pytest.approx(1.0 / 3.0)
    for name, model in all_models().items():
        assert model.mean() == pytest.approx(model.mean_service_time, rel=1e-12), name


def test_sampling_means():
    rng = np.random.default_rng(7)
    det = ServiceModel.deterministic(1.0)
    assert det.sample(rng) == 1.0
    for name, model in all_models().items():
        draws = model.sample(np.random.default_rng(11), 1_000_000)
        assert abs(np.mean(draws) / model.mean() - 1.0) < 0.01, name
        assert np.all(np.asarray(draws) >= 0.0), name


def test_custom_sampling_variance_matches():
    model = all_models()["custom"]
    draws = model.sample(np.random.default_rng(3), 500_000)
    assert np.var(draws) == pytest.approx(model.variance(), rel=0.02)


def test_custom_is_renormalized():
    lopsided = ServiceModel.custom([(0.0, 3.0), (1.0, 3.0)])  # mass 3 before scaling
    assert lopsided.laplace(0.0) == pytest.approx(1.0, abs=1e-12)
    assert lopsided.mean() == pytest.approx(0.5, rel=1e-12)


def test_custom_complex_transform_consistent():
    model = all_models()["custom"]
    s = 0.7 + 1.3j
    quad = integrate(lambda x: (np.exp(-s * x) * model.density(x)).real,
                     0.0, model.support_upper(), tol=1e-11)
    assert complex(model.laplace(s)).real == pytest.approx(quad, abs=1e-8)


def test_custom_validation():
    with pytest.raises(ValueError):
        ServiceModel.custom([(0.0, 1.0)])  # one point
    with pytest.raises(ValueError):
        ServiceModel.custom([(0.0, 1.0), (0.0, 1.0)])  # not increasing
    with pytest.raises(ValueError):
        ServiceModel.custom([(0.0, -1.0), (1.0, 1.0)])  # negative density
    with pytest.raises(ValueError):
        ServiceModel.custom([(0.0, 0.0), (1.0, 0.0)])  # zero mass
    with pytest.raises(ValueError):
        ServiceModel.exponential(0.0)
    with pytest.raises(ValueError):
        ServiceModel.deterministic(-1.0)


def test_json_round_trip():
    for name, model in all_models().items():
        again = ServiceModel.from_json(model.to_json())
        assert again == model, name
    assert ServiceModel.from_json({"kind": "deterministic", "mu": 2.0}) == \
        ServiceModel.deterministic(0.5)


def test_laplace_vectorized_complex():
    model = ServiceModel.uniform(1.0)
    s = np.array([0.1 + 1j, 2.0 + 30j, 1e-9 + 0j])
    vals = model.laplace(s)
    assert vals.shape == (3,)
    assert np.all(np.isfinite(vals))
    # tiny argument goes through the series branch and stays near 1
    assert abs(vals[2] - 1.0) < 1e-8
