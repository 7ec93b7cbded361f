import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agebench import laplace, mm11

REGIME = dict(lam=0.6, mu=1.0, lam_i=0.2)  # the reference parameterization


def ref_roots():
    return mm11.roots(REGIME["lam"], REGIME["mu"], REGIME["lam_i"])


def test_roots_reference_values():
    rp = ref_roots()
    assert rp.a == pytest.approx(-0.136675, abs=1e-6)
    assert rp.b == pytest.approx(-1.463325, abs=1e-6)
    assert rp.gap == pytest.approx(1.326650, abs=1e-6)
    assert rp.a + rp.b == pytest.approx(-1.6, rel=1e-14)
    assert rp.a * rp.b == pytest.approx(0.2, rel=1e-14)


def test_roots_small_rate_limit():
    rp = mm11.roots(0.6, 1.0, 1e-12)
    assert -1e-11 < rp.a < 0.0
    assert rp.b == pytest.approx(-1.6, rel=1e-9)


def test_roots_repeated():
    rp = mm11.roots(1.0, 1.0, 1.0)
    assert rp.a == rp.b == -1.0
    assert rp.gap == 0.0


def test_roots_domain_errors():
    with pytest.raises(ValueError):
        mm11.roots(0.6, 1.0, 0.7)
    with pytest.raises(ValueError):
        mm11.roots(0.6, 0.0, 0.2)
    with pytest.raises(ValueError):
        mm11.roots(0.6, 1.0, 0.0)


@settings(max_examples=300, deadline=None)
@given(lam=st.floats(0.01, 50.0), mu=st.floats(0.01, 50.0),
       frac=st.floats(1e-6, 1.0))
def test_root_identities_random(lam, mu, frac):
    lam_i = frac * lam
    rp = mm11.roots(lam, mu, lam_i)
    assert rp.a + rp.b == pytest.approx(-(lam + mu), rel=1e-12)
    assert rp.a * rp.b == pytest.approx(lam_i * mu, rel=1e-12)
    assert rp.b <= rp.a < 0.0


def test_interdeparture_pdf_values():
    rp = ref_roots()
    assert mm11.interdeparture_pdf_closed(rp, 0.2, 1.0, 0.0) == 0.0
    assert mm11.interdeparture_pdf_closed(rp, 0.2, 1.0, -1.0) == 0.0
    assert mm11.interdeparture_pdf_closed(rp, 0.2, 1.0, 8.0) == pytest.approx(0.05051, abs=5e-5)
    # cross-check against numerical inversion of the rational transform
    inv = laplace.invert(lambda s: 0.2 / (s * s + 1.6 * s + 0.2), 8.0)
    assert mm11.interdeparture_pdf_closed(rp, 0.2, 1.0, 8.0) == pytest.approx(inv, abs=1e-8)


def test_interdeparture_pdf_repeated_root():
    rp = mm11.roots(1.0, 1.0, 1.0)
    assert mm11.interdeparture_pdf_closed(rp, 1.0, 1.0, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_aoi_violation_values():
    rp = ref_roots()
    assert mm11.aoi_violation_closed(rp, 0.0) == pytest.approx(1.0, rel=1e-14)
    assert mm11.aoi_violation_closed(rp, 8.0) == pytest.approx(0.369589, abs=1e-5)
    assert mm11.aoi_violation_closed(rp, 500.0) < 1e-25
    with pytest.raises(ValueError):
        mm11.aoi_violation_closed(rp, -1.0)


def test_paoi_violation_values():
    rp = ref_roots()
    assert mm11.paoi_violation_closed(rp, 0.6, 1.0, 0.0) == pytest.approx(1.0, rel=1e-14)
    assert mm11.paoi_violation_closed(rp, 0.6, 1.0, 8.625) == pytest.approx(0.371030, abs=1e-5)
    assert mm11.paoi_violation_closed(rp, 0.6, 1.0, 500.0) < 1e-25


def test_paoi_pdf_values():
    rp = ref_roots()
    assert mm11.paoi_pdf_closed(rp, 0.6, 1.0, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert mm11.paoi_pdf_closed(rp, 0.6, 1.0, -0.5) == 0.0
    # density equals -d/dp of the tail probability
    p = 8.625
    h = 1e-6
    fd = (mm11.paoi_violation_closed(rp, 0.6, 1.0, p - h)
          - mm11.paoi_violation_closed(rp, 0.6, 1.0, p + h)) / (2 * h)
    assert mm11.paoi_pdf_closed(rp, 0.6, 1.0, p) == pytest.approx(fd, abs=1e-7)


def test_paoi_pdf_normalizes():
    rp = ref_roots()
    horizon = 21.0 / abs(rp.a)
    quad = laplace.integrate(lambda x: mm11.paoi_pdf_closed(rp, 0.6, 1.0, x),
                             0.0, horizon, tol=1e-11)
    tail = mm11.paoi_violation_closed(rp, 0.6, 1.0, horizon)
    assert quad + tail == pytest.approx(1.0, abs=1e-9)


def test_moments_reference_values():
    m = mm11.moments(ref_roots(), 0.6, 1.0, 0.2)
    assert m.mean_aoi == pytest.approx(8.0, rel=1e-14)
    assert m.mean_paoi == pytest.approx(8.625, rel=1e-14)
    assert m.var_aoi == pytest.approx(54.0, rel=1e-14)
    assert m.var_paoi == pytest.approx(54.390625, rel=1e-14)


def test_moments_single_source():
    lam = 0.7
    m = mm11.moments(mm11.roots(lam, 1.0, lam), lam, 1.0, lam)
    assert m.mean_aoi == pytest.approx((lam + 1.0) / lam, rel=1e-14)


def test_variances_decrease_with_rate():
    lo = mm11.moments(mm11.roots(0.6, 1.0, 0.3), 0.6, 1.0, 0.3)
    hi = mm11.moments(ref_roots(), 0.6, 1.0, 0.2)
    assert lo.var_aoi < hi.var_aoi
    assert lo.var_paoi < hi.var_paoi


def _fd_grad(metric, rates, mu, i, t, h):
    # five-point central difference in the i-th rate, total rate held fixed
    def p_at(step):
        lam = sum(rates)
        lam_i = rates[i - 1] + step
        rp = mm11.roots(lam, mu, lam_i)
        if metric == "aoi":
            return mm11.aoi_violation_closed(rp, t)
        return mm11.paoi_violation_closed(rp, lam, mu, t)

    return (-p_at(2 * h) + 8 * p_at(h) - 8 * p_at(-h) + p_at(-2 * h)) / (12 * h)


def _fd_hess(metric, rates, mu, i, t, h):
    def p_at(step):
        lam = sum(rates)
        rp = mm11.roots(lam, mu, rates[i - 1] + step)
        if metric == "aoi":
            return mm11.aoi_violation_closed(rp, t)
        return mm11.paoi_violation_closed(rp, lam, mu, t)

    return (-p_at(2 * h) + 16 * p_at(h) - 30 * p_at(0.0)
            + 16 * p_at(-h) - p_at(-2 * h)) / (12 * h * h)


def test_gradients_match_finite_differences_reference_point():
    rates = (0.4, 0.4)
    got = mm11.aoi_violation_grad(rates, 1.0, 1, 10.0)
    fd = _fd_grad("aoi", rates, 1.0, 1, 10.0, 1e-5)
    assert got == pytest.approx(fd, rel=1e-6)
    got = mm11.paoi_violation_grad(rates, 1.0, 1, 10.0)
    fd = _fd_grad("paoi", rates, 1.0, 1, 10.0, 1e-5)
    assert got == pytest.approx(fd, rel=1e-6)


def test_hessians_match_finite_differences_reference_point():
    rates = (0.4, 0.4)
    got = mm11.aoi_violation_hess(rates, 1.0, 1, 10.0)
    fd = _fd_hess("aoi", rates, 1.0, 1, 10.0, 1e-3)
    assert got == pytest.approx(fd, rel=1e-4)
    got = mm11.paoi_violation_hess(rates, 1.0, 1, 10.0)
    fd = _fd_hess("paoi", rates, 1.0, 1, 10.0, 1e-3)
    assert got == pytest.approx(fd, rel=1e-4)


@settings(max_examples=150, deadline=None)
@given(mu=st.floats(0.5, 2.0), ratio=st.floats(0.2, 2.0),
       frac=st.floats(0.05, 0.95), t=st.floats(0.5, 20.0))
def test_derivative_signs_random(mu, ratio, frac, t):
    lam = ratio * mu
    rates = (frac * lam, (1.0 - frac) * lam)
    assert mm11.aoi_violation_grad(rates, mu, 1, t) < 0.0
    assert mm11.paoi_violation_grad(rates, mu, 1, t) < 0.0
    assert mm11.aoi_violation_hess(rates, mu, 1, t) > 0.0
    assert mm11.paoi_violation_hess(rates, mu, 1, t) > 0.0


def test_gradient_finite_in_small_rate_limit():
    rates = (1e-9, 0.6 - 1e-9)
    for val in (mm11.aoi_violation_grad(rates, 1.0, 1, 8.0),
                mm11.paoi_violation_grad(rates, 1.0, 1, 8.0)):
        assert math.isfinite(val) and val < 0.0


def test_cross_rate_independence():
    # P_i depends on its own rate and the total only: reshuffling the other
    # sources' rates at fixed total changes nothing
    a = mm11.aoi_violation_grad((0.2, 0.4, 0.2), 1.0, 1, 8.0)
    b = mm11.aoi_violation_grad((0.2, 0.1, 0.5), 1.0, 1, 8.0)
    assert a == b
    ha = mm11.paoi_violation_hess((0.2, 0.4, 0.2), 1.0, 1, 8.0)
    hb = mm11.paoi_violation_hess((0.2, 0.1, 0.5), 1.0, 1, 8.0)
    assert ha == hb


def test_repeated_root_branch_is_continuous():
    # the critical point sits at lam = mu with the whole budget on one source
    lam = mu = 1.0
    at = mm11.roots(lam, mu, lam)
    near = mm11.roots(lam, mu, lam * (1.0 - 1e-7))
    for w in (0.5, 5.0, 12.0):
        assert abs(mm11.aoi_violation_closed(at, w)
                   - mm11.aoi_violation_closed(near, w)) < 1e-5
        assert abs(mm11.paoi_violation_closed(at, lam, mu, w)
                   - mm11.paoi_violation_closed(near, lam, mu, w)) < 1e-5
        assert abs(mm11.interdeparture_pdf_closed(at, lam, mu, w)
                   - mm11.interdeparture_pdf_closed(near, lam, mu, w)) < 1e-5
        assert abs(mm11.paoi_pdf_closed(at, lam, mu, w)
                   - mm11.paoi_pdf_closed(near, lam, mu, w)) < 1e-5


def test_series_and_direct_branches_agree_at_switch():
    # both evaluation branches must match a 50-digit reference on either
    # side of the D*t = 0.5 switch
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    lam, mu = 1.0, 1.0
    lam_i = 0.999
    rp = mm11.roots(lam, mu, lam_i)
    t_switch = mm11._SWITCH / rp.gap
    rates = (lam_i, lam - lam_i)

    def exact(t):
        one = mpmath.mpf(1)
        big = one + one
        c = mpmath.mpf(lam_i)
        disc = big * big - 4 * c
        b = (-big - mpmath.sqrt(disc)) / 2
        a = c / b
        d = a - b
        t = mpmath.mpf(t)
        x = d * t
        ea, eb, el = mpmath.e ** (a * t), mpmath.e ** (b * t), mpmath.e ** (-big * t)
        return [float(v) for v in (
            (a * eb - b * ea) / d,
            el + big / d * (ea - eb),
            c / d * (ea - eb),
            big * (el + (b * eb - a * ea) / d),
            (one / d ** 3) * ((a * x - big) * eb + (b * x + big) * ea),
            -(big / d ** 3) * ((x + 2) * eb + (x - 2) * ea),
            (one / d ** 5) * ((a * x * x + (4 * a + 2 * b) * x - 6 * big) * eb
                              + (-b * x * x + (4 * b + 2 * a) * x + 6 * big) * ea),
            (big / d ** 5) * ((x * x - 6 * x + 12) * ea - (x * x + 6 * x + 12) * eb),
        )]

    fns = (lambda t: mm11.aoi_violation_closed(rp, t),
           lambda t: mm11.paoi_violation_closed(rp, lam, mu, t),
           lambda t: mm11.interdeparture_pdf_closed(rp, lam_i, mu, t),
           lambda t: mm11.paoi_pdf_closed(rp, lam, mu, t),
           lambda t: mm11.aoi_violation_grad(rates, mu, 1, t),
           lambda t: mm11.paoi_violation_grad(rates, mu, 1, t),
           lambda t: mm11.aoi_violation_hess(rates, mu, 1, t),
           lambda t: mm11.paoi_violation_hess(rates, mu, 1, t))
    for t in (t_switch * (1.0 - 1e-9), t_switch * (1.0 + 1e-9)):
        ref = exact(t)
        for fn, want in zip(fns, ref):
            assert fn(t) == pytest.approx(want, rel=5e-11)


def test_vectorized_threshold_evaluation():
    rp = ref_roots()
    grid = np.linspace(0.0, 20.0, 11)
    vec = mm11.aoi_violation_closed(rp, grid)
    assert vec.shape == grid.shape
    for g, v in zip(grid, vec):
        assert v == mm11.aoi_violation_closed(rp, float(g))


@settings(max_examples=150, deadline=None)
@given(mu=st.floats(0.5, 2.0), ratio=st.floats(0.2, 2.0), frac=st.floats(0.05, 0.95))
def test_violations_monotone_in_threshold(mu, ratio, frac):
    lam = ratio * mu
    rp = mm11.roots(lam, mu, frac * lam)
    grid = np.linspace(0.2, 25.0, 40)
    aoi = mm11.aoi_violation_closed(rp, grid)
    paoi = mm11.paoi_violation_closed(rp, lam, mu, grid)
    assert np.all(np.diff(aoi) < 0.0)
    assert np.all(np.diff(paoi) < 0.0)
