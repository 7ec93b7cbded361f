"""General-service analytics for the multi-source bufferless preemptive queue.

The delivered-update system time has density e^{-lam x} f_S(x) / L_S(lam),
the inter-departure transform of source i is

    L_Y(s) = lam_i L_S(lam + s) / (lam_i L_S(lam + s) + s),

and the stationary age of source i has the same law as its inter-departure
time, so age violation probabilities are inter-departure tail probabilities.
Peak-age quantities come from the convolution of the inter-departure law
with the system-time law.

Tail probabilities are obtained by inverting the complementary-CDF
transform (1 - L_Y(s))/s rather than integrating a pointwise-inverted
density: the CDF-level route stays accurate when the service law has atoms
(deterministic service makes the inter-departure density jump at multiples
of the service duration, where pointwise inversion rings).

Results are memoized per (system, source); the caches are plain
functools caches over immutable keys, so concurrent readers are safe and
results do not depend on thread count.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import laplace
from .errors import NumericsError
from .service import ServiceKind, ServiceModel

__all__ = [
    "SystemSpec", "DistKind", "AgeDistribution", "interdeparture_lt",
    "system_time_pdf", "system_time_atoms", "aoi_pdf", "aoi_violation",
    "interdeparture_cdf", "paoi_pdf", "paoi_violation", "mean_interdeparture",
    "tail_horizon", "distribution",
]

# inversion error targets: tight for exponential service (everything smooth),
# relaxed otherwise (service atoms or bounded support put jumps or kinks into
# the inter-departure law, and the inversion rings near them)
_TOL_SMOOTH = 1e-7
_TOL_KINKED = 9e-4


@dataclass(frozen=True)
class SystemSpec:
    """An N-source system: per-source Poisson rates, one shared server.

    Immutable (and hashable, which the per-source caches rely on). Rates and
    thresholds are stored as tuples; source indices in the public functions
    are 1-based.
    """

    rates: tuple[float, ...]
    service: ServiceModel
    thresholds_aoi: tuple[float, ...]
    thresholds_paoi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "thresholds_aoi", tuple(float(w) for w in self.thresholds_aoi))
        object.__setattr__(self, "thresholds_paoi", tuple(float(p) for p in self.thresholds_paoi))
        if not self.rates:
            raise ValueError("at least one source is required")
        if any(r <= 0.0 or not math.isfinite(r) for r in self.rates):
            raise ValueError("all arrival rates must be positive and finite")
        if len(self.thresholds_aoi) != len(self.rates) or len(self.thresholds_paoi) != len(self.rates):
            raise ValueError("threshold vectors must match the number of sources")
        if any(w <= 0.0 for w in self.thresholds_aoi) or any(p <= 0.0 for p in self.thresholds_paoi):
            raise ValueError("thresholds must be strictly positive")

    @property
    def n_sources(self) -> int:
        return len(self.rates)

    @property
    def total_rate(self) -> float:
        return float(sum(self.rates))

    @property
    def service_rate(self) -> float:
        return self.service.rate

    def rate_of(self, i: int) -> float:
        if not 1 <= i <= self.n_sources:
            raise ValueError(f"source index {i} out of range 1..{self.n_sources}")
        return self.rates[i - 1]


class DistKind(enum.Enum):
    AOI = "AoI"
    PAOI = "PAoI"
    INTERDEPARTURE = "InterDeparture"
    SYSTEM_TIME = "SystemTime"


@dataclass(frozen=True)
class AgeDistribution:
    """A per-source law bundled with its density, CDF and first two moments."""

    source: int
    kind: DistKind
    pdf: Callable[[float], float]
    cdf: Callable[[float], float]
    mean: float
    variance: float


def _inversion_tol(spec: SystemSpec) -> float:
    if spec.service.kind is ServiceKind.EXPONENTIAL:
        return _TOL_SMOOTH
    return _TOL_KINKED


def interdeparture_lt(spec: SystemSpec, i: int, s):
    """Transform of the inter-departure time of source i (complex s ok)."""
    lam_i = spec.rate_of(i)
    lam = spec.total_rate
    g = lam_i * np.asarray(spec.service.laplace(np.asarray(s, dtype=complex) + lam))
    out = g / (g + np.asarray(s, dtype=complex))
    if np.ndim(s) == 0:
        return out.real.item() if not np.iscomplexobj(np.asarray(s)) else complex(out)
    return out


def _ccdf_transform(spec: SystemSpec, i: int):
    lam_i = spec.rate_of(i)
    lam = spec.total_rate
    service = spec.service

    def fn(s):
        g = lam_i * np.asarray(service.laplace(np.asarray(s, dtype=complex) + lam))
        return (1.0 - g / (g + s)) / s

    return fn


def _pdf_transform(spec: SystemSpec, i: int):
    lam_i = spec.rate_of(i)
    lam = spec.total_rate
    service = spec.service

    def fn(s):
        g = lam_i * np.asarray(service.laplace(np.asarray(s, dtype=complex) + lam))
        return g / (g + s)

    return fn


@lru_cache(maxsize=262144)
def _ccdf_point(spec: SystemSpec, i: int, x: float) -> float:
    if x <= 0.0:
        return 1.0
    val = laplace.invert(_ccdf_transform(spec, i), x, tol=_inversion_tol(spec))
    return min(1.0, max(0.0, val))


@lru_cache(maxsize=262144)
def _pdf_point(spec: SystemSpec, i: int, x: float) -> float:
    if x <= 0.0:
        return 0.0
    return laplace.invert(_pdf_transform(spec, i), x, tol=_inversion_tol(spec))


def system_time_pdf(spec: SystemSpec, x):
    """Continuous density part of the delivered-update system time.

    e^{-lam x} f_S(x) / L_S(lam) for x >= 0; point masses (deterministic
    service) are reported by :func:`system_time_atoms`.
    """
    lam = spec.total_rate
    norm = spec.service.laplace(lam)
    xv = np.asarray(x, dtype=float)
    out = np.where(xv < 0.0, 0.0,
                   np.exp(-lam * np.maximum(xv, 0.0)) * spec.service.density(np.maximum(xv, 0.0)) / norm)
    return float(out) if np.ndim(x) == 0 else out


def system_time_atoms(spec: SystemSpec) -> tuple[tuple[float, float], ...]:
    """Point masses (location, mass) of the system-time law."""
    lam = spec.total_rate
    norm = spec.service.laplace(lam)
    return tuple((loc, m * math.exp(-lam * loc) / norm) for loc, m in spec.service.atoms())


def aoi_pdf(spec: SystemSpec, i: int, x):
    """Stationary age density of source i; identical to the inter-departure
    density (one callable serves both)."""
    if np.ndim(x) == 0:
        return _pdf_point(spec, i, float(x))
    return np.array([_pdf_point(spec, i, float(xi)) for xi in np.asarray(x).ravel()]).reshape(np.shape(x))


interdeparture_pdf = aoi_pdf  # the two laws coincide; same object by construction


def interdeparture_cdf(spec: SystemSpec, i: int, x):
    """CDF of the inter-departure time of source i."""
    if np.ndim(x) == 0:
        return 1.0 - _ccdf_point(spec, i, float(x))
    return np.array([1.0 - _ccdf_point(spec, i, float(xi)) for xi in np.asarray(x).ravel()]).reshape(np.shape(x))


def aoi_violation(spec: SystemSpec, i: int, w: float) -> float:
    """P(age of source i > w), by inversion of the tail transform."""
    if w <= 0.0:
        raise ValueError("age threshold must be positive")
    return _ccdf_point(spec, i, float(w))


def mean_interdeparture(spec: SystemSpec, i: int) -> float:
    """E[Y_i] = 1/(lam_i L_S(lam)); also the mean stationary age."""
    return 1.0 / (spec.rate_of(i) * spec.service.laplace(spec.total_rate))


def paoi_violation(spec: SystemSpec, i: int, p: float) -> float:
    """P(peak age of source i > p).

    The peak age is the independent sum Y + T of an inter-departure time and
    a system time, so P(Y + T <= p) is evaluated by integrating the
    inter-departure CDF against the system-time density (integration by
    parts of the double integral): with dF_T = e^{-lam u} f_S(u) du / L_S(lam),

        P(peak <= p) = int_0^p F_Y(p - u) dF_T(u),

    where atoms of f_S contribute analytically.
    """
    if p <= 0.0:
        raise ValueError("peak-age threshold must be positive")
    lam = spec.total_rate
    norm = spec.service.laplace(lam)
    atom_part = [(u, m * math.exp(-lam * u) * (1.0 - _ccdf_point(spec, i, p - u)))
                 for u, m in spec.service.atoms() if u <= p]

    def integrand(u):
        fs = spec.service.density(u)
        if fs == 0.0:
            return 0.0
        return (1.0 - _ccdf_point(spec, i, p - u)) * math.exp(-lam * u) * fs

    upper = min(p, spec.service.support_upper())
    cut = [] if upper <= 0.0 else [b for b in spec.service.density_breakpoints() if 0.0 < b < upper]
    cont = laplace.integrate(integrand, 0.0, upper, tol=1e-8, points=cut) if upper > 0.0 else 0.0
    cdf = (cont + sum(v for _, v in atom_part)) / norm
    return min(1.0, max(0.0, 1.0 - cdf))


def paoi_pdf(spec: SystemSpec, i: int, x) -> float:
    """Peak-age density: the convolution
    (1/L_S(lam)) int_0^x e^{-lam u} f_S(u) f_Y(x - u) du, atoms analytic."""
    def one(xv: float) -> float:
        if xv <= 0.0:
            return 0.0
        lam = spec.total_rate
        norm = spec.service.laplace(lam)
        atom_part = sum(m * math.exp(-lam * u) * _pdf_point(spec, i, xv - u)
                        for u, m in spec.service.atoms() if u <= xv)

        def integrand(u):
            fs = spec.service.density(u)
            if fs == 0.0:
                return 0.0
            return math.exp(-lam * u) * fs * _pdf_point(spec, i, xv - u)

        upper = min(xv, spec.service.support_upper())
        cut = [b for b in spec.service.density_breakpoints() if 0.0 < b < upper]
        cont = laplace.integrate(integrand, 0.0, upper, tol=1e-8, points=cut) if upper > 0.0 else 0.0
        return (cont + atom_part) / norm

    if np.ndim(x) == 0:
        return one(float(x))
    return np.array([one(float(xi)) for xi in np.asarray(x).ravel()]).reshape(np.shape(x))


@lru_cache(maxsize=4096)
def _dominant_rate(spec: SystemSpec, i: int) -> float:
    """|rightmost real zero| of lam_i L_S(lam + s) + s, the tail decay rate.

    The zero lies in (-lam, 0) whenever lam_i < lam because
    lam_i L_S(0) - lam < 0; for the single-source edge case it can sit at
    -lam itself, which the fallback covers.
    """
    lam = spec.total_rate
    lam_i = spec.rate_of(i)
    service = spec.service

    def h(s):
        return lam_i * float(np.real(service.laplace(complex(lam + s)))) + s

    lo_limit = -lam * (1.0 - 1e-9)
    grid = np.linspace(-lam * 1e-6, lo_limit, 256)
    prev = grid[0]
    hprev = h(prev)
    for s in grid[1:]:
        hs = h(s)
        if hs == 0.0:
            return -float(s)
        if (hs > 0.0) != (hprev > 0.0):
            root = laplace.bisect_monotone(h, float(s), float(prev), tol=1e-12 * lam)
            return -root
        prev, hprev = s, hs
    return lam  # zero pinned at -lam (single source taking the whole budget)


def tail_horizon(spec: SystemSpec, i: int, tail: float = 1e-9) -> float:
    """Horizon H beyond which the age/inter-departure tail is below ``tail``,
    estimated from the dominant-pole envelope."""
    rate = _dominant_rate(spec, i)
    return 1.05 * math.log(1.0 / tail) / rate


def _quad_moments(pdf, upper, points=()) -> tuple[float, float]:
    # tolerances sit above the inversion noise integrated over the span,
    # which is what lets the adaptive refinement terminate
    pts = [p for p in points if 0.0 < p < upper]
    m1 = laplace.integrate(lambda x: x * pdf(x), 0.0, upper, tol=1e-7, points=pts)
    m2 = laplace.integrate(lambda x: x * x * pdf(x), 0.0, upper, tol=1e-6, points=pts)
    return m1, m2 - m1 * m1


def distribution(spec: SystemSpec, i: int, kind: DistKind) -> AgeDistribution:
    """Bundle a per-source law with callables and quadrature-backed moments.

    Age and inter-departure use the exact closed-form mean; variances (and
    the system-time and peak-age moments) come from exponentially weighted
    service moments and quadrature.
    """
    lam = spec.total_rate
    norm = spec.service.laplace(lam)
    mean_t = spec.service.exp_weighted_moment(lam, 1) / norm
    var_t = spec.service.exp_weighted_moment(lam, 2) / norm - mean_t ** 2

    horizon = tail_horizon(spec, i)
    # density jumps sit at multiples of each service atom; hand them to the
    # quadrature as breakpoints
    jump_pts = [k * loc for loc, _ in spec.service.atoms()
                for k in range(1, int(horizon / loc) + 2)]

    if kind in (DistKind.AOI, DistKind.INTERDEPARTURE):
        mean = mean_interdeparture(spec, i)
        _, var = _quad_moments(lambda x: aoi_pdf(spec, i, x), horizon, points=jump_pts)
        return AgeDistribution(source=i, kind=kind,
                               pdf=lambda x: aoi_pdf(spec, i, x),
                               cdf=lambda x: interdeparture_cdf(spec, i, x),
                               mean=mean, variance=var)
    if kind is DistKind.PAOI:
        # peak age = inter-departure time + independent system time, so the
        # moments add; this avoids integrating the (expensive) convolution
        mean = mean_interdeparture(spec, i) + mean_t
        _, var_y = _quad_moments(lambda x: aoi_pdf(spec, i, x), horizon, points=jump_pts)
        return AgeDistribution(source=i, kind=kind,
                               pdf=lambda x: paoi_pdf(spec, i, x),
                               cdf=lambda x: 1.0 - paoi_violation(spec, i, x) if x > 0 else 0.0,
                               mean=mean, variance=var_y + var_t)
    if kind is DistKind.SYSTEM_TIME:
        def st_cdf(x):
            if x <= 0.0:
                return 0.0
            cont = laplace.integrate(lambda u: system_time_pdf(spec, u), 0.0,
                                     min(x, spec.service.support_upper()), tol=1e-9,
                                     points=[b for b in spec.service.density_breakpoints()
                                             if 0 < b < x])
            return cont + sum(m for loc, m in system_time_atoms(spec) if loc <= x)

        return AgeDistribution(source=i, kind=kind,
                               pdf=lambda x: system_time_pdf(spec, x),
                               cdf=st_cdf, mean=mean_t, variance=var_t)
    raise ValueError(f"unsupported distribution kind: {kind}")
