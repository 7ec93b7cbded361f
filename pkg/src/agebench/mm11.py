"""Closed-form timeliness results for exponential service.

Every quantity here derives from the root pair (a, b) of

    s^2 + (lam + mu) s + lam_i mu = 0,

with a + b = -(lam + mu) and a b = lam_i mu. The raw textbook expressions
are 0/0 at the repeated root a = b and cancel badly near it, so each
formula is evaluated on two branches switched at D*t = 0.5 (D = a - b):
a direct branch in the bounded exponentials e^{at}, e^{bt}, and a series
branch obtained from the exact hyperbolic rewrite

    (e^{at} - e^{bt})/D = t e^{mt} sinhc(Dt/2),   m = (a + b)/2,

whose sinhc/phi/psi kernels are expanded around 0. Both branches agree to
~1e-11 at the switch and the series branch is exact in the D -> 0 limit.

All functions broadcast over numpy arrays. Everything is stateless and
reentrant. Total arrival rate and per-source rate are independent inputs
throughout; callers enforce sum(rates) = lam. Partial derivatives treat the
total rate as a constant, which is the convention consistent with the
rate-budget constraint, and cross-partials with respect to other sources'
rates are identically zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RootPair", "roots", "interdeparture_pdf_closed", "interdeparture_cdf_closed",
    "aoi_violation_closed", "paoi_violation_closed", "paoi_pdf_closed", "Moments",
    "moments", "aoi_violation_grad", "paoi_violation_grad",
    "aoi_violation_hess", "paoi_violation_hess",
]

_SWITCH = 0.5  # branch point in D*t between series and direct evaluation


@dataclass(frozen=True)
class RootPair:
    """Roots a >= b of the characteristic quadratic, and their gap D = a - b."""

    a: float
    b: float
    gap: float


def roots(lam, mu, lam_i) -> RootPair:
    """Real roots of s^2 + (lam+mu)s + lam_i*mu = 0, numerically stable.

    The smaller root is computed from the quadratic formula and the larger
    one from the product identity a*b = lam_i*mu, avoiding cancellation when
    lam_i*mu << (lam+mu)^2. Requires 0 < lam_i <= lam and mu > 0; the
    discriminant (lam-mu)^2 + 4(lam-lam_i)mu is then nonnegative.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam_i = np.asarray(lam_i, dtype=float)
    if np.any(mu <= 0.0):
        raise ValueError("service rate mu must be positive")
    if np.any(lam_i <= 0.0):
        raise ValueError("per-source rate must be positive")
    if np.any(lam_i > lam * (1.0 + 1e-12)):
        raise ValueError("per-source rate cannot exceed the total rate")
    total = lam + mu
    disc = np.maximum((lam - mu) ** 2 + 4.0 * (lam - lam_i) * mu, 0.0)
    b = -0.5 * (total + np.sqrt(disc))
    a = lam_i * mu / b
    scalar = np.ndim(a) == 0
    if scalar:
        return RootPair(float(a), float(b), float(a - b))
    return RootPair(np.asarray(a), np.asarray(b), np.asarray(a - b))


def _sinhc(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    zg = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z * z / 6.0, np.sinh(zg) / zg)


def _phi(x):
    """(2x cosh(x/2) - 4 sinh(x/2)) / x^3 as a series, valid for |x| <= 0.5."""
    x2 = np.asarray(x, dtype=float) ** 2
    return 1.0 / 6.0 + x2 / 240.0 + x2 * x2 / 26880.0 + x2 ** 3 / 5806080.0


def _psi(x):
    """(2(x^2+12) sinh(x/2) - 12x cosh(x/2)) / x^5 as a series, |x| <= 0.5."""
    x2 = np.asarray(x, dtype=float) ** 2
    return 1.0 / 60.0 + x2 / 3360.0 + x2 * x2 / 483840.0 + x2 ** 3 / 127733760.0


def _parts(rp: RootPair, t):
    """Common pieces: m, D, x = D*t and the small-branch mask."""
    a = np.asarray(rp.a, dtype=float)
    b = np.asarray(rp.b, dtype=float)
    d = np.asarray(rp.gap, dtype=float)
    t = np.asarray(t, dtype=float)
    m = 0.5 * (a + b)
    x = d * t
    return a, b, d, m, t, x, x < _SWITCH


def _delta(rp: RootPair, t):
    """(e^{at} - e^{bt}) / D, finite and continuous through D = 0."""
    a, b, d, m, t, x, small = _parts(rp, t)
    dg = np.where(d > 0.0, d, 1.0)
    direct = (np.exp(a * t) - np.exp(b * t)) / dg
    series = t * np.exp(m * t) * _sinhc(np.where(small, x, 0.0) / 2.0)
    return np.where(small, series, direct)


def _scalar(template, out):
    return float(out) if np.ndim(template) == 0 and np.ndim(out) == 0 else out


def interdeparture_pdf_closed(rp: RootPair, lam_i, mu, x):
    """Density of the time between consecutive deliveries of one source.

    lam_i*mu/(a-b) (e^{ax} - e^{bx}) for x >= 0; the repeated-root limit is
    lam_i*mu*x*e^{ax}. Also the stationary age density for the same source.
    """
    xv = np.asarray(x, dtype=float)
    out = np.where(xv < 0.0, 0.0,
                   np.asarray(lam_i) * np.asarray(mu) * _delta(rp, np.maximum(xv, 0.0)))
    return _scalar(x, out)


def aoi_violation_closed(rp: RootPair, w):
    """P(age > w): (a e^{bw} - b e^{aw})/(a - b); limit (1 - aw) e^{aw}."""
    wv = np.asarray(w, dtype=float)
    if np.any(wv < 0.0):
        raise ValueError("threshold must be nonnegative")
    a, b, d, m, t, x, small = _parts(rp, wv)
    dg = np.where(d > 0.0, d, 1.0)
    direct = (a * np.exp(b * t) - b * np.exp(a * t)) / dg
    series = np.exp(m * t) * (np.cosh(np.where(small, x, 0.0) / 2.0)
                              - m * t * _sinhc(np.where(small, x, 0.0) / 2.0))
    out = np.where(small, series, direct)
    return _scalar(w, out)


def interdeparture_cdf_closed(rp: RootPair, x):
    """CDF of the inter-departure time (equals 1 - aoi_violation_closed)."""
    xv = np.asarray(x, dtype=float)
    out = np.where(xv < 0.0, 0.0, 1.0 - aoi_violation_closed(rp, np.maximum(xv, 0.0)))
    return _scalar(x, out)


def paoi_violation_closed(rp: RootPair, lam, mu, p):
    """P(peak age > p): e^{-(lam+mu)p} + (lam+mu)/(a-b) (e^{ap} - e^{bp})."""
    pv = np.asarray(p, dtype=float)
    if np.any(pv < 0.0):
        raise ValueError("threshold must be nonnegative")
    total = np.asarray(lam, dtype=float) + np.asarray(mu, dtype=float)
    out = np.exp(-total * pv) + total * _delta(rp, pv)
    return _scalar(p, out)


def paoi_pdf_closed(rp: RootPair, lam, mu, x):
    """Peak-age density (lam+mu)(e^{-(lam+mu)x} + (b e^{bx} - a e^{ax})/(a-b))."""
    xv = np.asarray(x, dtype=float)
    a, b, d, m, t, xx, small = _parts(rp, np.maximum(xv, 0.0))
    total = np.asarray(lam, dtype=float) + np.asarray(mu, dtype=float)
    # (b e^{bx} - a e^{ax})/D = -m delta(x) - (e^{ax}+e^{bx})/2
    eplus = 0.5 * (np.exp(a * t) + np.exp(b * t))
    out = total * (np.exp(-total * t) - m * _delta(rp, t) - eplus)
    out = np.where(xv < 0.0, 0.0, out)
    return _scalar(x, out)


@dataclass(frozen=True)
class Moments:
    mean_aoi: float
    var_aoi: float
    mean_paoi: float
    var_paoi: float


def moments(rp: RootPair, lam, mu, lam_i) -> Moments:
    """Means and variances of age and peak age.

    mean_aoi  = (lam+mu)/(lam_i mu)
    var_aoi   = ((lam+mu)/(lam_i mu))^2 - 2/(lam_i mu)
    mean_paoi = 1/(lam+mu) + (lam+mu)/(lam_i mu)
    var_paoi  = 1/(lam+mu)^2 + ((lam+mu)/(lam_i mu))^2 - 2/(lam_i mu)
    """
    total = lam + mu
    c = lam_i * mu
    mean_aoi = total / c
    var_aoi = mean_aoi ** 2 - 2.0 / c
    return Moments(mean_aoi=mean_aoi, var_aoi=var_aoi,
                   mean_paoi=1.0 / total + mean_aoi,
                   var_paoi=1.0 / total ** 2 + mean_aoi ** 2 - 2.0 / c)


def _rate_parts(rates, mu, i):
    rates = np.asarray(rates, dtype=float)
    if not 1 <= i <= rates.shape[-1]:
        raise ValueError(f"source index {i} out of range 1..{rates.shape[-1]}")
    lam = float(rates.sum())
    lam_i = float(rates[i - 1])
    return lam, lam_i, roots(lam, mu, lam_i)


def _paoi_grad_core(lam, mu, lam_i, p):
    rp = roots(lam, mu, lam_i)
    a, b, d, m, t, x, small = _parts(rp, np.asarray(p, dtype=float))
    total = np.asarray(lam, dtype=float) + mu
    dg = np.where(d > 0.0, d, 1.0)
    direct = -(total * mu / dg ** 3) * ((x + 2.0) * np.exp(b * t) + (x - 2.0) * np.exp(a * t))
    series = -total * mu * t ** 3 * np.exp(m * t) * _phi(x)
    return np.where(small, series, direct)


def paoi_violation_grad(rates, mu, i, p):
    """d/d(lam_i) of the peak-age violation probability, total rate fixed.

    -((lam+mu) mu / D^3) ((Dp+2) e^{bp} + (Dp-2) e^{ap}); strictly negative
    for p > 0. Partials with respect to other sources' rates are zero.
    """
    lam, lam_i, _ = _rate_parts(rates, mu, i)
    return _scalar(p, _paoi_grad_core(lam, mu, lam_i, p))


def _aoi_grad_core(lam, mu, lam_i, w):
    rp = roots(lam, mu, lam_i)
    a, b, d, m, t, x, small = _parts(rp, np.asarray(w, dtype=float))
    total = np.asarray(lam, dtype=float) + mu
    dg = np.where(d > 0.0, d, 1.0)
    xs = np.where(small, x, 0.0)
    direct = (mu / dg ** 3) * ((a * x - total) * np.exp(b * t)
                               + (b * x + total) * np.exp(a * t))
    series = mu * np.exp(m * t) * (m * t ** 3 * _phi(xs) - 0.5 * t ** 2 * _sinhc(xs / 2.0))
    return np.where(small, series, direct)


def aoi_violation_grad(rates, mu, i, w):
    """d/d(lam_i) of the age violation probability, total rate fixed.

    (mu / D^3) ((aDw - (lam+mu)) e^{bw} + (bDw + (lam+mu)) e^{aw}); strictly
    negative for w > 0. Cross-partials are zero.
    """
    lam, lam_i, _ = _rate_parts(rates, mu, i)
    return _scalar(w, _aoi_grad_core(lam, mu, lam_i, w))


def _paoi_hess_core(lam, mu, lam_i, p):
    rp = roots(lam, mu, lam_i)
    a, b, d, m, t, x, small = _parts(rp, np.asarray(p, dtype=float))
    total = np.asarray(lam, dtype=float) + mu
    dg = np.where(d > 0.0, d, 1.0)
    direct = (total * mu ** 2 / dg ** 5) * ((x * x - 6.0 * x + 12.0) * np.exp(a * t)
                                            - (x * x + 6.0 * x + 12.0) * np.exp(b * t))
    series = total * mu ** 2 * t ** 5 * np.exp(m * t) * _psi(x)
    return np.where(small, series, direct)


def paoi_violation_hess(rates, mu, i, p):
    """d^2/d(lam_i)^2 of the peak-age violation probability (positive).

    ((lam+mu) mu^2 / D^5)((D^2p^2 - 6Dp + 12) e^{ap} - (D^2p^2 + 6Dp + 12) e^{bp}).
    The full Hessian over the rate vector is diagonal.
    """
    lam, lam_i, _ = _rate_parts(rates, mu, i)
    return _scalar(p, _paoi_hess_core(lam, mu, lam_i, p))


def _aoi_hess_core(lam, mu, lam_i, w):
    rp = roots(lam, mu, lam_i)
    a, b, d, m, t, x, small = _parts(rp, np.asarray(w, dtype=float))
    total = np.asarray(lam, dtype=float) + mu
    dg = np.where(d > 0.0, d, 1.0)
    direct = (mu ** 2 / dg ** 5) * (
        (a * x * x + (4.0 * a + 2.0 * b) * x - 6.0 * total) * np.exp(b * t)
        + (-b * x * x + (4.0 * b + 2.0 * a) * x + 6.0 * total) * np.exp(a * t))
    series = mu ** 2 * np.exp(m * t) * (-m * t ** 5 * _psi(x) + 0.5 * t ** 4 * _phi(x))
    return np.where(small, series, direct)


def aoi_violation_hess(rates, mu, i, w):
    """d^2/d(lam_i)^2 of the age violation probability (positive).

    (mu^2 / D^5)((a x^2 + (4a+2b)x - 6(lam+mu)) e^{bw}
                 + (-b x^2 + (4b+2a)x + 6(lam+mu)) e^{aw}),  x = Dw.
    The full Hessian over the rate vector is diagonal.
    """
    lam, lam_i, _ = _rate_parts(rates, mu, i)
    return _scalar(w, _aoi_hess_core(lam, mu, lam_i, w))
