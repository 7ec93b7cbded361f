"""Transform inversion, adaptive quadrature and root bracketing.

Everything in this module is a pure function (or an immutable wrapper), so
all of it is reentrant and safe for concurrent use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import comb

from .errors import NumericsError

__all__ = ["TransformFn", "invert", "integrate", "bisect_monotone"]


def _eval_transform(fn: Callable, s: np.ndarray) -> np.ndarray:
    """Evaluate fn on an array of complex points, falling back to a loop."""
    try:
        out = np.asarray(fn(s), dtype=complex)
        if out.shape == s.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([complex(fn(si)) for si in s])


@dataclass(frozen=True)
class TransformFn:
    """A Laplace-domain function s -> F(s), analytic for Re(s) > abscissa_hint.

    The evaluator should accept complex numpy arrays; a scalar-only callable
    is tolerated (evaluated in a loop). Finiteness on the right half-plane is
    probed at construction.
    """

    evaluator: Callable
    abscissa_hint: float = 0.0

    def __post_init__(self):
        shift = max(self.abscissa_hint, 0.0)
        probes = np.array([0.5 + 0j, 1.0 + 2.3j, 7.0 + 31.0j]) + shift
        vals = _eval_transform(self.evaluator, probes)
        if not np.all(np.isfinite(vals)):
            raise ValueError("transform evaluator is not finite for Re(s) > abscissa_hint")


@lru_cache(maxsize=32)
def _euler_nodes(terms: int):
    """Nodes and weights of the Euler-summation Bromwich inversion.

    With parameter M the estimate is

        f(t) ~ (10^(M/3) / t) * sum_{k=0}^{2M} eta_k Re F(beta_k / t),
        beta_k = M ln(10)/3 + i pi k,

    where the eta_k implement binomial (Euler) averaging of the partial sums
    of the alternating Fourier series (Abate & Whitt's framework). Larger M
    lowers the discretization error but amplifies roundoff by 10^(M/3); in
    double precision M around 18-26 is the useful range.
    """
    m = terms
    xi = np.zeros(2 * m + 1)
    xi[0] = 0.5
    xi[1:m + 1] = 1.0
    xi[2 * m] = 2.0 ** (-m)
    for k in range(1, m):
        xi[2 * m - k] = xi[2 * m - k + 1] + 2.0 ** (-m) * comb(m, k, exact=True)
    k = np.arange(2 * m + 1)
    beta = m * math.log(10.0) / 3.0 + 1j * np.pi * k
    eta = np.where(k % 2 == 0, 1.0, -1.0) * xi
    return beta, eta, 10.0 ** (m / 3.0)


def _euler_sum(fn: Callable, x: float, terms: int) -> float:
    beta, eta, scale = _euler_nodes(terms)
    vals = _eval_transform(fn, beta / x)
    if not np.all(np.isfinite(vals)):
        raise NumericsError(f"transform evaluation produced non-finite values at x={x}")
    return scale / x * float(np.dot(eta, vals.real))


def invert(transform, x: float, tol: float = 1e-8, *, terms: int = 18, lift: int = 4,
           clamp_negative: bool = True) -> float:
    """Invert a unilateral Laplace transform at a point on the positive axis.

    The value is computed at ``terms`` and ``terms - lift`` Euler terms and
    the difference serves as the error estimate (roundoff grows with the
    term count, so the confirmation run uses the lower order and the
    higher-order value is returned). If the estimate exceeds ``tol`` a
    :class:`NumericsError` carrying the residual is raised. Values in
    [-tol, 0) are clamped to 0 (ringing near discontinuities must not leak
    negative densities); values below -tol raise.

    ``transform`` is a :class:`TransformFn` or a bare callable (assumed
    analytic for Re(s) > 0).
    """
    if x <= 0.0:
        raise ValueError(f"inversion point must be positive, got {x}")
    if not (1e-12 < tol < 1e-3):
        raise ValueError(f"tol must lie in (1e-12, 1e-3), got {tol}")
    if not 1 <= lift < terms:
        raise ValueError("lift must be positive and smaller than terms")
    if isinstance(transform, TransformFn):
        fn = transform.evaluator
        shift = max(transform.abscissa_hint, 0.0)
    else:
        fn = transform
        shift = 0.0
    if shift > 0.0:
        base = fn
        fn = lambda s: base(s + shift)  # noqa: E731

    coarse = _euler_sum(fn, x, terms - lift)
    fine = _euler_sum(fn, x, terms)
    if shift > 0.0:
        grow = math.exp(shift * x)
        coarse, fine = coarse * grow, fine * grow
    residual = abs(fine - coarse)
    if residual > tol:
        raise NumericsError(
            f"inversion at x={x} did not converge: residual estimate {residual:.3e} > tol {tol:.3e}",
            residual=residual)
    if clamp_negative and fine < 0.0:
        if fine < -tol:
            raise NumericsError(
                f"inversion at x={x} returned {fine:.3e} < -tol; transform is not a density",
                residual=residual)
        fine = 0.0
    return fine


# ---------------------------------------------------------------------------
# quadrature


def _simpson_recurse(f, a, fa, m, fm, b, fb, whole, tol, depth, state):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    state["evals"] += 2
    if state["evals"] > state["budget"]:
        raise NumericsError(
            f"quadrature budget of {state['budget']} evaluations exhausted "
            f"(remaining interval [{a:.6g}, {b:.6g}])")
    if not (math.isfinite(flm) and math.isfinite(frm)):
        raise NumericsError(f"integrand not finite inside [{a:.6g}, {b:.6g}]")
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    # the absolute floor and the width guard stop refinement once panel
    # errors are dominated by noise in the integrand evaluations
    if (abs(err) <= 15.0 * tol or abs(err) <= state["floor"]
            or (b - a) <= 1e-12 * state["scale"]):
        return left + right + err / 15.0
    if depth <= 0:
        raise NumericsError(f"quadrature recursion depth exhausted in [{a:.6g}, {b:.6g}]",
                            residual=abs(err))
    half = 0.5 * tol
    return (_simpson_recurse(f, a, fa, lm, flm, m, fm, left, half, depth - 1, state)
            + _simpson_recurse(f, m, fm, rm, frm, b, fb, right, half, depth - 1, state))


def _simpson(f, a, b, tol, state, depth=50):
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    state["evals"] += 3
    if not (math.isfinite(fa) and math.isfinite(fm) and math.isfinite(fb)):
        raise NumericsError(f"integrand not finite on [{a:.6g}, {b:.6g}]")
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_recurse(f, a, fa, m, fm, b, fb, whole, tol, depth, state)


def integrate(f, a: float, b: float, tol: float = 1e-9, *, atoms=None, points=None,
              inf_scale: float = 4.0, budget: int = 500_000) -> float:
    """Adaptive-Simpson integral of ``f`` over [a, b] with declared atoms.

    ``atoms`` is a sequence of ``(x0, contribution)`` pairs: each analytic
    point-mass contribution is added when x0 falls inside [a, b] and is never
    sampled by the quadrature. ``points`` lists known breakpoints (kinks,
    jumps) used to pre-split the interval. ``b`` may be ``math.inf``, handled
    by the exponential-decay substitution t = a - s ln(1-u) with s =
    ``inf_scale``; the integrand must then decay faster than exp(-t/s).
    Exceeding ``budget`` evaluations raises :class:`NumericsError`.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if b < a:
        raise ValueError(f"inverted integration range [{a}, {b}]")

    total = 0.0
    if atoms:
        for x0, contribution in atoms:
            if a <= x0 <= b:
                total += contribution

    if b == a:
        return total

    if math.isinf(b):
        s0 = inf_scale

        def g(u):
            if u >= 1.0:
                return 0.0
            t = a - s0 * math.log1p(-u)
            return f(t) * s0 / (1.0 - u)

        cuts = [0.0]
        if points:
            for p in sorted(points):
                if p > a and math.isfinite(p):
                    cuts.append(-math.expm1(-(p - a) / s0))
        cuts.append(1.0)
        state = {"evals": 0, "budget": budget, "floor": 1e-12, "scale": 1.0}
        tol_per = tol / (len(cuts) - 1)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            total += _simpson(g, lo, hi, tol_per, state)
        return total

    cuts = [a]
    if points:
        for p in sorted(points):
            if a < p < b:
                cuts.append(p)
    cuts.append(b)
    state = {"evals": 0, "budget": budget, "floor": 1e-12, "scale": b - a}
    tol_per = tol / (len(cuts) - 1)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += _simpson(f, lo, hi, tol_per, state)
    return total


def bisect_monotone(g, lo: float, hi: float, tol: float) -> float:
    """Root of a monotone function by bisection on a sign-changing bracket.

    Returns r with bracket width <= tol (or an exact zero if one is hit).
    Completes within ceil(log2((hi-lo)/tol)) + 2 iterations. Raises
    ValueError if g(lo) and g(hi) have the same strict sign.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if hi < lo:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    glo = g(lo)
    if glo == 0.0:
        return lo
    ghi = g(hi)
    if ghi == 0.0:
        return hi
    if (glo > 0.0) == (ghi > 0.0):
        raise ValueError(f"bracket [{lo}, {hi}] does not change sign: g={glo:.3e}, {ghi:.3e}")
    lo_positive = glo > 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0.0) == lo_positive:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
