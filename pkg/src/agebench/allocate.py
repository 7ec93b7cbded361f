"""Min-max arrival-rate allocation for exponential service.

Two independent solvers must agree:

* ``solve_equalize`` exploits the structure of the optimum directly: the
  per-source violation probabilities all coincide there, and each one is
  strictly decreasing in its own rate, so the optimum is found by bisecting
  the common level q and inverting each source's probability at q.
* ``solve_newton_barrier`` treats the epigraph form (min s subject to
  P_i(rate_i) <= s, rates > 0, sum = budget) with a log barrier, analytic
  gradients/Hessians and damped Newton steps on the KKT system, with
  backtracking line search.

Both are deterministic and pure; problems can be solved concurrently.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import mm11
from .errors import SolverError

__all__ = ["Metric", "AllocationProblem", "AllocationResult", "violation",
           "max_violation", "solve_equalize", "solve_newton_barrier",
           "sweep_allocation", "grid_search_two_source"]


class Metric(enum.Enum):
    AOI = "AoI"
    PAOI = "PAoI"


@dataclass(frozen=True)
class AllocationProblem:
    """A min-max violation problem over the rate simplex sum(rates) = total."""

    metric: Metric
    thresholds: tuple[float, ...]
    total_rate: float
    service_rate: float
    tolerance: float = 1e-8
    max_iterations: int = 500

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not self.thresholds:
            raise ValueError("at least one source is required")
        if any(t <= 0.0 for t in self.thresholds):
            raise ValueError("thresholds must be strictly positive")
        if self.total_rate <= 0.0 or self.service_rate <= 0.0:
            raise ValueError("rates must be positive")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")

    @property
    def n_sources(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class AllocationResult:
    rates: tuple[float, ...]
    objective: float
    per_source_probs: tuple[float, ...]
    method: str
    iterations: int
    converged: bool
    equalization_spread: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "rates": list(self.rates),
            "objective": self.objective,
            "per_source_probs": list(self.per_source_probs),
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "equalization_spread": self.equalization_spread,
            "diagnostics": {k: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                            for k, v in self.diagnostics.items()},
        }


def violation(metric: Metric, lam, mu, lam_i, threshold):
    """Closed-form per-source violation probability (vectorized in lam_i)."""
    rp = mm11.roots(lam, mu, lam_i)
    if metric is Metric.AOI:
        return mm11.aoi_violation_closed(rp, threshold)
    return mm11.paoi_violation_closed(rp, lam, mu, threshold)


def _grad_vec(metric: Metric, lam, mu, rates, thresholds):
    if metric is Metric.AOI:
        return np.atleast_1d(mm11._aoi_grad_core(lam, mu, rates, thresholds))
    return np.atleast_1d(mm11._paoi_grad_core(lam, mu, rates, thresholds))


def _hess_vec(metric: Metric, lam, mu, rates, thresholds):
    if metric is Metric.AOI:
        return np.atleast_1d(mm11._aoi_hess_core(lam, mu, rates, thresholds))
    return np.atleast_1d(mm11._paoi_hess_core(lam, mu, rates, thresholds))


def _probs(problem: AllocationProblem, rates) -> np.ndarray:
    lam, mu = problem.total_rate, problem.service_rate
    thr = np.asarray(problem.thresholds)
    return np.atleast_1d(violation(problem.metric, lam, mu, np.asarray(rates, dtype=float), thr))


def max_violation(rates, problem: AllocationProblem) -> float:
    """Maximum of the per-source violation probabilities at an allocation."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (problem.n_sources,):
        raise ValueError(f"expected {problem.n_sources} rates, got shape {rates.shape}")
    if np.any(rates <= 0.0):
        raise ValueError("rates must be strictly positive")
    if abs(rates.sum() - problem.total_rate) > 1e-9 * problem.total_rate:
        raise ValueError(f"rates sum to {rates.sum()}, budget is {problem.total_rate}")
    return float(_probs(problem, rates).max())


def solve_equalize(problem: AllocationProblem) -> AllocationResult:
    """Solve by bisecting the common violation level.

    For a level q each source needs rate P_i^{-1}(q); the total required
    rate is continuous and strictly decreasing in q, so one outer bisection
    pins the level at which the budget is met exactly. A source whose
    probability cannot be pushed down to q even with the whole budget is
    capped at the budget, which forces the outer bisection to raise q.
    """
    lam, mu = problem.total_rate, problem.service_rate
    n = problem.n_sources
    thr = problem.thresholds

    if n == 1:
        p = float(violation(problem.metric, lam, mu, lam, thr[0]))
        return AllocationResult(rates=(lam,), objective=p, per_source_probs=(p,),
                                method="equalize", iterations=0, converged=True,
                                equalization_spread=0.0)

    lam_lo = 1e-12 * lam
    inner_tol = 1e-13 * lam
    inner_iters = int(math.ceil(math.log2((lam - lam_lo) / inner_tol))) + 1
    thr_vec = np.asarray(thr)
    full = _probs(problem, np.full(n, lam))
    equal = _probs(problem, np.full(n, lam / n))

    def rates_for_level(q: float) -> np.ndarray:
        # parallel bisection of P_i(x) = q for every source; P_i decreasing
        # in x, so P(mid) > q sends the bracket right. Sources that cannot
        # reach level q even with the whole budget are pinned at the budget,
        # which drives the outer bisection to raise q.
        lo = np.full(n, lam_lo)
        hi = np.full(n, lam)
        for _ in range(inner_iters):
            mid = 0.5 * (lo + hi)
            above = violation(problem.metric, lam, mu, mid, thr_vec) > q
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        out = 0.5 * (lo + hi)
        return np.where(full >= q, lam, out)

    q_lo, q_hi = float(full.max()), float(equal.max())

    rates = np.full(n, lam / n)
    iterations = 0
    converged = False
    for iterations in range(1, problem.max_iterations + 1):
        q = 0.5 * (q_lo + q_hi)
        rates = rates_for_level(q)
        excess = rates.sum() - lam
        if abs(excess) <= 1e-11 * lam or (q_hi - q_lo) < 1e-16:
            converged = True
            break
        if excess > 0.0:
            q_lo = q
        else:
            q_hi = q

    rates *= lam / rates.sum()
    probs = _probs(problem, rates)
    spread = float(probs.max() - probs.min())
    if not converged or spread >= problem.tolerance:
        raise SolverError(
            f"equalization did not converge in {iterations} iterations "
            f"(spread {spread:.3e}, tolerance {problem.tolerance:.3e})")
    return AllocationResult(rates=tuple(float(r) for r in rates),
                            objective=float(probs.max()),
                            per_source_probs=tuple(float(p) for p in probs),
                            method="equalize", iterations=iterations, converged=True,
                            equalization_spread=spread,
                            diagnostics={"level": float(probs.max())})


def solve_newton_barrier(problem: AllocationProblem, initial_rates=None) -> AllocationResult:
    """Log-barrier Newton solver for the epigraph form.

    Variables z = (rates, s). Each outer stage centers kappa*s + phi(z) with
    phi = -sum log(s - P_i) - sum log(rate_i) via Newton steps on the KKT
    system of the single budget equality, choosing step sizes by
    backtracking line search; kappa grows geometrically until the duality
    gap bound (number of inequality constraints)/kappa is below tolerance.
    """
    lam, mu = problem.total_rate, problem.service_rate
    n = problem.n_sources
    thr = problem.thresholds

    if initial_rates is None:
        rates = np.full(n, lam / n)
    else:
        rates = np.asarray(initial_rates, dtype=float).copy()
        if rates.shape != (n,) or np.any(rates <= 0.0):
            raise ValueError("initial rates must be strictly positive, one per source")
        if abs(rates.sum() - lam) > 1e-9 * lam:
            raise ValueError("initial rates must satisfy the budget")
        rates *= lam / rates.sum()

    if n == 1:
        p = float(violation(problem.metric, lam, mu, lam, thr[0]))
        return AllocationResult(rates=(lam,), objective=p, per_source_probs=(p,),
                                method="newton_barrier", iterations=0, converged=True,
                                equalization_spread=0.0)

    probs = _probs(problem, rates)
    s = float(probs.max()) + 0.1
    z = np.concatenate([rates, [s]])
    a_row = np.concatenate([np.ones(n), [0.0]])

    n_ineq = 2 * n
    gap_target = min(problem.tolerance, 1e-9)
    kappa = 1.0
    total_steps = 0
    stage_objectives = []

    def barrier_value(z, kappa):
        r, s = z[:n], z[n]
        if np.any(r <= 0.0) or np.any(r >= lam):
            return math.inf
        slack = s - _probs(problem, r)
        if np.any(slack <= 0.0):
            return math.inf
        return kappa * s - np.log(slack).sum() - np.log(r).sum()

    while n_ineq / kappa > gap_target:
        for _ in range(80):
            r = z[:n]
            s = z[n]
            p = _probs(problem, r)
            dp = _grad_vec(problem.metric, lam, mu, r, np.asarray(thr))
            d2p = _hess_vec(problem.metric, lam, mu, r, np.asarray(thr))
            slack = s - p

            grad = np.empty(n + 1)
            grad[:n] = dp / slack - 1.0 / r
            grad[n] = kappa - np.sum(1.0 / slack)

            hess = np.zeros((n + 1, n + 1))
            diag = d2p / slack + (dp / slack) ** 2 + 1.0 / r ** 2
            hess[np.arange(n), np.arange(n)] = diag
            hess[:n, n] = hess[n, :n] = -dp / slack ** 2
            hess[n, n] = np.sum(1.0 / slack ** 2)

            kkt = np.zeros((n + 2, n + 2))
            kkt[:n + 1, :n + 1] = hess
            kkt[:n + 1, n + 1] = a_row
            kkt[n + 1, :n + 1] = a_row
            rhs = np.concatenate([-grad, [0.0]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"singular KKT system at barrier weight {kappa:g}") from exc
            dz = sol[:n + 1]
            decrement2 = float(-grad @ dz)
            # the objective is kappa*s + phi, so centering to a decrement of
            # O(kappa * eps) leaves an O(eps) error in s itself
            if decrement2 / 2.0 <= 1e-13 * max(1.0, kappa):
                break

            f0 = barrier_value(z, kappa)
            step = 1.0
            for _ in range(60):
                trial = z + step * dz
                if barrier_value(trial, kappa) <= f0 + 0.25 * step * float(grad @ dz):
                    break
                step *= 0.5
            else:
                raise SolverError("backtracking line search failed")
            z = z + step * dz
            total_steps += 1
            if total_steps > problem.max_iterations:
                raise SolverError(
                    f"barrier solver exceeded max_iterations={problem.max_iterations}")
        stage_objectives.append(float(_probs(problem, z[:n]).max()))
        kappa *= 15.0

    rates = z[:n] * (lam / z[:n].sum())
    probs = _probs(problem, rates)
    spread = float(probs.max() - probs.min())
    return AllocationResult(rates=tuple(float(r) for r in rates),
                            objective=float(probs.max()),
                            per_source_probs=tuple(float(p) for p in probs),
                            method="newton_barrier", iterations=total_steps,
                            converged=True, equalization_spread=spread,
                            diagnostics={"stage_objectives": stage_objectives,
                                         "duality_gap_bound": n_ineq / kappa,
                                         "final_barrier_weight": kappa})


def sweep_allocation(problem: AllocationProblem, source_index: int, grid):
    """Max violation along one source's rate, others sharing the remainder.

    For two sources this is the classic single-coordinate sweep; for more,
    the remaining budget is split uniformly across the other sources (an
    affine restriction, so the curve stays convex). Returns (grid, values).
    """
    lam, mu = problem.total_rate, problem.service_rate
    n = problem.n_sources
    if not 1 <= source_index <= n:
        raise ValueError(f"source index {source_index} out of range 1..{n}")
    if n < 2:
        raise ValueError("sweeping needs at least two sources")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0.0) or np.any(grid >= lam):
        raise ValueError("sweep grid must lie strictly inside (0, total_rate)")

    values = np.empty_like(grid)
    others = [j for j in range(n) if j != source_index - 1]
    for k, g in enumerate(grid):
        rates = np.empty(n)
        rates[source_index - 1] = g
        rates[others] = (lam - g) / (n - 1)
        values[k] = _probs(problem, rates).max()
    return grid, values


def grid_search_two_source(problem: AllocationProblem, step: float = 1e-4):
    """Exhaustive search over rate_1 for a two-source problem.

    Returns (best_rate_1, best_objective); the brute-force oracle against
    which both solvers are validated.
    """
    if problem.n_sources != 2:
        raise ValueError("grid search oracle is defined for two sources")
    lam, mu = problem.total_rate, problem.service_rate
    g = np.arange(step, lam, step)
    rp1 = mm11.roots(lam, mu, g)
    rp2 = mm11.roots(lam, mu, lam - g)
    if problem.metric is Metric.AOI:
        p1 = mm11.aoi_violation_closed(rp1, problem.thresholds[0])
        p2 = mm11.aoi_violation_closed(rp2, problem.thresholds[1])
    else:
        p1 = mm11.paoi_violation_closed(rp1, lam, mu, problem.thresholds[0])
        p2 = mm11.paoi_violation_closed(rp2, lam, mu, problem.thresholds[1])
    objective = np.maximum(p1, p2)
    k = int(np.argmin(objective))
    return float(g[k]), float(objective[k])
