"""Service-time distributions: densities, transforms, moments, samplers.

Models are immutable after construction and safe to share across threads;
sampling always goes through a caller-supplied RNG stream.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["ServiceKind", "ServiceModel"]


class ServiceKind(enum.Enum):
    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"
    UNIFORM = "uniform"
    CUSTOM = "custom"


def _expweight1(z):
    """(1 - e^-z)/z, stable near 0, for real or complex z (arrays ok)."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zg = np.where(small, 1.0, z)
    direct = (1.0 - np.exp(-zg)) / zg
    series = 1.0 - z / 2.0 + z * z / 6.0
    return np.where(small, series, direct)


def _expweight2(z):
    """(1 - (1+z) e^-z)/z^2, stable near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zg = np.where(small, 1.0, z)
    direct = (1.0 - (1.0 + zg) * np.exp(-zg)) / (zg * zg)
    series = 0.5 - z / 3.0 + z * z / 8.0
    return np.where(small, series, direct)


@dataclass(frozen=True)
class ServiceModel:
    """A service-time law with mean 1/mu.

    Deterministic service is represented as a unit atom (see :meth:`atoms`);
    consumers of the density must handle the atom+density pair. The uniform
    law lives on [0, 2/mu] so its mean matches the other kinds at equal mu.
    Custom laws are piecewise-linear tabulated densities, renormalized at
    construction.
    """

    kind: ServiceKind
    mu: float
    grid: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.kind is ServiceKind.CUSTOM:
            if self.grid is None or len(self.grid) < 2:
                raise ValueError("custom service needs a density grid with >= 2 points")
            xs = np.array([p[0] for p in self.grid], dtype=float)
            fs = np.array([p[1] for p in self.grid], dtype=float)
            if np.any(np.diff(xs) <= 0.0):
                raise ValueError("custom grid abscissae must be strictly increasing")
            if xs[0] < 0.0:
                raise ValueError("custom grid must live on the nonnegative axis")
            if np.any(fs < 0.0):
                raise ValueError("custom density values must be nonnegative")
            mass = float(np.trapezoid(fs, xs))
            if mass <= 0.0:
                raise ValueError("custom density has zero mass")
            norm = tuple((float(x), float(f / mass)) for x, f in zip(xs, fs))
            object.__setattr__(self, "grid", norm)
            mean = float(np.trapezoid(fs / mass * xs, xs))
            object.__setattr__(self, "mu", 1.0 / mean)
        else:
            if self.grid is not None:
                raise ValueError("grid is only valid for custom service")
            if not (self.mu > 0.0 and math.isfinite(self.mu)):
                raise ValueError(f"service rate mu must be positive, got {self.mu}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def exponential(cls, mu: float) -> "ServiceModel":
        return cls(ServiceKind.EXPONENTIAL, float(mu))

    @classmethod
    def deterministic(cls, duration: float) -> "ServiceModel":
        if duration <= 0.0:
            raise ValueError("deterministic duration must be positive")
        return cls(ServiceKind.DETERMINISTIC, 1.0 / float(duration))

    @classmethod
    def uniform(cls, mu: float) -> "ServiceModel":
        return cls(ServiceKind.UNIFORM, float(mu))

    @classmethod
    def custom(cls, grid) -> "ServiceModel":
        return cls(ServiceKind.CUSTOM, 1.0, tuple((float(x), float(f)) for x, f in grid))

    # -- JSON fragment -----------------------------------------------------

    @classmethod
    def from_json(cls, fragment: dict) -> "ServiceModel":
        kind = fragment["kind"]
        if kind == "custom":
            return cls.custom(fragment["grid"])
        ctor = {"exponential": cls.exponential,
                "deterministic": lambda mu: cls.deterministic(1.0 / mu),
                "uniform": cls.uniform}[kind]
        return ctor(float(fragment["mu"]))

    def to_json(self) -> dict:
        if self.kind is ServiceKind.CUSTOM:
            return {"kind": "custom", "grid": [[x, f] for x, f in self.grid]}
        return {"kind": self.kind.value, "mu": self.mu}

    # -- basic descriptors -------------------------------------------------

    @property
    def mean_service_time(self) -> float:
        return 1.0 / self.mu

    @property
    def rate(self) -> float:
        return self.mu

    def mean(self) -> float:
        return 1.0 / self.mu

    def variance(self) -> float:
        if self.kind is ServiceKind.EXPONENTIAL:
            return 1.0 / self.mu ** 2
        if self.kind is ServiceKind.DETERMINISTIC:
            return 0.0
        if self.kind is ServiceKind.UNIFORM:
            return (2.0 / self.mu) ** 2 / 12.0
        second = self._segment_moment(2)
        return second - self.mean() ** 2

    def support_upper(self) -> float:
        """Upper end of the support (inf for exponential)."""
        if self.kind is ServiceKind.EXPONENTIAL:
            return math.inf
        if self.kind is ServiceKind.DETERMINISTIC:
            return 1.0 / self.mu
        if self.kind is ServiceKind.UNIFORM:
            return 2.0 / self.mu
        return self.grid[-1][0]

    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses of the law as (location, mass) pairs."""
        if self.kind is ServiceKind.DETERMINISTIC:
            return ((1.0 / self.mu, 1.0),)
        return ()

    def density_breakpoints(self) -> tuple[float, ...]:
        """Locations where the continuous density part is non-smooth."""
        if self.kind is ServiceKind.UNIFORM:
            return (0.0, 2.0 / self.mu)
        if self.kind is ServiceKind.CUSTOM:
            return (self.grid[0][0], self.grid[-1][0])
        return ()

    # -- density / transform ------------------------------------------------

    def density(self, x):
        """Continuous density part at x (atoms are reported separately)."""
        x = np.asarray(x, dtype=float)
        if self.kind is ServiceKind.EXPONENTIAL:
            out = np.where(x < 0.0, 0.0, self.mu * np.exp(-self.mu * np.maximum(x, 0.0)))
        elif self.kind is ServiceKind.DETERMINISTIC:
            out = np.zeros_like(x)
        elif self.kind is ServiceKind.UNIFORM:
            width = 2.0 / self.mu
            out = np.where((x >= 0.0) & (x <= width), self.mu / 2.0, 0.0)
        else:
            xs = np.array([p[0] for p in self.grid])
            fs = np.array([p[1] for p in self.grid])
            out = np.interp(x, xs, fs, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def laplace(self, s):
        """Unilateral transform E[e^(-sS)].

        Real arguments must be nonnegative (domain error otherwise); complex
        arguments are evaluated as the analytic continuation and it is the
        caller's job to stay in the region of analyticity.
        """
        arr = np.asarray(s)
        if not np.iscomplexobj(arr) and np.any(arr < 0.0):
            raise ValueError("laplace transform is only defined for s >= 0 on the real axis")
        z = np.asarray(s, dtype=complex)
        if self.kind is ServiceKind.EXPONENTIAL:
            out = self.mu / (z + self.mu)
        elif self.kind is ServiceKind.DETERMINISTIC:
            out = np.exp(-z / self.mu)
        elif self.kind is ServiceKind.UNIFORM:
            out = _expweight1(2.0 * z / self.mu)
        else:
            out = self._segment_laplace(z)
        if not np.iscomplexobj(arr):
            out = out.real
        return out if out.ndim else complex(out) if np.iscomplexobj(arr) else float(out)

    def _segment_laplace(self, z):
        """Exact transform of the piecewise-linear density.

        On a segment [x0, x1] with f(x) = A + B (x - x0),
        int e^(-zx) f dx = e^(-z x0) h (A E1(zh) + B h E2(zh)), h = x1 - x0.
        """
        scalar = np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        xs = np.array([p[0] for p in self.grid])
        fs = np.array([p[1] for p in self.grid])
        x0 = xs[:-1][:, None]
        h = np.diff(xs)[:, None]
        A = fs[:-1][:, None]
        B = (np.diff(fs) / np.diff(xs))[:, None]
        zh = z[None, :] * h
        seg = np.exp(-z[None, :] * x0) * h * (A * _expweight1(zh) + B * h * _expweight2(zh))
        out = seg.sum(axis=0)
        return out[0] if scalar else out

    # -- weighted integrals used by the analytics ---------------------------

    def exp_weighted_moment(self, lam: float, order: int) -> float:
        """int x^order e^(-lam x) dF_S(x), atoms included."""
        if self.kind is ServiceKind.EXPONENTIAL:
            rate = lam + self.mu
            return self.mu * math.factorial(order) / rate ** (order + 1)
        if self.kind is ServiceKind.DETERMINISTIC:
            d = 1.0 / self.mu
            return d ** order * math.exp(-lam * d)
        from .laplace import integrate  # local import avoids a cycle at import time
        upper = self.support_upper()
        return integrate(lambda x: x ** order * math.exp(-lam * x) * self.density(x),
                         0.0, upper, tol=1e-11,
                         points=list(self.density_breakpoints()))

    def _segment_moment(self, order: int) -> float:
        xs = np.array([p[0] for p in self.grid])
        fs = np.array([p[1] for p in self.grid])
        total = 0.0
        for (x0, x1, f0, f1) in zip(xs[:-1], xs[1:], fs[:-1], fs[1:]):
            # exact integral of x^order (A + B(x-x0)) over the segment
            B = (f1 - f0) / (x1 - x0)
            A = f0 - B * x0
            total += (A * (x1 ** (order + 1) - x0 ** (order + 1)) / (order + 1)
                      + B * (x1 ** (order + 2) - x0 ** (order + 2)) / (order + 2))
        return total

    # -- sampling ------------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        """Draw i.i.d. service times from the law."""
        if self.kind is ServiceKind.EXPONENTIAL:
            return rng.exponential(1.0 / self.mu, size)
        if self.kind is ServiceKind.DETERMINISTIC:
            d = 1.0 / self.mu
            return d if size is None else np.full(size, d)
        if self.kind is ServiceKind.UNIFORM:
            return rng.uniform(0.0, 2.0 / self.mu, size)
        return self._sample_custom(rng, size)

    def _sample_custom(self, rng, size):
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        xs = np.array([p[0] for p in self.grid])
        fs = np.array([p[1] for p in self.grid])
        seg_mass = 0.5 * (fs[:-1] + fs[1:]) * np.diff(xs)
        cdf = np.concatenate([[0.0], np.cumsum(seg_mass)])
        cdf /= cdf[-1]
        u = rng.random(n)
        seg = np.searchsorted(cdf, u, side="right") - 1
        seg = np.clip(seg, 0, len(seg_mass) - 1)
        # invert the quadratic CDF piece of the linear density on each segment
        x0, x1 = xs[seg], xs[seg + 1]
        f0, f1 = fs[seg], fs[seg + 1]
        h = x1 - x0
        rem = (u - cdf[seg]) / np.where(seg_mass[seg] > 0, seg_mass[seg], 1.0)
        slope = (f1 - f0) / h
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = f0 * f0 + slope * rem * (f0 + f1) * h
            t = np.where(np.abs(slope) < 1e-14 * np.maximum(f0, 1.0),
                         rem * h,
                         (np.sqrt(np.maximum(disc, 0.0)) - f0) / np.where(slope == 0, 1.0, slope))
        out = x0 + np.clip(t, 0.0, h)
        if scalar:
            return float(out[0])
        return out.reshape(size)
