"""Densities for the private attributes ``s_k`` and ``lambda_k``.

Each density lives on ``(0, upper]`` and exposes the pieces the region
integrals need: the CDF, the partial first moment
``W(x) = int_0^x t v(t) dt``, the inverse CDF for sampling, and the knots
where the density stops being a single polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import QualityModel
from .errors import ParameterError

NORMALIZATION_ATOL = 1e-6

KINDS = ("LID", "UD", "LDD")


class Density:
    """Interface shared by all attribute densities."""

    upper: float
    atom: Optional[float] = None

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def partial_moment(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return float(self.partial_moment(self.upper))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        # 1 - U lies in (0, 1], keeping draws strictly positive
        return self.ppf(1.0 - rng.random(size))

    def total_mass(self) -> float:
        """Integral of the pdf over the support, by Gauss-Legendre per piece."""
        nodes, weights = np.polynomial.legendre.leggauss(64)
        knots = self.breakpoints()
        total = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            total += 0.5 * (b - a) * float(weights @ self.pdf(x))
        return total


@dataclass(frozen=True)
class LinearDensity(Density):
    """Linear-increasing, uniform or linear-decreasing density on ``(0, upper]``."""

    kind: str
    upper: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown density kind {self.kind!r}; expected one of {KINDS}")
        if not self.upper > 0:
            raise ParameterError(f"density support bound must be > 0, got {self.upper}")

    def _z(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.upper, 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.upper
        inside = (z > 0) & (z <= 1)
        if self.kind == "LID":
            val = 2.0 * z
        elif self.kind == "UD":
            val = np.ones_like(z)
        else:
            val = 2.0 - 2.0 * z
        return np.where(inside, val / self.upper, 0.0)

    def cdf(self, x):
        z = self._z(x)
        if self.kind == "LID":
            return z * z
        if self.kind == "UD":
            return z
        return 2.0 * z - z * z

    def partial_moment(self, x):
        z = self._z(x)
        U = self.upper
        if self.kind == "LID":
            return 2.0 * U * z ** 3 / 3.0
        if self.kind == "UD":
            return U * z * z / 2.0
        return U * (z * z - 2.0 * z ** 3 / 3.0)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == "LID":
            return self.upper * np.sqrt(u)
        if self.kind == "UD":
            return self.upper * u
        # u / (1 + sqrt(1 - u)) == 1 - sqrt(1 - u) without cancellation near u = 0
        return self.upper * u / (1.0 + np.sqrt(1.0 - u))

    def breakpoints(self):
        return np.array([0.0, self.upper])


@dataclass(frozen=True)
class TabulatedDensity(Density):
    """Piecewise-constant density given by bin edges and (unnormalised) bin weights."""

    edges: tuple
    weights: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        weights = tuple(float(w) for w in self.weights)
        if len(edges) != len(weights) + 1 or len(weights) < 1:
            raise ParameterError("tabulated density needs len(edges) == len(weights) + 1")
        if edges[0] != 0.0 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ParameterError("tabulated edges must start at 0 and increase strictly")
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ParameterError("tabulated weights must be >= 0 with positive sum")
        mass = sum(w * (b - a) for w, a, b in zip(weights, edges, edges[1:]))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", tuple(w / mass for w in weights))

    @property
    def upper(self) -> float:
        return self.edges[-1]

    def _arrays(self):
        e = np.asarray(self.edges)
        h = np.asarray(self.weights)
        cum = np.concatenate([[0.0], np.cumsum(h * np.diff(e))])
        cum_m = np.concatenate([[0.0], np.cumsum(h * (e[1:] ** 2 - e[:-1] ** 2) / 2.0)])
        return e, h, cum, cum_m

    def pdf(self, x):
        e, h, _, _ = self._arrays()
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(e, x, side="left") - 1, 0, len(h) - 1)
        return np.where((x > 0) & (x <= e[-1]), h[idx], 0.0)

    def cdf(self, x):
        e, h, cum, _ = self._arrays()
        x = np.clip(np.asarray(x, dtype=float), 0.0, e[-1])
        idx = np.clip(np.searchsorted(e, x, side="right") - 1, 0, len(h) - 1)
        return cum[idx] + h[idx] * (x - e[idx])

    def partial_moment(self, x):
        e, h, _, cum_m = self._arrays()
        x = np.clip(np.asarray(x, dtype=float), 0.0, e[-1])
        idx = np.clip(np.searchsorted(e, x, side="right") - 1, 0, len(h) - 1)
        return cum_m[idx] + h[idx] * (x * x - e[idx] ** 2) / 2.0

    def ppf(self, u):
        e, h, cum, _ = self._arrays()
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        idx = np.clip(np.searchsorted(cum, u, side="left") - 1, 0, len(h) - 1)
        safe_h = np.where(h[idx] > 0, h[idx], np.inf)
        return np.minimum(e[idx] + (u - cum[idx]) / safe_h, e[idx + 1])

    def breakpoints(self):
        return np.asarray(self.edges)


@dataclass(frozen=True)
class PointMass(Density):
    """All probability on one value; used to collapse to the complete-information case."""

    value: float
    upper: float

    def __post_init__(self):
        if not 0 < self.value <= self.upper:
            raise ParameterError(f"point mass {self.value} must lie in (0, {self.upper}]")

    @property
    def atom(self):
        return self.value

    def pdf(self, x):
        raise ParameterError("a point mass has no density")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)

    def partial_moment(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, self.value, 0.0)

    def ppf(self, u):
        return np.full(np.shape(u), self.value)

    def breakpoints(self):
        return np.array([0.0, self.value, self.upper]) if self.value < self.upper \
            else np.array([0.0, self.upper])

    def total_mass(self):
        return 1.0


def make_density(spec, upper: float) -> Density:
    """Build a density from a config value: a kind name, or a mapping.

    Mappings look like ``{"kind": "tabulated", "edges": [...], "weights": [...]}``
    or ``{"kind": "point", "value": 0.05}``.
    """
    if isinstance(spec, str):
        return LinearDensity(spec.upper(), upper)
    if isinstance(spec, Density):
        return spec
    kind = str(spec.get("kind", "")).lower()
    if kind in ("lid", "ud", "ldd"):
        return LinearDensity(kind.upper(), upper)
    if kind == "tabulated":
        edges = list(spec["edges"])
        if not math.isclose(edges[-1], upper):
            raise ParameterError(f"tabulated density must end at {upper}, ends at {edges[-1]}")
        return TabulatedDensity(tuple(edges), tuple(spec["weights"]))
    if kind == "point":
        return PointMass(float(spec["value"]), upper)
    raise ParameterError(f"unknown density specification {spec!r}")


@dataclass(frozen=True)
class AttributeDistribution:
    """Independent densities of unit cost on ``(0, s_max]`` and quality on ``(0, lambda]``."""

    s_max: float
    lambda_max: float
    s_density: Density
    lambda_density: Density

    def __post_init__(self):
        problems = []
        if not self.s_max > 0:
            problems.append(f"s_max must be > 0, got {self.s_max}")
        if not math.isclose(self.s_density.upper, self.s_max):
            problems.append("s density support must end at s_max")
        if not math.isclose(self.lambda_density.upper, self.lambda_max):
            problems.append("lambda density support must end at lambda_max")
        for name, dens in (("s", self.s_density), ("lambda", self.lambda_density)):
            mass = dens.total_mass()
            if abs(mass - 1.0) > NORMALIZATION_ATOL:
                problems.append(f"{name} density integrates to {mass}, not 1")
        if problems:
            raise ParameterError("; ".join(problems))

    @classmethod
    def of_kind(cls, s_kind: str, lambda_kind: str, s_max: float,
                lambda_max: float) -> "AttributeDistribution":
        return cls(s_max, lambda_max, LinearDensity(s_kind, s_max),
                   LinearDensity(lambda_kind, lambda_max))

    def check_against(self, q: QualityModel, require_below_zeta3: bool = True) -> None:
        """``s_max < zeta3`` is needed only by the incomplete-information analysis."""
        if not math.isclose(self.lambda_max, q.lambda_max):
            raise ParameterError(
                f"distribution lambda_max {self.lambda_max} differs from model {q.lambda_max}")
        if require_below_zeta3 and not self.s_max < q.zeta3:
            raise ParameterError(
                f"s_max={self.s_max} must be below zeta3={q.zeta3:.6g}")

    def sample(self, rng: np.random.Generator, size):
        """Draw ``(s, lambda)`` arrays; all unit costs first, then all qualities."""
        s = self.s_density.sample(rng, size)
        lam = self.lambda_density.sample(rng, size)
        return s, lam
