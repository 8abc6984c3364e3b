"""Domain types and the quality / learning-constant math.

Everything here is immutable and side-effect free.  The quantities are:

* label distributions and the L1 ("EMD") heterogeneity measure,
* the data-synthesis plan a client follows to rebalance towards the global
  label distribution while keeping its datasize fixed,
* the quality model tying real-data and generated-data gradient bounds
  together (``theta``, ``delta``),
* the convergence-bound constants ``phi`` and ``kappa1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ParameterError, PreconditionError

ATOL = 1e-9
DEFAULT_LOCAL_STEPS = 5


@dataclass(frozen=True)
class ClassDistribution:
    """Proportion of samples per label class."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise ParameterError("class distribution must have at least one class")
        if any(p < 0 for p in probs):
            raise ParameterError(f"negative class proportion in {probs}")
        if abs(math.fsum(probs) - 1.0) > ATOL:
            raise ParameterError(f"class proportions sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def uniform(cls, num_classes: int) -> "ClassDistribution":
        return cls((1.0 / num_classes,) * num_classes)

    @property
    def num_classes(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs)


@dataclass(frozen=True)
class SynthesisPlan:
    adjustments: tuple
    inject_set: frozenset
    generated_fraction: float


@dataclass(frozen=True)
class QualityModel:
    """Global quality constants of one FL task and one generator.

    ``theta`` is the ratio between the gradient-gap bound of an AIGC-enhanced
    dataset and that of the original one; ``delta`` is the per-sample AIGC
    price normalised by twice the largest per-class gradient norm.
    """

    lambda_max: float
    g_data: float
    g_diff: float
    s_ai: float

    def __post_init__(self):
        problems = []
        if not self.lambda_max > 0:
            problems.append(f"lambda_max must be > 0, got {self.lambda_max}")
        if not self.g_data > 0:
            problems.append(f"g_data must be > 0, got {self.g_data}")
        if not self.g_diff > 0:
            problems.append(f"g_diff must be > 0, got {self.g_diff}")
        if not self.s_ai >= 0:
            problems.append(f"s_ai must be >= 0, got {self.s_ai}")
        if not problems and not 0 < self.theta < 1:
            problems.append(
                f"theta = g_diff / (2 g_data) = {self.theta} must lie in (0, 1); "
                "generated data has to improve quality"
            )
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def theta(self) -> float:
        return self.g_diff / (2.0 * self.g_data)

    @property
    def delta(self) -> float:
        return self.s_ai / (2.0 * self.g_data)

    @property
    def zeta3(self) -> float:
        """Reward above which every participating type-1 client switches to AIGC data."""
        return self.lambda_max * self.delta / (1.0 - self.theta)


@dataclass(frozen=True)
class ClientAttributes:
    """One candidate client: datasize ``d_k``, quality bound ``lambda_k``, unit cost ``s_k``.

    ``quality`` must be positive; the upper limit ``lambda_max`` belongs to the
    :class:`QualityModel` and is checked by :func:`validate_client`.
    """

    datasize: int
    quality: float
    unit_cost: float
    class_dist: Optional[ClassDistribution] = None

    def __post_init__(self):
        if int(self.datasize) != self.datasize or self.datasize <= 0:
            raise ParameterError(f"datasize must be a positive integer, got {self.datasize}")
        object.__setattr__(self, "datasize", int(self.datasize))
        if not self.quality > 0:
            raise ParameterError(f"quality (lambda_k) must be > 0, got {self.quality}")
        if not self.unit_cost > 0:
            raise ParameterError(f"unit_cost (s_k) must be > 0, got {self.unit_cost}")

    def batch_size(self, h: int) -> float:
        return self.datasize / h


def validate_client(client: ClientAttributes, q: QualityModel,
                    global_dist: Optional[ClassDistribution] = None) -> None:
    """Check the invariants of ``client`` that depend on the task."""
    if client.quality > q.lambda_max + ATOL:
        raise ParameterError(
            f"quality {client.quality} exceeds lambda_max {q.lambda_max}")
    if client.class_dist is not None:
        ref = global_dist or ClassDistribution.uniform(client.class_dist.num_classes)
        bound = quality_from_emd(emd(client.class_dist, ref), q.g_data)
        if client.quality > bound + ATOL:
            raise ParameterError(
                f"quality {client.quality} exceeds its EMD bound {bound}")


@dataclass(frozen=True)
class LearningParams:
    """Convergence-bound constants; ``phi`` and ``kappa1`` are derived."""

    eta: float
    rho: float
    mu: float
    beta: float
    psi: float
    h: int
    theta_gap: float

    def __post_init__(self):
        for name in ("eta", "rho", "mu", "beta", "psi", "theta_gap"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise PreconditionError(f"{name} must be positive and finite, got {value}")
        if int(self.h) != self.h or self.h < 1:
            raise PreconditionError(f"h must be a positive integer, got {self.h}")
        object.__setattr__(self, "h", int(self.h))
        if self.eta >= 1.0 / self.rho:
            raise PreconditionError(
                f"learning rate eta={self.eta} must be < 1/rho={1.0 / self.rho} "
                "(convergence-bound precondition)")
        if not 0.0 < self.phi < 1.0:
            raise ParameterError(f"phi = {self.phi} must lie in (0, 1)")

    @property
    def phi(self) -> float:
        return 1.0 - 2.0 * self.mu * self.eta + 2.0 * self.mu * self.rho * self.eta ** 2

    @property
    def phi_h(self) -> float:
        return self.phi ** self.h

    @property
    def kappa1(self) -> float:
        return kappa1_for(self.beta, self.eta, self.rho, self.phi, self.h)

    def contraction(self, T) -> float:
        """phi^(h T): weight left on the initial loss gap after T global iterations."""
        return self.phi ** (self.h * T)


def kappa1_for(beta: float, eta: float, rho: float, phi: float, h: int) -> float:
    return beta * ((eta * rho + 1.0) ** h - 1.0) / (rho * (1.0 - phi ** h))


def emd(client_dist: ClassDistribution, global_dist: ClassDistribution) -> float:
    """L1 distance between two label distributions, in [0, 2]."""
    if client_dist.num_classes != global_dist.num_classes:
        raise DimensionError(
            f"class counts differ: {client_dist.num_classes} vs {global_dist.num_classes}")
    return math.fsum(abs(a - b) for a, b in zip(client_dist.probs, global_dist.probs))


def quality_from_emd(emd_value: float, g_data: float) -> float:
    if not 0.0 <= emd_value <= 2.0 + ATOL:
        raise PreconditionError(f"EMD must lie in [0, 2], got {emd_value}")
    if not g_data > 0:
        raise PreconditionError(f"g_data must be > 0, got {g_data}")
    return emd_value * g_data


def synthesis_plan(client_dist: ClassDistribution,
                   global_dist: ClassDistribution) -> SynthesisPlan:
    """Per-class share to generate (positive) or drop (negative), datasize unchanged."""
    if client_dist.num_classes != global_dist.num_classes:
        raise DimensionError(
            f"class counts differ: {client_dist.num_classes} vs {global_dist.num_classes}")
    adjustments = tuple(g - c for c, g in zip(client_dist.probs, global_dist.probs))
    inject = frozenset(i for i, a in enumerate(adjustments) if a > 0)
    generated = math.fsum(adjustments[i] for i in inject)
    return SynthesisPlan(adjustments, inject, generated)


def aigc_quality(lambda_k: float, model: QualityModel) -> float:
    return model.theta * lambda_k


def derive_learning_constants(eta: float, rho: float, mu: float, beta: float,
                              psi: float, h: int = DEFAULT_LOCAL_STEPS,
                              theta_gap: Optional[float] = None,
                              lambda_max: Optional[float] = None) -> LearningParams:
    """Build :class:`LearningParams`, defaulting the initial loss gap.

    When ``theta_gap`` is omitted it is set to ``10 * kappa1 * lambda_max``,
    which keeps the loss-gap assumption satisfied for any cohort whose
    quality term stays below ten times the tolerated non-IID degree.
    """
    if not (eta > 0 and rho > 0):
        raise PreconditionError("eta and rho must be positive")
    if eta >= 1.0 / rho:
        raise PreconditionError(
            f"learning rate eta={eta} must be < 1/rho={1.0 / rho} "
            "(convergence-bound precondition)")
    phi = 1.0 - 2.0 * mu * eta + 2.0 * mu * rho * eta ** 2
    if not 0.0 < phi < 1.0:
        raise ParameterError(f"phi = {phi} must lie in (0, 1)")
    if theta_gap is None:
        if lambda_max is None:
            raise PreconditionError("either theta_gap or lambda_max is required")
        theta_gap = 10.0 * kappa1_for(beta, eta, rho, phi, h) * lambda_max
    return LearningParams(eta=eta, rho=rho, mu=mu, beta=beta, psi=psi, h=h,
                          theta_gap=theta_gap)


@dataclass(frozen=True)
class ServerParams:
    """Server cost weights plus the no-participation penalty used for empty cohorts."""

    gamma1: float
    gamma2: float
    omega: float = 100.0
    epsilon: float = 1e-8
    max_T: int = 10_000

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ParameterError("gamma1 and gamma2 must be >= 0")
        if not self.omega > 0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_T) != self.max_T or self.max_T < 1:
            raise ParameterError(f"max_T must be a positive integer, got {self.max_T}")

    def check_population(self, datasizes: Sequence[int]) -> None:
        """Omega must dominate the regular sampling-error term of the population."""
        d = np.asarray(datasizes, dtype=float)
        regular = np.sqrt(d).sum() / d.sum()
        if not self.omega > regular:
            raise ParameterError(
                f"omega={self.omega} must exceed sum(sqrt d)/sum(d)={regular:.6g}")
