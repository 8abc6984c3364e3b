"""Server cost and optimal strategy when every client's attributes are known.

For a fixed reward the participating cohort is fixed, so the server cost is
a smooth convex function of the iteration count ``T`` whose continuous
minimiser has a closed form.  Between two consecutive client thresholds the
cohort does not change while payments grow with ``r``, so only the
thresholds themselves need to be tried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .clients import ClientStrategy, best_response, indicators
from .core import ClientAttributes, LearningParams, QualityModel, ServerParams
from .errors import AssumptionError, EmptyCohortError, MechanismError, PreconditionError

CANDIDATE_DEDUP_ATOL = 1e-12


@dataclass(frozen=True)
class Cohort:
    local_set: frozenset = frozenset()
    aigc_set: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "local_set", frozenset(self.local_set))
        object.__setattr__(self, "aigc_set", frozenset(self.aigc_set))
        if self.local_set & self.aigc_set:
            raise PreconditionError("a client cannot train on local and AIGC data at once")

    @property
    def members(self) -> frozenset:
        return self.local_set | self.aigc_set

    def is_empty(self) -> bool:
        return not (self.local_set or self.aigc_set)

    def __len__(self):
        return len(self.local_set) + len(self.aigc_set)


@dataclass(frozen=True)
class ServerStrategy:
    iterations: int
    reward: float

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise PreconditionError(f"iterations must be an integer >= 1, got {self.iterations}")
        object.__setattr__(self, "iterations", int(self.iterations))


@dataclass(frozen=True)
class CostBreakdown:
    m_loss: float
    r_total: float
    total: float


def cohort_from_reward(population: Sequence[ClientAttributes], q: QualityModel,
                       r: float) -> Cohort:
    if r < 0:
        raise PreconditionError(f"reward must be >= 0, got {r}")
    local, aigc = set(), set()
    for k, client in enumerate(population):
        choice = best_response(client, q, r)
        if choice is ClientStrategy.LOCAL:
            local.add(k)
        elif choice is ClientStrategy.AIGC:
            aigc.add(k)
    return Cohort(local, aigc)


def _effective_quality(k, cohort, population, q):
    lam_k = population[k].quality
    return q.theta * lam_k if k in cohort.aigc_set else lam_k


def gradient_error(cohort: Cohort, population: Sequence[ClientAttributes],
                   q: QualityModel, lp: LearningParams) -> float:
    """Training-gradient error of the cohort, weighting clients by batch size."""
    if cohort.is_empty():
        raise EmptyCohortError("gradient error is undefined for an empty cohort")
    members = sorted(cohort.members)
    batches = np.array([population[k].datasize / lp.h for k in members])
    nu = batches / batches.sum()
    terms = np.array([lp.psi / math.sqrt(b) + _effective_quality(k, cohort, population, q)
                      for k, b in zip(members, batches)])
    return float(nu @ terms)


def quality_bracket(cohort: Cohort, population: Sequence[ClientAttributes],
                    q: QualityModel, lp: LearningParams) -> float:
    """The error term multiplying ``(1 - phi^{hT}) kappa1`` in the accuracy loss.

    Sampling error enters as ``psi * sqrt(d_k) / (sqrt(h) d(N))``, so this is
    not identical to :func:`gradient_error`, whose sampling term is
    ``psi / sqrt(B_k)`` with ``B_k = d_k / h``.
    """
    if cohort.is_empty():
        raise EmptyCohortError("accuracy loss is undefined for an empty cohort")
    members = sorted(cohort.members)
    d = np.array([population[k].datasize for k in members], dtype=float)
    total = d.sum()
    lam_eff = np.array([_effective_quality(k, cohort, population, q) for k in members])
    sampling = lp.psi * np.sqrt(d).sum() / (math.sqrt(lp.h) * total)
    return float(sampling + (d / total) @ lam_eff)


def loss_from_bracket(bracket: float, lp: LearningParams, T) -> float:
    a = lp.contraction(T)
    return a * lp.theta_gap + (1.0 - a) * lp.kappa1 * bracket


def m_loss(cohort: Cohort, population: Sequence[ClientAttributes], q: QualityModel,
           lp: LearningParams, T: int) -> float:
    if T < 0:
        raise PreconditionError(f"T must be >= 0, got {T}")
    return loss_from_bracket(quality_bracket(cohort, population, q, lp), lp, T)


def round_payment(cohort: Cohort, population: Sequence[ClientAttributes],
                  q: QualityModel, r: float) -> float:
    """Payment for one global iteration; each client's share is discounted by its quality."""
    lam = q.lambda_max
    total = 0.0
    for k in cohort.local_set:
        c = population[k]
        total += r * c.datasize * (1.0 - c.quality / lam)
    for k in cohort.aigc_set:
        c = population[k]
        total += r * c.datasize * (1.0 - q.theta * c.quality / lam)
    return total


def cohort_cost(T: int, bracket: Optional[float], payment: float,
                lp: LearningParams, sp: ServerParams) -> CostBreakdown:
    """Cost of running ``T`` iterations with a cohort summarised by its bracket.

    ``bracket=None`` marks an empty cohort; its error term is replaced by
    the no-participation penalty ``omega``.
    """
    effective = sp.omega if bracket is None else bracket
    loss = loss_from_bracket(effective, lp, T)
    r_total = T * payment
    return CostBreakdown(loss, r_total, sp.gamma1 * loss + sp.gamma2 * r_total)


def cost_curve(Ts, bracket: float, payment: float, lp: LearningParams,
               sp: ServerParams) -> np.ndarray:
    """Vectorised total cost over an array of iteration counts."""
    Ts = np.asarray(Ts, dtype=float)
    a = lp.phi_h ** Ts
    return (sp.gamma1 * (a * lp.theta_gap + (1.0 - a) * lp.kappa1 * bracket)
            + sp.gamma2 * Ts * payment)


def server_cost(strategy: ServerStrategy, population: Sequence[ClientAttributes],
                q: QualityModel, lp: LearningParams, sp: ServerParams) -> CostBreakdown:
    cohort = cohort_from_reward(population, q, strategy.reward)
    if cohort.is_empty():
        return cohort_cost(strategy.iterations, None, 0.0, lp, sp)
    bracket = quality_bracket(cohort, population, q, lp)
    payment = round_payment(cohort, population, q, strategy.reward)
    return cohort_cost(strategy.iterations, bracket, payment, lp, sp)


def candidate_rewards(population: Sequence[ClientAttributes], q: QualityModel) -> list:
    if not population:
        raise PreconditionError("population must not be empty")
    values = []
    for client in population:
        ind = indicators(client, q)
        values.extend((ind.zeta1, ind.zeta2, ind.zeta3))
    return dedup_sorted(values)


def dedup_sorted(values: Iterable[float], atol: float = CANDIDATE_DEDUP_ATOL) -> list:
    out = []
    for v in sorted(v for v in values if math.isfinite(v)):
        if not out or v - out[-1] > atol:
            out.append(v)
    return out


def continuous_optimal_iterations(bracket: float, payment: float,
                                  lp: LearningParams, sp: ServerParams) -> float:
    """Stationary point of the cost in ``T``; may be <= 0 or infinite."""
    gap = lp.theta_gap - lp.kappa1 * bracket
    if gap <= 0:
        raise AssumptionError(
            f"Theta={lp.theta_gap:.6g} must exceed kappa1*Lambda={lp.kappa1 * bracket:.6g}")
    if sp.gamma1 == 0:
        return -math.inf
    x = sp.gamma2 * payment / (sp.gamma1 * -math.log(lp.phi_h) * gap)
    if x <= 0:
        return math.inf
    return math.log(x) / math.log(lp.phi_h)


def integer_optimal_iterations(bracket: float, payment: float, lp: LearningParams,
                               sp: ServerParams) -> int:
    t_star = continuous_optimal_iterations(bracket, payment, lp, sp)
    if t_star <= 1:
        return 1
    if t_star >= sp.max_T:
        return sp.max_T
    lo, hi = max(1, math.floor(t_star)), math.ceil(t_star)
    if lo == hi:
        return lo
    costs = cost_curve([lo, hi], bracket, payment, lp, sp)
    return lo if costs[0] <= costs[1] else hi


def optimal_iterations(r: float, population: Sequence[ClientAttributes], q: QualityModel,
                       lp: LearningParams, sp: ServerParams) -> int:
    """Best integer iteration count for reward ``r``.

    The continuous stationary point is rounded both ways and the cheaper
    neighbour kept; the result is capped at ``sp.max_T``.
    """
    cohort = cohort_from_reward(population, q, r)
    if cohort.is_empty():
        raise EmptyCohortError(f"no client participates at reward {r}")
    bracket = quality_bracket(cohort, population, q, lp)
    payment = round_payment(cohort, population, q, r)
    return integer_optimal_iterations(bracket, payment, lp, sp)


@dataclass(frozen=True)
class CandidateOutcome:
    strategy: ServerStrategy
    cost: CostBreakdown
    cohort: Cohort


def best_over_candidates(candidates: Sequence[float],
                         cohort_at: Callable[[float], Cohort],
                         payment_at: Callable[[Cohort, float], float],
                         bracket_of: Callable[[Cohort], float],
                         lp: LearningParams, sp: ServerParams) -> CandidateOutcome:
    """Pair every candidate reward with its best ``T`` and keep the cheapest.

    Shared by the full mechanism and the benchmark mechanisms, which differ
    only in client behaviour and payment rule.
    """
    best = None
    for r in candidates:
        cohort = cohort_at(r)
        if cohort.is_empty():
            continue
        bracket = bracket_of(cohort)
        payment = payment_at(cohort, r)
        T = integer_optimal_iterations(bracket, payment, lp, sp)
        cost = cohort_cost(T, bracket, payment, lp, sp)
        if best is None or cost.total < best.cost.total:
            best = CandidateOutcome(ServerStrategy(T, r), cost, cohort)
    if best is None:
        raise MechanismError("no candidate reward recruits any client")
    return best


def algorithm1(population: Sequence[ClientAttributes], q: QualityModel,
               lp: LearningParams, sp: ServerParams):
    """Optimal ``(T, r)`` under complete information.

    Returns ``(ServerStrategy, CostBreakdown)``.
    """
    outcome = solve_complete(population, q, lp, sp)
    return outcome.strategy, outcome.cost


def solve_complete(population, q, lp, sp) -> CandidateOutcome:
    return best_over_candidates(
        candidate_rewards(population, q),
        cohort_at=lambda r: cohort_from_reward(population, q, r),
        payment_at=lambda cohort, r: round_payment(cohort, population, q, r),
        bracket_of=lambda cohort: quality_bracket(cohort, population, q, lp),
        lp=lp, sp=sp)
