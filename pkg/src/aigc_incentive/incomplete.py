"""Expected server cost and optimal strategy when only attribute densities are known.

For a posted reward ``r`` a client with ``(s, lambda_k)`` participates iff
``lambda_k`` lies below a straight line in ``s``:

* ``r < zeta3``: local data, iff ``lambda_k <= lambda (1 - s / r)``;
* ``r >= zeta3``: AIGC data, iff ``lambda_k <= lambda (r - s) / (lambda delta + theta r)``.

The participation probability and the quality moment are therefore
one-dimensional integrals over ``s`` of the ``lambda`` CDF (resp. partial
first moment) evaluated on that line.  They are computed by Gauss-Legendre
quadrature on the pieces where the integrand is a single polynomial, which
is exact for the piecewise-linear densities used here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clients import AIGC, OPT_OUT, best_response_codes
from .complete import CostBreakdown, ServerStrategy
from .core import LearningParams, QualityModel, ServerParams
from .distributions import AttributeDistribution
from .errors import AssumptionError, NumericError, PreconditionError
from .optimize import refine_grid_minimum

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
DEFAULT_GRID_POINTS = 200
DEFAULT_REWARD_TOL = 1e-6
MC_BLOCK = 1000


class LambdaMode(enum.Enum):
    """How the expected quality of the cohort is normalised."""

    PAPER_LITERAL = "paper-literal"
    CONDITIONAL = "conditional"

    @classmethod
    def parse(cls, value) -> "LambdaMode":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == text or mode.name.lower().replace("_", "-") == text:
                return mode
        raise PreconditionError(f"unknown lambda mode {value!r}")


def reward_ceiling(dist: AttributeDistribution, q: QualityModel) -> float:
    """Smallest reward at which every client participates with AIGC data."""
    return (q.lambda_max * q.delta + dist.s_max) / (1.0 - q.theta)


@dataclass(frozen=True)
class CaseRegion:
    """Participation region for one reward.

    The region is ``{(s, lambda_k): 0 < s <= s_max, lambda_k <= intercept - slope * s}``
    intersected with the attribute rectangle; ``aigc`` marks that
    participants use AIGC data there.
    """

    case_id: str
    r: float
    intercept: float
    slope: float
    aigc: bool

    @property
    def description(self) -> str:
        data = "AIGC-enhanced" if self.aigc else "local"
        return (f"case {self.case_id}: lambda_k <= {self.intercept:.6g} - "
                f"{self.slope:.6g} * s_k, {data} data")


def _line(r, q: QualityModel):
    """Intercept, slope and AIGC flag of the participation boundary, vectorised in ``r``."""
    r = np.asarray(r, dtype=float)
    lam = q.lambda_max
    aigc = r >= q.zeta3
    denom = lam * q.delta + q.theta * r
    intercept = np.where(aigc, r * lam / denom, lam)
    slope = np.where(aigc, lam / denom, lam / r)
    return intercept, slope, aigc


def classify_case(r: float, dist: AttributeDistribution, q: QualityModel) -> CaseRegion:
    if not r > 0:
        raise PreconditionError(f"reward must be > 0, got {r}")
    r = min(float(r), reward_ceiling(dist, q))
    if r < dist.s_max:
        case_id = "I"
    elif r < q.zeta3:
        case_id = "II"
    else:
        case_id = "III"
    intercept, slope, aigc = _line(r, q)
    return CaseRegion(case_id, r, float(intercept), float(slope), bool(aigc))


def region_integrals(rs, dist: AttributeDistribution, q: QualityModel):
    """Participation probability ``p`` and raw quality moment ``m`` for each reward.

    ``m`` is the integral of ``lambda_k`` over the participation region,
    without the ``theta`` factor that applies to AIGC participants.
    Rewards are clamped to the ceiling; returns two arrays shaped like ``rs``.
    """
    rs = np.minimum(np.atleast_1d(np.asarray(rs, dtype=float)), reward_ceiling(dist, q))
    if np.any(rs <= 0):
        raise PreconditionError("rewards must be > 0")
    intercept, slope, _ = _line(rs, q)
    return line_integrals(intercept, slope, dist)


def line_integrals(intercept, slope, dist: AttributeDistribution):
    """Mass and ``lambda`` moment below ``lambda_k = intercept - slope * s`` for each line."""
    intercept = np.atleast_1d(np.asarray(intercept, dtype=float))
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    lam = dist.lambda_max
    v = dist.lambda_density
    u = dist.s_density

    if u.atom is not None:
        level = np.clip(intercept - slope * u.atom, 0.0, lam)
        return np.asarray(v.cdf(level), dtype=float), np.asarray(v.partial_moment(level), dtype=float)

    s_max = dist.s_max
    s_knots = np.asarray(u.breakpoints(), dtype=float)
    v_knots = np.asarray(v.breakpoints(), dtype=float)
    crossings = (intercept[:, None] - v_knots[None, :]) / slope[:, None]
    knots = np.concatenate(
        [np.broadcast_to(s_knots, (len(intercept), len(s_knots))), crossings], axis=1)
    knots = np.sort(np.clip(knots, 0.0, s_max), axis=1)
    a, b = knots[:, :-1], knots[:, 1:]
    half = 0.5 * (b - a)
    x = half[..., None] * GL_NODES + (0.5 * (a + b))[..., None]
    level = np.clip(intercept[:, None, None] - slope[:, None, None] * x, 0.0, lam)
    dens = u.pdf(x)
    p = np.sum(half * ((dens * v.cdf(level)) @ GL_WEIGHTS), axis=1)
    m = np.sum(half * ((dens * v.partial_moment(level)) @ GL_WEIGHTS), axis=1)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(m))):
        raise NumericError("region quadrature produced non-finite values "
                           f"(intercepts {intercept}, slopes {slope})")
    return np.clip(p, 0.0, 1.0), m


def participation_probability(region: CaseRegion, dist: AttributeDistribution) -> float:
    p, _ = line_integrals(region.intercept, region.slope, dist)
    return float(p[0])


def _expected_lambda_arrays(rs, p, m, q: QualityModel, mode: LambdaMode):
    scale = np.where(np.asarray(rs) >= q.zeta3, q.theta, 1.0)
    moment = scale * m
    if mode is LambdaMode.PAPER_LITERAL:
        return moment
    # conditional on participation; an empty cohort contributes no quality term
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, moment / np.where(p > 0, p, 1.0), 0.0)


def expected_lambda(region: CaseRegion, dist: AttributeDistribution, q: QualityModel,
                    mode=LambdaMode.PAPER_LITERAL) -> float:
    mode = LambdaMode.parse(mode)
    p, m = region_integrals([region.r], dist, q)
    if mode is LambdaMode.CONDITIONAL and p[0] == 0:
        raise NumericError(f"participation probability is 0 at r={region.r}; "
                           "conditional expectation undefined")
    return float(_expected_lambda_arrays([region.r], p, m, q, mode)[0])


def _regular_sampling(datasizes) -> float:
    d = np.asarray(datasizes, dtype=float)
    return float(np.sqrt(d).sum() / d.sum())


def expected_z(r: float, p: float, datasizes: Sequence[int], sp: ServerParams) -> float:
    """Approximate expected sampling-error factor of the random cohort."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"p must lie in [0, 1], got {p}")
    K = len(datasizes)
    if K < 1:
        raise PreconditionError("at least one client is required")
    return _regular_sampling(datasizes) + (1.0 - p) ** K * sp.omega


def _check_datasizes(datasizes) -> np.ndarray:
    d = np.asarray(datasizes, dtype=float)
    if d.ndim != 1 or d.size < 1 or np.any(d <= 0):
        raise PreconditionError("datasizes must be a non-empty list of positive integers")
    return d


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    trials: int

    def __iter__(self):
        return iter((self.mean, self.std_error))


def _block_generators(seed, n_blocks):
    return [np.random.default_rng(child)
            for child in np.random.SeedSequence(seed).spawn(n_blocks)]


def monte_carlo_eq(r: float, dist: AttributeDistribution, q: QualityModel,
                   datasizes: Sequence[int], sp: ServerParams, trials: int,
                   seed: int = 0, exact_z: bool = False) -> MonteCarloEstimate:
    """Empirical mean and standard error of the cohort sampling-error factor.

    Each trial draws fresh ``(s_k, lambda_k)`` for every client and applies
    best responses.  Trials are grouped in fixed blocks of ``MC_BLOCK`` with
    one spawned stream per block, so results depend only on ``seed``.
    With ``exact_z`` the epsilon-regularised form of the factor is used
    instead of the piecewise definition.
    """
    if int(trials) != trials or trials < 1:
        raise PreconditionError(f"trials must be a positive integer, got {trials}")
    if not r > 0:
        raise PreconditionError(f"reward must be > 0, got {r}")
    d = _check_datasizes(datasizes)
    sqrt_d = np.sqrt(d)
    K = d.size
    n_blocks = -(-int(trials) // MC_BLOCK)
    values = []
    for b, rng in enumerate(_block_generators(seed, n_blocks)):
        n = min(MC_BLOCK, int(trials) - b * MC_BLOCK)
        s, lam = dist.sample(rng, (n, K))
        joined = best_response_codes(s, lam, q, r) != OPT_OUT
        num = joined @ sqrt_d
        den = joined @ d
        if exact_z:
            ind = (den > 0).astype(float)
            eps = sp.epsilon
            vals = num / (den + eps) + (1.0 - ind) * sp.omega
        else:
            vals = np.where(den > 0, num / np.where(den > 0, den, 1.0), sp.omega)
        values.append(vals)
    values = np.concatenate(values)
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return MonteCarloEstimate(mean, std_error, values.size)


def monte_carlo_cost(T: int, r: float, dist: AttributeDistribution, q: QualityModel,
                     lp: LearningParams, sp: ServerParams, datasizes: Sequence[int],
                     trials: int, seed: int = 0) -> MonteCarloEstimate:
    """Empirical mean realised cost of posting ``(T, r)`` to freshly drawn populations."""
    if int(trials) != trials or trials < 1:
        raise PreconditionError(f"trials must be a positive integer, got {trials}")
    d = _check_datasizes(datasizes)
    K = d.size
    a = lp.contraction(T)
    n_blocks = -(-int(trials) // MC_BLOCK)
    values = []
    for b, rng in enumerate(_block_generators(seed, n_blocks)):
        n = min(MC_BLOCK, int(trials) - b * MC_BLOCK)
        s, lam = dist.sample(rng, (n, K))
        codes = best_response_codes(s, lam, q, r)
        joined = codes != OPT_OUT
        lam_eff = np.where(codes == AIGC, q.theta * lam, lam) * joined
        den = joined @ d
        safe = np.where(den > 0, den, 1.0)
        bracket = np.where(den > 0, lp.psi * (joined @ np.sqrt(d)) / (math.sqrt(lp.h) * safe)
                           + (lam_eff @ d) / safe, sp.omega)
        payment = r * ((joined - lam_eff / q.lambda_max) @ d)
        loss = a * lp.theta_gap + (1.0 - a) * lp.kappa1 * bracket
        values.append(sp.gamma1 * loss + sp.gamma2 * T * payment)
    values = np.concatenate(values)
    std_error = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return MonteCarloEstimate(float(values.mean()), std_error, values.size)


@dataclass(frozen=True)
class ExpectedCost:
    """Expected cost and its pieces for one ``(T, r)``."""

    T: int
    r: float
    case_id: str
    p: float
    expected_lambda: float
    expected_z: float
    m_loss: float
    r_total: float
    total: float

    def as_breakdown(self) -> CostBreakdown:
        return CostBreakdown(self.m_loss, self.r_total, self.total)


class IncompleteModel:
    """Vectorised expected-cost evaluator bound to one scenario.

    Grid statistics depend only on the reward, so they are computed once
    and shared across all iteration counts.
    """

    def __init__(self, dist: AttributeDistribution, q: QualityModel, lp: LearningParams,
                 sp: ServerParams, datasizes: Sequence[int],
                 mode=LambdaMode.PAPER_LITERAL, grid_points: int = DEFAULT_GRID_POINTS,
                 tol: float = DEFAULT_REWARD_TOL):
        dist.check_against(q)
        self.dist, self.q, self.lp, self.sp = dist, q, lp, sp
        self.d = _check_datasizes(datasizes)
        self.K = self.d.size
        self.mode = LambdaMode.parse(mode)
        if grid_points < 2:
            raise PreconditionError("grid_points must be >= 2")
        self.grid_points = int(grid_points)
        self.tol = tol
        self.ceiling = reward_ceiling(dist, q)
        self.regular = float(np.sqrt(self.d).sum() / self.d.sum())
        self.total_d = float(self.d.sum())
        self._intervals = self._build_intervals()
        self._grid_stats = [self.stats(grid) for grid, _, _ in self._intervals]

    def _build_intervals(self):
        n = self.grid_points
        s_max, z3, top = self.dist.s_max, self.q.zeta3, self.ceiling
        idx = np.arange(n)
        g1 = s_max * (idx + 1) / (n + 1)
        g2 = s_max + (z3 - s_max) * idx / n
        g3 = np.linspace(z3, top, n)
        # search limits used when the best grid point is at an end of its interval
        eps1 = s_max * 1e-9
        eps2 = (z3 - s_max) * 1e-12
        return [(g1, eps1, s_max - eps1),
                (g2, s_max, z3 - eps2),
                (g3, z3, top)]

    def stats(self, rs):
        """``(p, expected_lambda)`` arrays for an array of rewards."""
        rs = np.atleast_1d(np.asarray(rs, dtype=float))
        p, m = region_integrals(rs, self.dist, self.q)
        return p, _expected_lambda_arrays(rs, p, m, self.q, self.mode)

    def _pieces(self, T, rs, p, el):
        lp, sp = self.lp, self.sp
        a = lp.contraction(T)
        ez = self.regular + (1.0 - p) ** self.K * sp.omega
        loss = (a * lp.theta_gap
                + (1.0 - a) * lp.kappa1 * (lp.psi / math.sqrt(lp.h) * ez + el))
        pay = T * rs * p * self.total_d * (1.0 - el / self.q.lambda_max)
        return ez, loss, pay, sp.gamma1 * loss + sp.gamma2 * pay

    def cost_array(self, T, rs, p=None, el=None) -> np.ndarray:
        rs = np.atleast_1d(np.asarray(rs, dtype=float))
        if p is None:
            p, el = self.stats(rs)
        return self._pieces(T, np.minimum(rs, self.ceiling), p, el)[3]

    def expected_cost(self, T, r) -> ExpectedCost:
        region = classify_case(r, self.dist, self.q)
        p, el = self.stats([region.r])
        ez, loss, pay, total = self._pieces(T, np.array([float(r)]), p, el)
        return ExpectedCost(T, float(r), region.case_id, float(p[0]), float(el[0]),
                            float(ez[0]), float(loss[0]), float(pay[0]), float(total[0]))

    def optimize_reward(self, T: int):
        """Best reward for a fixed ``T``: ``(r*, cost*)``."""
        if int(T) != T or T < 1:
            raise PreconditionError(f"T must be an integer >= 1, got {T}")
        best = (math.nan, math.inf)
        for (grid, lo, hi), (p, el) in zip(self._intervals, self._grid_stats):
            values = self.cost_array(T, grid, p, el)
            cand = refine_grid_minimum(lambda x: float(self.cost_array(T, [x])[0]),
                                       grid, values, lo, hi, self.tol)
            if cand[1] < best[1]:
                best = cand
        return best

    def continuous_t_star(self, rs, p=None, el=None) -> np.ndarray:
        """Stationary iteration count for each reward; ``nan`` where the gap assumption fails."""
        rs = np.atleast_1d(np.asarray(rs, dtype=float))
        if p is None:
            p, el = self.stats(rs)
        lp, sp = self.lp, self.sp
        ez = self.regular + (1.0 - p) ** self.K * sp.omega
        lam_bar = lp.psi / math.sqrt(lp.h) * ez + el
        gap = lp.theta_gap - lp.kappa1 * lam_bar
        pay = rs * p * self.total_d * (1.0 - el / self.q.lambda_max)
        log_a = math.log(lp.phi_h)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = sp.gamma2 * pay / (sp.gamma1 * -log_a * gap)
            t = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)) / log_a, np.inf)
        return np.where(gap > 0, t, np.nan)

    def t_max(self) -> int:
        """Largest useful iteration count over all admissible rewards."""
        best = -math.inf
        any_valid = False
        for (grid, lo, hi), (p, el) in zip(self._intervals, self._grid_stats):
            t = self.continuous_t_star(grid, p, el)
            valid = np.isfinite(t) | (t == np.inf)
            if not np.any(valid):
                continue
            any_valid = True
            if np.any(t == np.inf):
                return self.sp.max_T
            neg = np.where(np.isnan(t), np.inf, -t)

            def f(x):
                v = float(self.continuous_t_star([x])[0])
                return math.inf if math.isnan(v) else -v

            _, val = refine_grid_minimum(f, grid, neg, lo, hi, self.tol)
            best = max(best, -val)
        if not any_valid:
            raise AssumptionError(
                "Theta must exceed kappa1 * E(Lambda) for some admissible reward")
        if best == math.inf:
            return self.sp.max_T
        return int(min(max(1, math.ceil(best)), self.sp.max_T))

    def algorithm2(self):
        """Optimal ``(T, r)`` by scanning ``T = 1..t_max``; returns ``(ServerStrategy, ExpectedCost)``."""
        top = self.t_max()
        best_T, best_r, best_cost = None, None, math.inf
        for T in range(1, top + 1):
            r, cost = self.optimize_reward(T)
            if cost < best_cost:
                best_T, best_r, best_cost = T, r, cost
        return ServerStrategy(best_T, best_r), self.expected_cost(best_T, best_r)


def expected_cost(T: int, r: float, dist: AttributeDistribution, q: QualityModel,
                  lp: LearningParams, sp: ServerParams, datasizes: Sequence[int],
                  mode=LambdaMode.PAPER_LITERAL) -> ExpectedCost:
    if T < 0:
        raise PreconditionError(f"T must be >= 0, got {T}")
    return IncompleteModel(dist, q, lp, sp, datasizes, mode, grid_points=2).expected_cost(T, r)


def optimize_reward_given_T(T: int, dist: AttributeDistribution, q: QualityModel,
                            lp: LearningParams, sp: ServerParams, datasizes: Sequence[int],
                            mode=LambdaMode.PAPER_LITERAL,
                            grid_points: int = DEFAULT_GRID_POINTS):
    return IncompleteModel(dist, q, lp, sp, datasizes, mode, grid_points).optimize_reward(T)


def t_max(dist: AttributeDistribution, q: QualityModel, lp: LearningParams,
          sp: ServerParams, datasizes: Sequence[int], mode=LambdaMode.PAPER_LITERAL,
          grid_points: int = DEFAULT_GRID_POINTS) -> int:
    return IncompleteModel(dist, q, lp, sp, datasizes, mode, grid_points).t_max()


def algorithm2(dist: AttributeDistribution, q: QualityModel, lp: LearningParams,
               sp: ServerParams, datasizes: Sequence[int], mode=LambdaMode.PAPER_LITERAL,
               grid_points: int = DEFAULT_GRID_POINTS):
    return IncompleteModel(dist, q, lp, sp, datasizes, mode, grid_points).algorithm2()
