"""Self-contained oracle checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`CheckResult`; none of them raises on a failed
comparison, so a caller can always print the complete table.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List

import numpy as np
from scipy import integrate

from . import complete as cmp
from .clients import best_response, best_response_codes, brute_force_best_response, OPT_OUT, AIGC
from .core import (ClassDistribution, ClientAttributes, LearningParams, QualityModel,
                   ServerParams, derive_learning_constants, emd)
from .distributions import AttributeDistribution
from .fl_sim import bound_check, build_federation, run_rounds
from .incomplete import (classify_case, expected_z, monte_carlo_eq,
                         participation_probability)
from .population import MECHANISMS, ScenarioConfig, run_mechanism, run_seed, sample_population


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, body: Callable[[], tuple]) -> CheckResult:
    start = time.perf_counter()
    passed, detail, metrics = body()
    return CheckResult(name, bool(passed), detail, metrics, time.perf_counter() - start)


# --- shared scenario constants ---------------------------------------------------

def mnist_learning(h: int = 5, lambda_max: float = 3.0) -> LearningParams:
    return derive_learning_constants(0.01, 37.36, 5.48, 0.57, 25.0, h, lambda_max=lambda_max)


def mnist_quality(s_ai: float = 0.8) -> QualityModel:
    return QualityModel(3.0, 2.45, 1.05, s_ai)


def reference_config(K: int, info: str, seeds=tuple(range(10))) -> ScenarioConfig:
    return ScenarioConfig(K, (30, 30), AttributeDistribution.of_kind("UD", "UD", 0.1, 3.0),
                          mnist_quality(0.8), mnist_learning(), ServerParams(8e4, 1.0),
                          seeds=seeds, info=info)


def benchmark_config(seeds=tuple(range(10))) -> ScenarioConfig:
    return ScenarioConfig(30, (100, 300), AttributeDistribution.of_kind("UD", "UD", 1e-3, 3.0),
                          mnist_quality(0.01), mnist_learning(), ServerParams(1e5, 0.01),
                          seeds=seeds)


def distribution_config(kind: str, K: int, seeds=tuple(range(10))) -> ScenarioConfig:
    return ScenarioConfig(K, (100, 300), AttributeDistribution.of_kind(kind, kind, 0.1, 3.0),
                          mnist_quality(0.5), mnist_learning(), ServerParams(1e5, 1.0),
                          seeds=seeds, info="incomplete")


# --- 1 -----------------------------------------------------------------------------

def check_zeta3() -> CheckResult:
    def body():
        z3 = mnist_quality(0.8).zeta3
        return 0.6228 <= z3 <= 0.6248, f"zeta3 = {z3:.6f} (target 0.6238 +/- 0.001)", {"zeta3": z3}
    return _timed("AC1 zeta3 reproduction", body)


# --- 2 -----------------------------------------------------------------------------

def random_model(rng: np.random.Generator) -> QualityModel:
    g_data = rng.uniform(0.5, 20.0)
    theta = rng.uniform(0.05, 0.95)
    return QualityModel(rng.uniform(0.5, 5.0), g_data, 2.0 * theta * g_data, rng.uniform(0.0, 1.0))


def random_client(rng: np.random.Generator, q: QualityModel, with_labels: bool) -> ClientAttributes:
    d = int(rng.integers(1, 501))
    s = rng.uniform(1e-4, 1.0)
    if with_labels:
        probs = rng.dirichlet(np.full(int(rng.integers(2, 11)), rng.uniform(0.1, 2.0)))
        dist = ClassDistribution(tuple(probs / probs.sum()))
        bound = min(q.lambda_max, emd(dist, ClassDistribution.uniform(dist.num_classes)) * q.g_data)
        lam_k = bound * rng.uniform(0.01, 1.0)
        if lam_k <= 0:
            lam_k = 1e-6 * q.lambda_max
        return ClientAttributes(d, lam_k, s, dist)
    return ClientAttributes(d, rng.uniform(1e-3, 1.0) * q.lambda_max, s)


def check_best_response(draws: int = 10_000, seed: int = 2) -> CheckResult:
    def body():
        from .clients import indicators
        rng = np.random.default_rng(seed)
        mismatches = 0
        for i in range(draws):
            q = random_model(rng)
            client = random_client(rng, q, with_labels=i % 4 == 0)
            ind = indicators(client, q)
            finite = [z for z in (ind.zeta1, ind.zeta2, ind.zeta3) if math.isfinite(z)]
            if i % 5 == 0:
                r = float(rng.choice(finite))  # exact thresholds exercise the tie rules
            else:
                r = rng.uniform(0.0, 2.0 * max(finite))
            if best_response(client, q, r) is not brute_force_best_response(client, q, r):
                mismatches += 1
        return (mismatches == 0, f"{draws - mismatches}/{draws} closed-form responses match the argmax",
                {"mismatches": mismatches})
    return _timed("AC2 best response vs brute force", body)


# --- 3 -----------------------------------------------------------------------------

def _population_arrays(population):
    d = np.array([c.datasize for c in population], dtype=float)
    lam = np.array([c.quality for c in population])
    s = np.array([c.unit_cost for c in population])
    return d, lam, s


def grid_costs(population, q: QualityModel, lp: LearningParams, sp: ServerParams,
               T: int, rewards: np.ndarray) -> np.ndarray:
    """Server cost at fixed ``T`` for every reward on a grid, cohort by direct best responses."""
    d, lam, s = _population_arrays(population)
    out = np.empty(rewards.size)
    for i, r in enumerate(rewards):
        codes = best_response_codes(s, lam, q, r)
        joined = codes != OPT_OUT
        if not joined.any():
            out[i] = cmp.cohort_cost(T, None, 0.0, lp, sp).total
            continue
        lam_eff = np.where(codes == AIGC, q.theta * lam, lam)[joined]
        dj = d[joined]
        bracket = lp.psi * np.sqrt(dj).sum() / (math.sqrt(lp.h) * dj.sum()) + dj @ lam_eff / dj.sum()
        payment = r * float(dj @ (1.0 - lam_eff / q.lambda_max))
        out[i] = cmp.cohort_cost(T, bracket, payment, lp, sp).total
    return out


def fixed_T_candidate_cost(population, q, lp, sp, T) -> float:
    best = math.inf
    for r in cmp.candidate_rewards(population, q):
        cohort = cmp.cohort_from_reward(population, q, r)
        if cohort.is_empty():
            continue
        bracket = cmp.quality_bracket(cohort, population, q, lp)
        payment = cmp.round_payment(cohort, population, q, r)
        best = min(best, cmp.cohort_cost(T, bracket, payment, lp, sp).total)
    return best


def check_reward_candidates(populations: int = 50, seed: int = 3, step: float = 1e-3) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        q, lp, sp = mnist_quality(0.8), mnist_learning(), ServerParams(8e4, 1.0)
        far, worse = 0, 0
        worst_rel = -math.inf
        for _ in range(populations):
            population = [ClientAttributes(int(rng.integers(100, 301)), rng.uniform(0.05, 2.9),
                                           rng.uniform(1e-3, 0.1)) for _ in range(10)]
            candidates = np.array(cmp.candidate_rewards(population, q))
            grid = np.arange(step, candidates.max() + 2 * step, step)
            _, alg1 = cmp.algorithm1(population, q, lp, sp)
            for T in rng.choice(np.arange(1, 101), size=5, replace=False):
                costs = grid_costs(population, q, lp, sp, int(T), grid)
                i = int(np.argmin(costs))
                if np.min(np.abs(candidates - grid[i])) > step * (1 + 1e-9):
                    far += 1
                fixed = fixed_T_candidate_cost(population, q, lp, sp, int(T))
                rel = (min(fixed, alg1.total) - costs[i]) / abs(costs[i])
                worst_rel = max(worst_rel, rel)
                if fixed > costs[i] * (1 + 1e-6) or alg1.total > costs[i] * (1 + 1e-6):
                    worse += 1
        cells = populations * 5
        return (far == 0 and worse == 0,
                f"{cells - far}/{cells} grid minima next to a candidate, "
                f"{cells - worse}/{cells} candidate costs <= grid minimum",
                {"far": far, "worse": worse, "worst_relative_excess": worst_rel})
    return _timed("AC3 optimal reward lies on a candidate", body)


# --- 4 -----------------------------------------------------------------------------

def check_iterations(scenarios: int = 50, seed: int = 4, T_cap: int = 500) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        q, lp = mnist_quality(0.8), mnist_learning()
        mismatches = done = 0
        Ts = np.arange(1, T_cap + 1)
        while done < scenarios:
            sp = ServerParams(10 ** rng.uniform(3, 5.5), 10 ** rng.uniform(-2, 1), max_T=T_cap)
            population = [ClientAttributes(int(rng.integers(30, 301)), rng.uniform(0.05, 2.9),
                                           rng.uniform(1e-3, 0.1)) for _ in range(10)]
            r = float(rng.choice(cmp.candidate_rewards(population, q)))
            cohort = cmp.cohort_from_reward(population, q, r)
            if cohort.is_empty():
                continue
            bracket = cmp.quality_bracket(cohort, population, q, lp)
            if not lp.theta_gap > lp.kappa1 * bracket:
                continue
            done += 1
            payment = cmp.round_payment(cohort, population, q, r)
            exhaustive = int(Ts[np.argmin(cmp.cost_curve(Ts, bracket, payment, lp, sp))])
            if cmp.optimal_iterations(r, population, q, lp, sp) != exhaustive:
                mismatches += 1
        return (mismatches == 0, f"{scenarios - mismatches}/{scenarios} match the exhaustive argmin",
                {"mismatches": mismatches})
    return _timed("AC4 optimal iteration count", body)


# --- 5 -----------------------------------------------------------------------------

ESTIMATOR_REWARDS = (0.01, 0.02, 0.04, 0.06, 0.1, 0.3, 0.62, 0.75)


def check_estimator(trials: int = 20_000, Ks=(15, 25, 50, 100), seed: int = 5,
                    slack: float = 0.02) -> CheckResult:
    def body():
        q, sp = mnist_quality(0.8), ServerParams(8e4, 1.0)
        dist = AttributeDistribution.of_kind("UD", "UD", 0.1, 3.0)
        rng = np.random.default_rng(seed)
        failures, worst = [], -math.inf
        for K in Ks:
            d = rng.integers(100, 301, size=K)
            for j, r in enumerate(ESTIMATOR_REWARDS):
                p = participation_probability(classify_case(r, dist, q), dist)
                z = expected_z(r, p, d, sp)
                mc = monte_carlo_eq(r, dist, q, d, sp, trials, seed=1000 * K + j)
                excess = abs(z - mc.mean) - (3 * mc.std_error + slack)
                worst = max(worst, excess)
                if excess > 0:
                    failures.append((K, r, z, mc.mean, mc.std_error))
        cells = len(Ks) * len(ESTIMATOR_REWARDS)
        return (not failures, f"{cells - len(failures)}/{cells} cells within 3 SE + {slack}",
                {"failures": failures, "worst_excess": worst})
    return _timed("AC5 expected Z vs Monte Carlo", body)


# --- 6 -----------------------------------------------------------------------------

def check_region_closed_forms(tol: float = 1e-6) -> CheckResult:
    def body():
        q = mnist_quality(0.8)
        s_max, lam = 0.1, 3.0
        dist = AttributeDistribution.of_kind("UD", "UD", s_max, lam)
        rewards = np.concatenate([np.linspace(0.005, 0.095, 10), np.linspace(s_max, 0.6, 10)])
        worst = 0.0
        for r in rewards:
            closed = r / (2 * s_max) if r < s_max else 1 - s_max / (2 * r)
            upper_s = min(r, s_max)
            adaptive, _ = integrate.dblquad(lambda l, s: 1.0 / (s_max * lam), 0.0, upper_s,
                                            0.0, lambda s: lam * (1 - s / r),
                                            epsabs=1e-12, epsrel=1e-12)
            ours = participation_probability(classify_case(r, dist, q), dist)
            worst = max(worst, abs(closed - adaptive), abs(closed - ours))
        return worst <= tol, f"max deviation {worst:.2e} over {rewards.size} rewards", {"max_dev": worst}
    return _timed("AC6 closed-form region probabilities", body)


# --- 7 -----------------------------------------------------------------------------

def check_information_trends(seeds=tuple(range(10)), Ks=(20, 50, 100)) -> CheckResult:
    def body():
        r_inc, gaps = {}, {}
        for K in (10,) + tuple(Ks):
            inc = [run_seed(reference_config(K, "incomplete", seeds), s) for s in seeds]
            r_inc[K] = float(np.mean([x.strategy.reward for x in inc]))
            if K in Ks:
                com = [run_seed(reference_config(K, "complete", seeds), s) for s in seeds]
                gaps[K] = float(np.mean([x.cost.total for x in inc]) - np.mean([x.cost.total for x in com]))
        a = 0.60 <= r_inc[10] <= 0.65
        rs = [r_inc[K] for K in Ks]
        b = all(x >= y for x, y in zip(rs, rs[1:]))
        gs = [gaps[K] for K in Ks]
        c = all(x >= y for x, y in zip(gs, gs[1:]))
        detail = (f"(a) r_o(K=10)={r_inc[10]:.4f} {'ok' if a else 'out of band'}; "
                  f"(b) r_o={['%.4f' % x for x in rs]} {'ok' if b else 'not monotone'}; "
                  f"(c) incomplete minus complete cost={['%.1f' % x for x in gs]} {'ok' if c else 'not monotone'}")
        return a and b and c, detail, {"r_incomplete": r_inc, "gap": gaps}
    return _timed("AC7 complete vs incomplete trends", body)


# --- 8 -----------------------------------------------------------------------------

def check_benchmarks(seeds=tuple(range(10))) -> CheckResult:
    def body():
        config = benchmark_config(seeds)
        dominated = welfare_wins = 0
        for seed in seeds:
            population = sample_population(config, seed)
            res = {m: run_mechanism(replace(config, mechanism=m), population, seed) for m in MECHANISMS}
            cost = {m: r.cost.total for m, r in res.items()}
            welfare = {m: r.social_welfare for m, r in res.items()}
            dominated += cost["IMFL"] <= cost["NAIGC"] and cost["IMFL"] <= cost["NDQ"]
            welfare_wins += welfare["IMFL"] >= max(welfare.values())
        n = len(seeds)
        return (dominated == n and welfare_wins >= math.ceil(0.8 * n),
                f"cost dominance on {dominated}/{n}, highest welfare on {welfare_wins}/{n}",
                {"dominated": dominated, "welfare_wins": welfare_wins})
    return _timed("AC8 benchmark dominance", body)


# --- 9 -----------------------------------------------------------------------------

def random_federation_case(rng: np.random.Generator):
    dim = int(rng.integers(2, 21))
    K = int(rng.integers(1, 11))
    h = int(rng.choice([1, 5, 10]))
    T = int(rng.integers(1, 101))
    mu = rng.uniform(0.1, 2.0)
    rho = mu * rng.uniform(1.0, 20.0)
    lp = LearningParams(rng.uniform(0.05, 0.95) / rho, rho, mu, rng.uniform(0.1, 1.0),
                        rng.uniform(0.0, 2.0), h, 1.0)
    d = rng.integers(100, 301, size=K)
    nu = d / d.sum()
    while True:
        targets = rng.uniform(0.0, 3.0, size=K)
        if K == 1:
            targets[:] = 0.0
        elif K == 2:
            targets[1] = nu[0] * targets[0] / nu[1]
        sides = nu * targets
        if sides.max() <= sides.sum() - sides.max():
            return dim, K, T, lp, d, targets


def check_bound(federations: int = 100, seed: int = 9) -> CheckResult:
    def body():
        master = np.random.default_rng(seed)
        failures, worst = 0, -math.inf
        for i in range(federations):
            rng = np.random.default_rng(master.integers(2 ** 32))
            dim, K, T, lp, d, targets = random_federation_case(rng)
            clients = build_federation(K, dim, targets, lp, seed=i, datasizes=d)
            report = bound_check(run_rounds(clients, lp, T, seed=i))
            worst = max(worst, report.max_violation)
            failures += not report.passed
        return (failures == 0, f"{federations - failures}/{federations} traces below the bound "
                f"(largest gap - bound = {worst:.3g})", {"failures": failures, "worst": worst})
    return _timed("AC9 convergence bound", body)


# --- 10 ----------------------------------------------------------------------------

def check_distribution_order(Ks=(5, 10, 20, 50), seeds=tuple(range(10))) -> CheckResult:
    def body():
        means, bad = {}, []
        for K in Ks:
            row = {}
            for kind in ("LID", "UD", "LDD"):
                config = distribution_config(kind, K, seeds)
                row[kind] = float(np.mean([run_seed(config, s).cost.total for s in seeds]))
            means[K] = row
            if not row["LDD"] <= row["UD"] <= row["LID"]:
                bad.append(K)
        text = "; ".join(f"K={K}: LDD {m['LDD']:.0f}, UD {m['UD']:.0f}, LID {m['LID']:.0f}"
                         for K, m in means.items())
        return not bad, f"ordering broken at K={bad} | {text}" if bad else text, {"means": means}
    return _timed("AC10 distribution ordering of expected cost", body)


ALL_CHECKS = (check_zeta3, check_best_response, check_reward_candidates, check_iterations,
              check_estimator, check_region_closed_forms, check_information_trends, check_benchmarks,
              check_bound, check_distribution_order)


def run_all(quick: bool = False) -> List[CheckResult]:
    """Run every check; ``quick`` shrinks sample counts for a fast smoke pass."""
    if not quick:
        return [check() for check in ALL_CHECKS]
    few = tuple(range(3))
    return [check_zeta3(), check_best_response(1000), check_reward_candidates(5),
            check_iterations(10), check_estimator(2000, Ks=(15, 50)),
            check_region_closed_forms(), check_information_trends(seeds=few), check_benchmarks(few),
            check_bound(10), check_distribution_order(seeds=few)]
