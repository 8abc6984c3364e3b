"""Population sampling, benchmark mechanisms, welfare accounting and sweeps.

Three mechanisms share the server cost model and differ only in how
clients react to the posted reward and how they are paid:

* ``IMFL``: the full mechanism; clients may buy generated data.
* ``NAIGC``: quality-aware payments, no generated-data option.
* ``NDQ``: flat payment ``r * d_k`` that ignores data quality.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import complete as cmp
from .clients import ClientStrategy, indicators, utility
from .core import ClientAttributes, LearningParams, QualityModel, ServerParams
from .distributions import AttributeDistribution
from .errors import ParameterError
from .incomplete import IncompleteModel, LambdaMode

MECHANISMS = ("IMFL", "NAIGC", "NDQ")
INFOS = ("complete", "incomplete")

CSV_COLUMNS = ("seed", "mechanism", "info", "K", "T_o", "r_o", "cost_total", "m_loss",
               "r_total", "n_local", "n_aigc", "welfare")
SWEEP_ALIASES = {"K": "K", "k": "K", "gamma": "gamma1", "gamma1": "gamma1",
                 "gamma2": "gamma2", "s_ai": "s_ai"}


@dataclass(frozen=True)
class ScenarioConfig:
    K: int
    datasize_range: Tuple[int, int]
    dist: AttributeDistribution
    quality: QualityModel
    learning: LearningParams
    server: ServerParams
    seeds: Tuple[int, ...] = (0,)
    mechanism: str = "IMFL"
    info: str = "complete"
    mode: LambdaMode = LambdaMode.PAPER_LITERAL
    grid_points: int = 200

    def __post_init__(self):
        problems = []
        if int(self.K) != self.K or self.K < 1:
            problems.append(f"K must be an integer >= 1, got {self.K}")
        lo, hi = self.datasize_range
        if int(lo) != lo or int(hi) != hi or lo < 1 or lo > hi:
            problems.append(f"datasize range must be integers with 1 <= min <= max, got {self.datasize_range}")
        if not self.seeds:
            problems.append("seed list must not be empty")
        if self.mechanism not in MECHANISMS:
            problems.append(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.info not in INFOS:
            problems.append(f"info must be one of {INFOS}, got {self.info!r}")
        if problems:
            raise ParameterError("; ".join(problems))
        object.__setattr__(self, "datasize_range", (int(lo), int(hi)))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "mode", LambdaMode.parse(self.mode))
        self.dist.check_against(self.quality, require_below_zeta3=self.info == "incomplete")


@dataclass
class RunResult:
    seed: int
    mechanism: str
    info: str
    K: int
    strategy: cmp.ServerStrategy
    cost: cmp.CostBreakdown
    n_local: int
    n_aigc: int
    client_utilities: List[float] = field(default_factory=list)
    social_welfare: float = math.nan
    realized_cost: Optional[cmp.CostBreakdown] = None

    def row(self) -> dict:
        return {"seed": self.seed, "mechanism": self.mechanism, "info": self.info,
                "K": self.K, "T_o": self.strategy.iterations, "r_o": self.strategy.reward,
                "cost_total": self.cost.total, "m_loss": self.cost.m_loss,
                "r_total": self.cost.r_total, "n_local": self.n_local,
                "n_aigc": self.n_aigc, "welfare": self.social_welfare}


def sample_population(config: ScenarioConfig, seed: int) -> List[ClientAttributes]:
    """Draw ``K`` clients: all unit costs, then all qualities, then all datasizes."""
    rng = np.random.default_rng(seed)
    s, lam = config.dist.sample(rng, config.K)
    lo, hi = config.datasize_range
    d = rng.integers(lo, hi + 1, size=config.K)
    return [ClientAttributes(int(dk), float(lk), float(sk)) for sk, lk, dk in zip(s, lam, d)]


# --- benchmark client models -------------------------------------------------

def _naigc_cohort(population, q, r):
    joined = {k for k, c in enumerate(population) if r >= indicators(c, q).zeta1}
    return cmp.Cohort(joined, ())


def _ndq_cohort(population, r):
    return cmp.Cohort({k for k, c in enumerate(population) if r >= c.unit_cost}, ())


def _ndq_payment(cohort, population, r):
    return r * sum(population[k].datasize for k in cohort.local_set)


def solve_mechanism(mechanism: str, population: Sequence[ClientAttributes], q: QualityModel,
                    lp: LearningParams, sp: ServerParams) -> cmp.CandidateOutcome:
    """Complete-information optimum of one mechanism on a known population."""
    bracket_of = lambda cohort: cmp.quality_bracket(cohort, population, q, lp)  # noqa: E731
    if mechanism == "IMFL":
        return cmp.solve_complete(population, q, lp, sp)
    if mechanism == "NAIGC":
        candidates = cmp.dedup_sorted(indicators(c, q).zeta1 for c in population)
        return cmp.best_over_candidates(
            candidates, lambda r: _naigc_cohort(population, q, r),
            lambda cohort, r: cmp.round_payment(cohort, population, q, r),
            bracket_of, lp, sp)
    if mechanism == "NDQ":
        candidates = cmp.dedup_sorted(c.unit_cost for c in population)
        return cmp.best_over_candidates(
            candidates, lambda r: _ndq_cohort(population, r),
            lambda cohort, r: _ndq_payment(cohort, population, r),
            bracket_of, lp, sp)
    raise ParameterError(f"unknown mechanism {mechanism!r}")


def client_utilities(mechanism: str, population: Sequence[ClientAttributes],
                     q: QualityModel, cohort: cmp.Cohort, r: float) -> List[float]:
    """Per-round utility of every client under the mechanism's payment rule."""
    out = []
    for k, c in enumerate(population):
        if k not in cohort.members:
            out.append(0.0)
        elif mechanism == "NDQ":
            out.append(r * c.datasize - c.unit_cost * c.datasize)
        elif k in cohort.aigc_set:
            out.append(utility(c, q, r, ClientStrategy.AIGC))
        else:
            out.append(utility(c, q, r, ClientStrategy.LOCAL))
    return out


def social_welfare(result: RunResult, config: ScenarioConfig) -> float:
    """Cost reduction against not training at all, plus client utilities over all rounds."""
    baseline = config.server.gamma1 * config.learning.theta_gap
    return (baseline - result.cost.total
            + result.strategy.iterations * math.fsum(result.client_utilities))


def _finish(result: RunResult, config: ScenarioConfig) -> RunResult:
    result.social_welfare = social_welfare(result, config)
    return result


def run_mechanism(config: ScenarioConfig, population: Sequence[ClientAttributes],
                  seed: int = 0) -> RunResult:
    """Solve the configured mechanism on ``population``.

    Under incomplete information the server only uses the datasizes and the
    attribute densities; the reported cost is the expected cost, while the
    cohort, utilities and ``realized_cost`` come from the actual population.
    """
    q, lp, sp = config.quality, config.learning, config.server
    if config.info == "complete":
        outcome = solve_mechanism(config.mechanism, population, q, lp, sp)
        cohort = outcome.cohort
        result = RunResult(seed, config.mechanism, config.info, len(population),
                           outcome.strategy, outcome.cost, len(cohort.local_set),
                           len(cohort.aigc_set),
                           client_utilities(config.mechanism, population, q, cohort,
                                            outcome.strategy.reward))
        return _finish(result, config)
    if config.mechanism != "IMFL":
        raise ParameterError("benchmark mechanisms are only defined under complete information")
    strategy, expected = _incomplete_solution(config, tuple(c.datasize for c in population))
    cohort = cmp.cohort_from_reward(population, q, strategy.reward)
    realized = cmp.server_cost(strategy, population, q, lp, sp)
    result = RunResult(seed, "IMFL", "incomplete", len(population), strategy,
                       expected.as_breakdown(), len(cohort.local_set), len(cohort.aigc_set),
                       client_utilities("IMFL", population, q, cohort, strategy.reward),
                       realized_cost=realized)
    return _finish(result, config)


_INCOMPLETE_CACHE: Dict[tuple, tuple] = {}


def _incomplete_solution(config: ScenarioConfig, datasizes: tuple):
    # depends on the population only through the datasizes
    key = (config.dist, config.quality, config.learning, config.server, config.mode,
           config.grid_points, datasizes)
    if key not in _INCOMPLETE_CACHE:
        model = IncompleteModel(config.dist, config.quality, config.learning, config.server,
                                datasizes, config.mode, config.grid_points)
        _INCOMPLETE_CACHE[key] = model.algorithm2()
    return _INCOMPLETE_CACHE[key]


def run_seed(config: ScenarioConfig, seed: int) -> RunResult:
    return run_mechanism(config, sample_population(config, seed), seed)


# --- sweeps ---------------------------------------------------------------------

def with_value(config: ScenarioConfig, var: str, value) -> ScenarioConfig:
    """Copy of ``config`` with one sweep variable changed."""
    name = SWEEP_ALIASES.get(var)
    if name is None:
        raise ParameterError(f"unknown sweep variable {var!r}; expected one of {sorted(SWEEP_ALIASES)}")
    if name == "K":
        return replace(config, K=int(value))
    if name in ("gamma1", "gamma2"):
        return replace(config, server=replace(config.server, **{name: float(value)}))
    return replace(config, quality=replace(config.quality, s_ai=float(value)))


@dataclass(frozen=True)
class SweepRow:
    var: str
    value: float
    result: RunResult


def _cell_job(args):
    config, seed = args
    return run_seed(config, seed)


def sweep(config: ScenarioConfig, var: str, values: Sequence,
          mechanisms: Optional[Sequence[str]] = None, workers: int = 1) -> List[SweepRow]:
    """Run every (value, mechanism, seed) cell; output order never depends on ``workers``."""
    mechanisms = tuple(mechanisms) if mechanisms else (config.mechanism,)
    jobs, labels = [], []
    for value in values:
        cell = with_value(config, var, value)
        for mech in mechanisms:
            mcfg = replace(cell, mechanism=mech)
            for seed in cell.seeds:
                jobs.append((mcfg, seed))
                labels.append(value)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    return [SweepRow(var, v, r) for v, r in zip(labels, results)]


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_to_csv(rows: Sequence, var: Optional[str] = None) -> str:
    """CSV text for a list of ``RunResult`` or ``SweepRow``; floats use ``repr`` for exact round-trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ((var,) if var else ()) + CSV_COLUMNS
    writer.writerow(header)
    for item in rows:
        result = item.result if isinstance(item, SweepRow) else item
        row = result.row()
        prefix = [_fmt(item.value)] if var else []
        writer.writerow(prefix + [_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


SUMMARY_FIELDS = ("T_o", "r_o", "cost_total", "m_loss", "r_total", "n_local", "n_aigc", "welfare")


def summarize(rows: Sequence[SweepRow]) -> List[dict]:
    """Per-cell means and sample standard deviations, in first-seen cell order."""
    cells: Dict[tuple, List[RunResult]] = {}
    for row in rows:
        key = (row.value, row.result.mechanism, row.result.info)
        cells.setdefault(key, []).append(row.result)
    out = []
    for (value, mech, info), results in cells.items():
        entry = {"value": value, "mechanism": mech, "info": info, "n": len(results)}
        for name in SUMMARY_FIELDS:
            data = np.array([float(r.row()[name]) for r in results])
            entry[f"{name}_mean"] = float(data.mean())
            entry[f"{name}_std"] = float(data.std(ddof=1)) if data.size > 1 else 0.0
        out.append(entry)
    return out


def summary_json(rows: Sequence[SweepRow], var: str) -> str:
    return json.dumps({"sweep_var": var, "cells": summarize(rows)}, indent=2, sort_keys=True)
