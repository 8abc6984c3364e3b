"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numeric error.  Failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import validation
from .config import LoadedConfig, load_config
from .errors import AssumptionError, ConfigError, MechanismError, NumericError
from .fl_sim import bound_check, build_federation, run_rounds
from .incomplete import (IncompleteModel, LambdaMode, classify_case, expected_z,
                         monte_carlo_cost, monte_carlo_eq, participation_probability)
from .population import (MECHANISMS, results_to_csv, run_seed, sample_population, summary_json,
                         sweep)

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("complete", "incomplete", "montecarlo", "benchmark", "sweep", "flsim", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aigc-incentive",
        description="Incentive mechanism for federated learning with generated training data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="scenario JSON file or preset name")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--mode", choices=[m.value for m in LambdaMode],
                       help="normalisation of the expected quality term")
        if name == "sweep":
            p.add_argument("--var", help="sweep variable: K, gamma1, gamma2 or s_ai")
            p.add_argument("--values", help="comma-separated sweep values")
        if name == "montecarlo":
            p.add_argument("--trials", type=int, help="Monte-Carlo trials per reward")
        if name == "validate":
            p.add_argument("--quick", action="store_true", help="reduced sample counts")
    return parser


def _fail(kind: str, message: str, code: int, problems: Optional[List[str]] = None) -> int:
    payload = {"error": kind, "message": message}
    if problems:
        payload["problems"] = problems
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load(args) -> LoadedConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    loaded = load_config(args.config)
    scenario = loaded.scenario
    if args.seed is not None:
        scenario = replace(scenario, seeds=(args.seed,))
    if args.mode:
        scenario = replace(scenario, mode=LambdaMode.parse(args.mode))
    loaded.scenario = scenario
    return loaded


def _write(out_dir: Path, stem: str, fmt: str, csv_text: str, records) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        path.write_text(csv_text)
    else:
        path = out_dir / f"{stem}.json"
        path.write_text(json.dumps(records, indent=2) + "\n")
    return path


def _rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(row[h]) if isinstance(row[h], float) else str(row[h])
                              for h in header))
    return "\n".join(lines) + "\n"


def cmd_runs(args, info: str) -> int:
    loaded = _load(args)
    scenario = replace(loaded.scenario, info=info, mechanism="IMFL")
    results = [run_seed(scenario, s) for s in scenario.seeds]
    records = [r.row() for r in results]
    if info == "incomplete":
        mc_trials = min(loaded.experiment.mc_trials, 20_000)
        for rec, res in zip(records, results):
            d = [c.datasize for c in sample_population(scenario, res.seed)]
            rec["realized_cost"] = res.realized_cost.total
            mc = monte_carlo_cost(res.strategy.iterations, res.strategy.reward, scenario.dist,
                                  scenario.quality, scenario.learning, scenario.server, d,
                                  mc_trials, seed=res.seed)
            rec["mc_cost_mean"], rec["mc_cost_se"] = mc.mean, mc.std_error
            for mode in LambdaMode:
                model = IncompleteModel(scenario.dist, scenario.quality, scenario.learning,
                                        scenario.server, d, mode, grid_points=2)
                rec[f"expected_cost_{mode.value}"] = model.expected_cost(
                    res.strategy.iterations, res.strategy.reward).total
    header = list(records[0])
    path = _write(Path(args.out), info, args.format, _rows_to_csv(header, records), records)
    for rec in records:
        print(f"seed={rec['seed']} T_o={rec['T_o']} r_o={rec['r_o']:.6g} cost={rec['cost_total']:.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    sc.dist.check_against(sc.quality)
    trials = args.trials or loaded.experiment.mc_trials
    rewards = loaded.experiment.mc_rewards or [0.5 * sc.dist.s_max, sc.dist.s_max, sc.quality.zeta3]
    records = []
    for seed in sc.seeds:
        d = [c.datasize for c in sample_population(sc, seed)]
        for j, r in enumerate(rewards):
            region = classify_case(r, sc.dist, sc.quality)
            p = participation_probability(region, sc.dist)
            z = expected_z(r, p, d, sc.server)
            mc = monte_carlo_eq(r, sc.dist, sc.quality, d, sc.server, trials,
                                seed=seed * 1000 + j)
            records.append({"seed": seed, "r": float(r), "case": region.case_id, "p": p,
                            "expected_z": z, "mc_mean": mc.mean, "mc_std_error": mc.std_error,
                            "abs_diff": abs(z - mc.mean)})
    header = list(records[0])
    path = _write(Path(args.out), "montecarlo", args.format, _rows_to_csv(header, records), records)
    for rec in records:
        print(f"r={rec['r']:.4g} case {rec['case']}: E(Z)={rec['expected_z']:.6g} "
              f"MC={rec['mc_mean']:.6g} +/- {rec['mc_std_error']:.2g}")
    print(f"wrote {path}")
    return EXIT_OK


def _sweep_output(args, rows, var, stem) -> int:
    out = Path(args.out)
    records = [dict({var: r.value}, **r.result.row()) for r in rows]
    path = _write(out, stem, args.format, results_to_csv(rows, var), records)
    summary = out / f"{stem}_summary.json"
    summary.write_text(summary_json(rows, var) + "\n")
    print(f"wrote {path} and {summary}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    sc = replace(_load(args).scenario, info="complete")
    rows = sweep(sc, "K", [sc.K], mechanisms=MECHANISMS, workers=args.threads)
    for row in rows:
        r = row.result
        print(f"seed={r.seed} {r.mechanism:5s} cost={r.cost.total:.6g} welfare={r.social_welfare:.6g}")
    return _sweep_output(args, rows, "K", "benchmark")


def cmd_sweep(args) -> int:
    loaded = _load(args)
    var = args.var or loaded.experiment.sweep_var
    if args.values:
        cast = int if var in ("K", "k") else float
        values = [cast(v) for v in args.values.split(",")]
    else:
        values = loaded.experiment.sweep_values
    if not var or not values:
        raise ConfigError("sweep needs a variable and values (config experiment.sweep or --var/--values)")
    rows = sweep(loaded.scenario, var, values, workers=args.threads)
    return _sweep_output(args, rows, var, "sweep")


def cmd_flsim(args) -> int:
    loaded = _load(args)
    sc, fl = loaded.scenario, loaded.experiment.flsim
    seed = sc.seeds[0]
    if fl.targets is not None:
        targets = fl.targets
        rng = np.random.default_rng(seed)
        lo, hi = sc.datasize_range
        datasizes = rng.integers(lo, hi + 1, size=len(targets))
    else:
        population = sample_population(replace(sc, K=fl.num_clients), seed)
        targets = [c.quality for c in population]
        datasizes = [c.datasize for c in population]
    clients = build_federation(len(targets), fl.dimension, targets, sc.learning, seed,
                               datasizes=datasizes)
    trace = run_rounds(clients, sc.learning, fl.T, seed)
    report = bound_check(trace)
    records = [{"t": t, "gap": float(g), "bound": float(b), "margin": float(b - g)}
               for t, (g, b) in enumerate(zip(trace.gap, trace.bound))]
    path = _write(Path(args.out), "trace", args.format, trace.to_csv(), records)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: max(gap - bound) = {report.max_violation:.3g} at t={report.worst_t}; "
          f"beta_eff={trace.beta_eff:.4g}, Lambda={trace.lambda_bar:.4g}")
    print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_validate(args) -> int:
    results = validation.run_all(quick=args.quick)
    for res in results:
        print(res.line())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
    (out / "validate.json").write_text(json.dumps(payload, indent=2) + "\n")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_VALIDATION


def execute(args) -> int:
    try:
        if args.command == "complete":
            return cmd_runs(args, "complete")
        if args.command == "incomplete":
            return cmd_runs(args, "incomplete")
        handler = {"montecarlo": cmd_montecarlo, "benchmark": cmd_benchmark, "sweep": cmd_sweep,
                   "flsim": cmd_flsim, "validate": cmd_validate}[args.command]
        return handler(args)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG, exc.problems)
    except (NumericError, AssumptionError) as exc:
        return _fail("numeric", str(exc), EXIT_NUMERIC)
    except MechanismError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_CONFIG)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
