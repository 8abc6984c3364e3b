"""JSON scenario files: parsing, validation and the shipped presets.

A scenario document has five top-level sections::

    {
      "population": {"K": 10, "datasize_range": [30, 30], "s_max": 0.1,
                     "s_density": "UD", "lambda_density": "UD"},
      "quality":    {"lambda_max": 3, "g_data": 2.45, "g_diff": 1.05, "s_ai": 0.8},
      "learning":   {"eta": 0.01, "rho": 37.36, "mu": 5.48, "beta": 0.57, "psi": 25, "h": 5},
      "server":     {"gamma1": 80000, "gamma2": 1},
      "experiment": {"seeds": [0, 1, 2], "info": "incomplete"}
    }

An optional ``meta`` section holds free-form descriptive text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

from .core import QualityModel, ServerParams, derive_learning_constants
from .distributions import AttributeDistribution, make_density
from .errors import ConfigError, MechanismError
from .incomplete import LambdaMode
from .population import ScenarioConfig

SECTIONS = ("population", "quality", "learning", "server", "experiment")
OPTIONAL_SECTIONS = ("meta",)

_KEYS = {
    "population": {"K", "datasize_range", "s_max", "s_density", "lambda_density"},
    "quality": {"lambda_max", "g_data", "g_diff", "s_ai"},
    "learning": {"eta", "rho", "mu", "beta", "psi", "h", "theta_gap"},
    "server": {"gamma1", "gamma2", "omega", "epsilon", "max_T"},
    "experiment": {"seeds", "mechanism", "info", "mode", "grid_points", "sweep",
                   "mc_trials", "mc_rewards", "flsim"},
}
_REQUIRED = {
    "population": {"K", "datasize_range", "s_max"},
    "quality": {"lambda_max", "g_data", "g_diff", "s_ai"},
    "learning": {"eta", "rho", "mu", "beta", "psi"},
    "server": {"gamma1", "gamma2"},
    "experiment": set(),
}


@dataclass
class FlSimSettings:
    dimension: int = 10
    num_clients: int = 5
    T: int = 50
    targets: Optional[List[float]] = None


@dataclass
class ExperimentSettings:
    sweep_var: Optional[str] = None
    sweep_values: List[Any] = field(default_factory=list)
    mc_trials: int = 20_000
    mc_rewards: List[float] = field(default_factory=list)
    flsim: FlSimSettings = field(default_factory=FlSimSettings)


@dataclass
class LoadedConfig:
    scenario: ScenarioConfig
    experiment: ExperimentSettings
    meta: Dict[str, Any]


def _collect(problems, label, build):
    try:
        return build()
    except MechanismError as exc:
        problems.append(f"{label}: {exc}")
    except (TypeError, ValueError, KeyError) as exc:
        problems.append(f"{label}: invalid value ({exc})")
    return None


def parse_config(doc: Dict[str, Any], source: str = "<config>") -> LoadedConfig:
    """Validate a decoded document; every violation is reported in one :class:`ConfigError`."""
    problems: List[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for name in doc:
        if name not in SECTIONS and name not in OPTIONAL_SECTIONS:
            problems.append(f"unknown top-level key {name!r}")
    for name in SECTIONS:
        section = doc.get(name)
        if section is None:
            if name != "experiment":
                problems.append(f"missing section {name!r}")
            continue
        if not isinstance(section, dict):
            problems.append(f"section {name!r} must be an object")
            continue
        for key in section:
            if key not in _KEYS[name]:
                problems.append(f"{name}.{key}: unknown key")
        for key in sorted(_REQUIRED[name] - set(section)):
            problems.append(f"{name}.{key}: required key missing")
    if problems:
        raise ConfigError(f"{source}: {len(problems)} problem(s)", problems)

    pop, qual, learn, serv = (doc[k] for k in ("population", "quality", "learning", "server"))
    exp = doc.get("experiment") or {}

    quality = _collect(problems, "quality", lambda: QualityModel(
        float(qual["lambda_max"]), float(qual["g_data"]), float(qual["g_diff"]),
        float(qual["s_ai"])))
    lam_max = _collect(problems, "quality.lambda_max", lambda: float(qual["lambda_max"]))
    learning = _collect(problems, "learning", lambda: derive_learning_constants(
        float(learn["eta"]), float(learn["rho"]), float(learn["mu"]), float(learn["beta"]),
        float(learn["psi"]), int(learn.get("h", 5)),
        theta_gap=None if learn.get("theta_gap") is None else float(learn["theta_gap"]),
        lambda_max=lam_max))
    server = _collect(problems, "server", lambda: ServerParams(
        float(serv["gamma1"]), float(serv["gamma2"]), float(serv.get("omega", 100.0)),
        float(serv.get("epsilon", 1e-8)), int(serv.get("max_T", 10_000))))
    s_max = _collect(problems, "population.s_max", lambda: float(pop["s_max"]))
    if s_max is None or lam_max is None:
        raise ConfigError(f"{source}: {len(problems)} problem(s)", problems)
    s_dens = _collect(problems, "population.s_density",
                      lambda: make_density(pop.get("s_density", "UD"), s_max))
    l_dens = _collect(problems, "population.lambda_density",
                      lambda: make_density(pop.get("lambda_density", "UD"), lam_max))
    dist = None
    if s_dens is not None and l_dens is not None:
        dist = _collect(problems, "population",
                        lambda: AttributeDistribution(s_max, lam_max, s_dens, l_dens))
    if dist is not None and quality is not None:
        incomplete = exp.get("info", "complete") == "incomplete"
        _collect(problems, "population", lambda: dist.check_against(quality, incomplete))
    mode = _collect(problems, "experiment.mode",
                    lambda: LambdaMode.parse(exp.get("mode", "paper-literal")))

    scenario = None
    if not problems:
        scenario = _collect(problems, "scenario", lambda: ScenarioConfig(
            K=int(pop["K"]), datasize_range=tuple(pop["datasize_range"]), dist=dist,
            quality=quality, learning=learning, server=server,
            seeds=tuple(exp.get("seeds", [0])), mechanism=exp.get("mechanism", "IMFL"),
            info=exp.get("info", "complete"), mode=mode,
            grid_points=int(exp.get("grid_points", 200))))
    if scenario is not None and server is not None:
        lo, hi = scenario.datasize_range
        _collect(problems, "server.omega", lambda: server.check_population([lo, hi]))
    experiment = _collect(problems, "experiment", lambda: _experiment(exp))
    if problems:
        raise ConfigError(f"{source}: {len(problems)} problem(s)", problems)
    return LoadedConfig(scenario, experiment, dict(doc.get("meta") or {}))


def _experiment(exp) -> ExperimentSettings:
    sweep = exp.get("sweep") or {}
    fl = exp.get("flsim") or {}
    targets = fl.get("targets")
    return ExperimentSettings(
        sweep_var=sweep.get("var"), sweep_values=list(sweep.get("values", [])),
        mc_trials=int(exp.get("mc_trials", 20_000)),
        mc_rewards=[float(r) for r in exp.get("mc_rewards", [])],
        flsim=FlSimSettings(int(fl.get("dimension", 10)), int(fl.get("num_clients", 5)),
                            int(fl.get("T", 50)),
                            None if targets is None else [float(t) for t in targets]))


def _read(path) -> tuple:
    p = Path(path)
    if not p.exists():
        preset = preset_path(str(path))
        if preset is None:
            raise ConfigError(f"config file {path} does not exist")
        p = preset
    text = p.read_text()
    try:
        return json.loads(text), str(p)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: JSON parse error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}", [f"line {exc.lineno}: {exc.msg}"]) from exc


def load_config(path) -> LoadedConfig:
    """Load a scenario file; bare preset names such as ``mnist_vd.json`` are also accepted."""
    doc, source = _read(path)
    return parse_config(doc, source)


def load_scenario(path) -> ScenarioConfig:
    return load_config(path).scenario


def preset_names() -> List[str]:
    folder = resources.files("aigc_incentive") / "presets"
    return sorted(p.name for p in folder.iterdir() if p.name.endswith(".json"))


def preset_path(name: str) -> Optional[Path]:
    if not name.endswith(".json"):
        name += ".json"
    if name not in preset_names():
        return None
    return Path(str(resources.files("aigc_incentive") / "presets" / name))
