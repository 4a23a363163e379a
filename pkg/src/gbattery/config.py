"""Run configuration: one canonical JSON tree.

A run is fully described by a JSON object with the sections below; every
omitted field takes the default shown, which matches the reference
parameter set of the simulations (battery mass 1, frequency 2, 150 bath
oscillators, a0 = 1.03, gamma = 1, cutoff 4, beta = 10, protocol
exponent 11).  Unknown keys anywhere in the tree are rejected so typos
fail loudly.

    {
      "model":    {"m0": 1.0, "omega0": 2.0, "n_bath": 150, "a0": 1.03,
                   "gamma": 1.0, "omega_d": 4.0, "beta": 10.0,
                   "tail_match": true, "masses": null},
      "protocol": {"exponent": 11},
      "stepper":  {"dt": null, "refine": false,
                   "sympl_tol": 1e-8, "work_tol": 1e-4},
      "cycle":    {"t_charge": 150.0, "window": 0.2, "sample_count": 400},
      "sweep":    {"scenarios": ["tripartite"],
                   "td_grid": [0.0], "theta_grid": [0.0]},
      "output_dir": "out"
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .cycles import SCENARIOS, CycleConfig
from .evolution import StepperConfig
from .model import ModelSpec


class ConfigError(ValueError):
    """A configuration document failed validation."""


@dataclass(frozen=True)
class SweepGrid:
    scenarios: tuple[str, ...] = ("tripartite",)
    td_grid: tuple[float, ...] = (0.0,)
    theta_grid: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if not self.scenarios or not self.td_grid or not self.theta_grid:
            raise ConfigError("sweep grids must be non-empty")
        for scenario in self.scenarios:
            if scenario not in SCENARIOS:
                raise ConfigError(f"sweep.scenarios: unknown scenario {scenario!r}")
        if any(t < 0 for t in self.td_grid):
            raise ConfigError("sweep.td_grid: entries must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    protocol_exponent: int = 11
    stepper: StepperConfig = field(default_factory=StepperConfig)
    t_charge: float = 150.0
    window: float = 0.2
    sample_count: int = 400
    sweep: SweepGrid = field(default_factory=SweepGrid)
    output_dir: str = "out"

    def cycle_config(self, scenario: str, t_d: float, theta: float = 0.0) -> CycleConfig:
        return CycleConfig(
            scenario=scenario,
            t_d=t_d,
            theta=theta,
            t_charge=self.t_charge,
            window=self.window,
            sample_count=self.sample_count,
        )

    def sweep_cells(self) -> list[CycleConfig]:
        cells = []
        for scenario in self.sweep.scenarios:
            for t_d in self.sweep.td_grid:
                if scenario == "bipartite":
                    for theta in self.sweep.theta_grid:
                        cells.append(self.cycle_config(scenario, t_d, theta))
                else:
                    cells.append(self.cycle_config(scenario, t_d))
        return cells


_MODEL_KEYS = {
    "m0", "omega0", "n_bath", "a0", "gamma", "omega_d", "beta", "tail_match", "masses",
}
_STEPPER_KEYS = {"dt", "refine", "sympl_tol", "work_tol", "max_halvings"}
_CYCLE_KEYS = {"t_charge", "window", "sample_count"}
_SWEEP_KEYS = {"scenarios", "td_grid", "theta_grid"}
_TOP_KEYS = {"model", "protocol", "stepper", "cycle", "sweep", "output_dir"}


def _check_keys(section: dict, allowed: set[str], path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")


def parse_config(text: str) -> RunConfig:
    """Parse and validate the canonical JSON configuration tree.

    Empty or blank input yields the full default configuration.
    Validation failures name the offending field path.
    """
    if not text.strip():
        return RunConfig()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "<root>")

    model_doc = dict(doc.get("model", {}))
    _check_keys(model_doc, _MODEL_KEYS, "model")
    if model_doc.get("masses") is not None:
        model_doc["masses"] = tuple(float(m) for m in model_doc["masses"])
    try:
        model = ModelSpec(**model_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    protocol_doc = dict(doc.get("protocol", {}))
    _check_keys(protocol_doc, {"exponent"}, "protocol")
    exponent = int(protocol_doc.get("exponent", 11))
    if exponent < 1:
        raise ConfigError("protocol.exponent must be a positive integer")

    stepper_doc = dict(doc.get("stepper", {}))
    _check_keys(stepper_doc, _STEPPER_KEYS, "stepper")
    try:
        stepper = StepperConfig(**stepper_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"stepper: {exc}") from exc

    cycle_doc = dict(doc.get("cycle", {}))
    _check_keys(cycle_doc, _CYCLE_KEYS, "cycle")
    t_charge = float(cycle_doc.get("t_charge", 150.0))
    window = float(cycle_doc.get("window", 0.2))
    sample_count = int(cycle_doc.get("sample_count", 400))
    if t_charge <= 0.0:
        raise ConfigError("cycle.t_charge must be positive")
    if not 0.0 < window < 1.0:
        raise ConfigError("cycle.window must lie in (0, 1)")
    if sample_count < 2:
        raise ConfigError("cycle.sample_count must be >= 2")

    sweep_doc = dict(doc.get("sweep", {}))
    _check_keys(sweep_doc, _SWEEP_KEYS, "sweep")
    grid_kwargs = {}
    if "scenarios" in sweep_doc:
        grid_kwargs["scenarios"] = tuple(str(s) for s in sweep_doc["scenarios"])
    if "td_grid" in sweep_doc:
        grid_kwargs["td_grid"] = tuple(float(t) for t in sweep_doc["td_grid"])
    if "theta_grid" in sweep_doc:
        grid_kwargs["theta_grid"] = tuple(float(t) for t in sweep_doc["theta_grid"])
    grid = SweepGrid(**grid_kwargs)

    output_dir = str(doc.get("output_dir", "out"))
    return RunConfig(
        model=model,
        protocol_exponent=exponent,
        stepper=stepper,
        t_charge=t_charge,
        window=window,
        sample_count=sample_count,
        sweep=grid,
        output_dir=output_dir,
    )


def emit_config(cfg: RunConfig) -> str:
    """Serialize a RunConfig back to the canonical JSON tree."""
    doc = {
        "model": {
            "m0": cfg.model.m0,
            "omega0": cfg.model.omega0,
            "n_bath": cfg.model.n_bath,
            "a0": cfg.model.a0,
            "gamma": cfg.model.gamma,
            "omega_d": cfg.model.omega_d,
            "beta": cfg.model.beta,
            "tail_match": cfg.model.tail_match,
            "masses": list(cfg.model.masses) if cfg.model.masses is not None else None,
        },
        "protocol": {"exponent": cfg.protocol_exponent},
        "stepper": {
            "dt": cfg.stepper.dt,
            "refine": cfg.stepper.refine,
            "sympl_tol": cfg.stepper.sympl_tol,
            "work_tol": cfg.stepper.work_tol,
            "max_halvings": cfg.stepper.max_halvings,
        },
        "cycle": {
            "t_charge": cfg.t_charge,
            "window": cfg.window,
            "sample_count": cfg.sample_count,
        },
        "sweep": {
            "scenarios": list(cfg.sweep.scenarios),
            "td_grid": list(cfg.sweep.td_grid),
            "theta_grid": list(cfg.sweep.theta_grid),
        },
        "output_dir": cfg.output_dir,
    }
    return json.dumps(doc, indent=2, sort_keys=True)
