"""JSON run configuration: sections ``model``, ``solver``, ``simulation``, ``sweep``.

Every section is optional at parse time; unknown keys anywhere are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .model import ABM, OU, ModelParams
from .simulator import SCENARIOS, SimConfig
from .solver import SolverConfig
from .sweep import AXES, SweepSpec


class ConfigError(ValueError):
    pass


_MODEL_KEYS = {"rho", "diffusion", "alpha", "eta", "sigma", "kappa", "c_neg", "c_pos", "l_cost", "u_cost"}
_SIM_EXTRA = {"scenario", "uncontrolled", "integrand"}
_SWEEP_KEYS = {"axis", "grid", "overlays", "probes", "warm_start"}
_TOP = {"model", "solver", "simulation", "sweep"}


@dataclass(frozen=True)
class SimulationSection:
    config: SimConfig
    scenario: str = "switching"
    uncontrolled: bool = False
    integrand: str = "holding"


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams | None = None
    solver: SolverConfig = SolverConfig()
    simulation: SimulationSection | None = None
    sweep: dict | None = None  # raw; combined with ``model`` by ``sweep_spec``

    def require(self, *sections: str) -> None:
        missing = [s for s in sections if getattr(self, s) is None]
        if missing:
            raise ConfigError(f"config is missing section(s): {', '.join(missing)}")

    def sweep_spec(self) -> SweepSpec:
        self.require("model", "sweep")
        return _sweep(self.sweep, self.model)


def _unknown(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be an object")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(extra)}")


def _real(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"'{section}.{key}' must be a finite number, got {value!r}")
    return float(value)


def parse_model(data: dict) -> ModelParams:
    _unknown("model", data, _MODEL_KEYS)
    kind = data.get("diffusion", "abm")
    if kind == "abm":
        if "eta" in data:
            raise ConfigError("'model.eta' only applies to diffusion 'ou'")
        diffusion = ABM(_real("model", "alpha", data.get("alpha", 0.0)))
    elif kind == "ou":
        if "alpha" in data:
            raise ConfigError("'model.alpha' only applies to diffusion 'abm'")
        if "eta" not in data:
            raise ConfigError("'model.eta' is required for diffusion 'ou'")
        diffusion = OU(_real("model", "eta", data["eta"]))
    else:
        raise ConfigError(f"'model.diffusion' must be 'abm' or 'ou', got {kind!r}")
    required = ["rho", "sigma", "kappa", "c_neg", "c_pos", "l_cost", "u_cost"]
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"'model' is missing: {', '.join(missing)}")
    values = {k: _real("model", k, data[k]) for k in required}
    return ModelParams(diffusion=diffusion, **values)


def _dataclass_section(name, cls, data):
    allowed = {f.name for f in fields(cls)}
    _unknown(name, data, allowed)
    kwargs = {}
    for key in allowed & set(data):
        value = data[key]
        if isinstance(value, bool) or (value is not None and not isinstance(value, (int, float))):
            raise ConfigError(f"'{name}.{key}' must be a number, got {value!r}")
        kwargs[key] = value
    return cls(**kwargs)


def parse_simulation(data: dict) -> SimulationSection:
    cfg = _dataclass_section("simulation", SimConfig, {k: v for k, v in data.items() if k not in _SIM_EXTRA})
    scenario = data.get("scenario", "switching")
    if scenario not in SCENARIOS:
        raise ConfigError(f"'simulation.scenario' must be one of {SCENARIOS}")
    integrand = data.get("integrand", "holding")
    if integrand not in ("holding", "state"):
        raise ConfigError("'simulation.integrand' must be 'holding' or 'state'")
    uncontrolled = data.get("uncontrolled", False)
    if not isinstance(uncontrolled, bool):
        raise ConfigError("'simulation.uncontrolled' must be true or false")
    return SimulationSection(cfg, scenario, uncontrolled, integrand)


def _grid(value):
    if isinstance(value, dict):
        _unknown("sweep.grid", value, {"start", "stop", "num"})
        try:
            return tuple(np.linspace(float(value["start"]), float(value["stop"]), int(value["num"])))
        except KeyError as exc:
            raise ConfigError(f"'sweep.grid' needs start, stop and num (missing {exc})") from None
    if isinstance(value, list):
        return tuple(_real("sweep", "grid", v) for v in value)
    raise ConfigError("'sweep.grid' must be a list or {start, stop, num}")


def _sweep(data: dict, base: ModelParams) -> SweepSpec:
    _unknown("sweep", data, _SWEEP_KEYS)
    if "axis" not in data or "grid" not in data:
        raise ConfigError("'sweep' needs 'axis' and 'grid'")
    overlays = []
    for item in data.get("overlays", []):
        if not (isinstance(item, list) and len(item) == 2 and item[0] in AXES):
            raise ConfigError(f"each overlay must be [parameter, value] with parameter in {AXES}")
        overlays.append((item[0], _real("sweep", "overlays", item[1])))
    probes = data.get("probes")
    if probes is not None:
        probes = _grid(probes)
    try:
        return SweepSpec(base, data["axis"], _grid(data["grid"]), tuple(overlays), probes,
                         bool(data.get("warm_start", True)))
    except ValueError as exc:
        raise ConfigError(f"invalid sweep: {exc}") from None


def parse_config(doc: dict) -> RunConfig:
    _unknown("config", doc, _TOP)
    try:
        model = parse_model(doc["model"]) if "model" in doc else None
        solver = _dataclass_section("solver", SolverConfig, doc["solver"]) if "solver" in doc else SolverConfig()
        simulation = parse_simulation(doc["simulation"]) if "simulation" in doc else None
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:  # raised by the dataclass validators
        raise ConfigError(str(exc)) from None
    sweep = doc.get("sweep")
    if sweep is not None:
        _unknown("sweep", sweep, _SWEEP_KEYS)
    cfg = RunConfig(model, solver, simulation, sweep)
    if sweep is not None and model is not None:
        cfg.sweep_spec()  # validate now
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return parse_config(doc)
