"""JSON configuration: defaults, schema validation and construction of typed objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .controller import ControllerConfig, expected_edges
from .dynamics import PumpModel
from .probe import ProbeConfig
from .sterngerlach import RB87_MASS, SGConfig
from .zeeman import (
    FieldScenario,
    HyperfineState,
    PhysicalConstants,
    SweepProfile,
    Transition,
    allowed_transitions,
    field_aligned,
    ladder_path,
)


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "constants": {"f0": 6834.68261, "muB_over_h": 1.3996245, "gF2": 0.5, "gF1": -0.5},
    "field": {"bz": None, "range": [4.5, 14.5], "random_sign": True},
    "sweep": {"center": 0.0, "span": 75.0, "rate": -0.3, "t_start": 0.0},
    "probe": {"pulse_period": 2.5, "pulse_duration": 500.0, "gain": 1.0, "offset0": 0.05,
              "offset_growth": 0.5, "demod_phase": 0.6, "noise_sigma": 0.03},
    "controller": {"target_edges": None, "threshold_fraction": 0.5, "debounce": 1,
                   "initial_min": 0.0},
    "dynamics": {"engine": "lz", "rabi_khz": 5.0, "rabi_overrides": {}, "rel_tol": 1e-9,
                 "ode_window_mhz": 1.0},
    "pump": {"calibrated": True, "depump_prob": 0.0, "f1_share": 0.5, "loss_prob": 0.0},
    "run": {"initial": "2,2", "target": "2,1", "trials": 500, "workers": 1,
            "stop_detuning_mhz": None, "stop_time_ms": None, "stop_latency_ms": 0.0,
            "probe_after_stop": True},
    "stern_gerlach": {"gradient": 10.0, "t_grad": 10.0, "t_tof": 20.0, "atom_mass": RB87_MASS,
                      "bin_width": 0.1, "f2_only": False, "n_points": 2001},
    "scan": {"rabi_khz": [2.0, 4.0, 8.0, 16.0], "rates": [-0.3, -1.0], "include_zero": True,
             "ode": True, "bz": 10.0, "rel_tol": 1e-9},
}


def _schema() -> dict:
    text = resources.files("arpfb").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "rabi_overrides":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(raw: dict | None = None) -> dict:
    """Validate ``raw`` against the schema and fill in defaults."""
    raw = {} if raw is None else raw
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    try:
        Setup.from_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return resolve_config({})
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(raw)


@dataclass(frozen=True)
class Setup:
    """Typed view of a resolved config."""

    constants: PhysicalConstants
    sweep: SweepProfile
    probe: ProbeConfig
    controller: ControllerConfig
    transitions: tuple[Transition, ...]
    pump: PumpModel
    sg: SGConfig
    engine: str
    rel_tol: float
    ode_window: float | None
    initial: HyperfineState
    target: HyperfineState
    bz: float | None
    bz_range: tuple[float, float]
    random_sign: bool
    stop_detuning: float | None
    stop_time: float | None
    stop_latency: float
    probe_after_stop: bool
    trials: int
    workers: int
    sg_points: int

    @classmethod
    def from_config(cls, cfg: dict) -> "Setup":
        constants = PhysicalConstants(**cfg["constants"])
        sweep = SweepProfile(**cfg["sweep"])
        dyn, run, fld = cfg["dynamics"], cfg["run"], cfg["field"]
        initial = HyperfineState.parse(run["initial"])
        target = HyperfineState.parse(run["target"])
        lo, hi = fld["range"]
        if lo > hi:
            raise ValueError("field range must be ordered (min, max)")

        ctrl = dict(cfg["controller"])
        if ctrl["target_edges"] is None:
            # edge count is set by the ladder ordering; any in-band field gives the same answer
            ref = FieldScenario(abs(fld["bz"]) if fld["bz"] else 0.5 * (lo + hi))
            path = ladder_path(field_aligned(initial, ref.bz), sweep, ref,
                               constants=constants)
            ctrl["target_edges"] = expected_edges(target, initial, path)
            if ctrl["target_edges"] == 0:
                raise ValueError("target equals the initial state; nothing to drive")

        pump_cfg = cfg["pump"]
        if pump_cfg["calibrated"]:
            pump = PumpModel.calibrated(loss_prob=pump_cfg["loss_prob"])
        else:
            pump = PumpModel.adjacent(pump_cfg["depump_prob"], pump_cfg["f1_share"],
                                      pump_cfg["loss_prob"])
        sg = dict(cfg["stern_gerlach"])
        sg_points = sg.pop("n_points")
        return cls(
            constants=constants,
            sweep=sweep,
            probe=ProbeConfig(**cfg["probe"]),
            controller=ControllerConfig(**ctrl),
            transitions=tuple(allowed_transitions(dyn["rabi_khz"], dyn["rabi_overrides"])),
            pump=pump,
            sg=SGConfig(**sg),
            engine=dyn["engine"],
            rel_tol=dyn["rel_tol"],
            ode_window=dyn["ode_window_mhz"],
            initial=initial,
            target=target,
            bz=fld["bz"],
            bz_range=(lo, hi),
            random_sign=fld["random_sign"],
            stop_detuning=run["stop_detuning_mhz"],
            stop_time=run["stop_time_ms"],
            stop_latency=run["stop_latency_ms"],
            probe_after_stop=run["probe_after_stop"],
            trials=run["trials"],
            workers=run["workers"],
            sg_points=sg_points,
        )
