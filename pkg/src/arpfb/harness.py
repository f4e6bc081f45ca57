"""Scenario orchestration: open/closed-loop runs, Monte Carlo, adiabaticity scans.

Every trial draws its randomness from ``trial_seed_sequence(seed, trial)``, which
spawns independent streams for the field draw and for the probe noise, so a run
is reproducible from (config, seed) alone.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import Setup, resolve_config
from .controller import Action, ControllerState, controller_init, process_sample
from .dynamics import (
    EngineState,
    PopulationVector,
    adiabaticity,
    apply_probe_pulse,
    evolve_lz,
    evolve_ode,
    lz_probability,
)
from .probe import magnitude, pulse_times, synthesize_sample
from .sterngerlach import SGHistogram, absorption_profile, bin_populations
from .zeeman import (
    STATES,
    FieldScenario,
    HyperfineState,
    SweepProfile,
    allowed_transitions,
    crossing_schedule,
    field_aligned,
    transition_detuning,
)

TRACE_COLUMNS = ("t_ms", "delta0_MHz", "I", "Q", "A") + tuple(s.column for s in STATES) + ("lost",)


class Kind(str, enum.Enum):
    STAIRCASE = "STAIRCASE"
    CLOSED_LOOP = "CLOSED_LOOP"
    OPEN_LOOP_STOP = "OPEN_LOOP_STOP"
    MONTE_CARLO = "MONTE_CARLO"
    ADIABATICITY_SCAN = "ADIABATICITY_SCAN"
    STERN_GERLACH = "STERN_GERLACH"

    @classmethod
    def parse(cls, text: str) -> "Kind":
        return cls(text.strip().upper().replace("-", "_"))


@dataclass
class Scenario:
    kind: Kind
    config: dict
    seed: int = 0

    def __post_init__(self):
        self.kind = Kind.parse(self.kind) if isinstance(self.kind, str) else self.kind
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.setup = Setup.from_config(self.config)

    @classmethod
    def build(cls, kind, raw_config: dict | None = None, seed: int = 0) -> "Scenario":
        return cls(kind, resolve_config(raw_config), seed)


@dataclass
class TrialResult:
    trial: int
    bz: float
    trace: list[tuple]
    log: list[dict]
    final: PopulationVector
    stopped: bool
    edge_count: int
    stop_index: int | None = None
    stop_time: float | None = None
    drive_off_time: float | None = None


@dataclass
class RunRecord:
    scenario: str
    seed: int
    config: dict
    field_bz: float
    initial: HyperfineState
    target: HyperfineState
    trace: list[tuple]
    controller_log: list[dict]
    final: PopulationVector
    sg: SGHistogram
    timing: dict
    crossings: list[dict] = field(default_factory=list)
    stopped: bool = False
    edge_count: int = 0

    @property
    def target_lab(self) -> HyperfineState:
        return field_aligned(self.target, self.field_bz)

    @property
    def majority(self) -> HyperfineState:
        """Most populated state, labelled relative to the local field direction."""
        return field_aligned(self.final.majority(), self.field_bz)

    @property
    def purity(self) -> float:
        return self.final[self.target_lab]

    @property
    def success(self) -> bool:
        return self.majority == self.target

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "field_bz": self.field_bz,
            "stopped": self.stopped,
            "edge_count": self.edge_count,
            "stop_time_ms": self.timing.get("stop_time_ms"),
            "majority_state": self.majority.label,
            "target": self.target.label,
            "purity": self.purity,
            "lost": self.final.lost,
        }

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "config": self.config,
            "field_bz": self.field_bz,
            "initial": self.initial.label,
            "target": self.target.label,
            "frame_note": "state labels in the record are lab-z; initial/target/majority "
                          "are quoted relative to the field direction",
            "crossings": self.crossings,
            "timing": self.timing,
            "stopped": self.stopped,
            "edge_count": self.edge_count,
            "controller_log": self.controller_log,
            "final_populations": self.final.as_dict(),
            "majority_state": self.majority.label,
            "purity": self.purity,
            "sg_histogram": {"bins": [b.as_dict() for b in self.sg.bins],
                             "lost": self.sg.lost, "hidden": self.sg.hidden},
            "trace_columns": list(TRACE_COLUMNS),
            "trace": [list(r) for r in self.trace],
        }


def trial_seed_sequence(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(trial,))


def draw_field(setup: Setup, rng: np.random.Generator) -> float:
    """|B| uniform on the configured range with an optional random sign."""
    lo, hi = setup.bz_range
    magnitude_ = float(rng.uniform(lo, hi))
    sign = -1.0 if setup.random_sign and rng.random() < 0.5 else 1.0
    return sign * magnitude_


def _advance(state: EngineState, setup: Setup, b: FieldScenario, to_time: float) -> EngineState:
    if setup.engine == "lz":
        return evolve_lz(state, setup.sweep, b, to_time, list(setup.transitions),
                         setup.constants)
    return evolve_ode(state, setup.sweep, b, to_time, setup.rel_tol, list(setup.transitions),
                      setup.constants, coupling_window=setup.ode_window)


def simulate_trial(setup: Setup, seed: int, trial: int = 0, feedback: bool = True,
                   bz: float | None = None, stop_time: float | None = None,
                   probe_after_stop: bool = True, stop_latency: float = 0.0) -> TrialResult:
    """One sweep with probe pulses; optionally closed through the controller.

    Open loop: the drive is switched off at ``stop_time`` (if given) and pulses
    continue unless ``probe_after_stop`` is false. Closed loop: STOP switches the
    drive off ``stop_latency`` after the triggering pulse and ends probing.
    """
    field_ss, noise_ss = trial_seed_sequence(seed, trial).spawn(2)
    if bz is None:
        bz = setup.bz if setup.bz is not None else draw_field(setup, np.random.default_rng(field_ss))
    b = FieldScenario(bz)
    rng = np.random.default_rng(noise_ss)
    sweep = setup.sweep
    initial = field_aligned(setup.initial, bz)
    state = EngineState.pure(initial, t=sweep.t_start, coherent=setup.engine == "ode",
                             rng_stream=trial)

    off_time = stop_time
    ctrl: ControllerState | None = None
    stop_index = stop_t = None
    trace = []
    for k, t in enumerate(pulse_times(setup.probe, sweep.t_start, sweep.t_end)):
        if off_time is not None and state.drive_on and off_time <= t:
            state = _advance(state, setup, b, off_time).switch_off()
        state = _advance(state, setup, b, t)
        pops = state.populations
        f2 = min(max(pops.f2_fraction, 0.0), 1.0)
        s = synthesize_sample(t, f2, pops.lost, setup.probe, rng)
        trace.append((t, sweep.detuning(t), s.i, s.q, magnitude(s), *map(float, pops.p),
                      float(pops.lost)))
        action = Action.NONE
        if feedback:
            if ctrl is None:
                ctrl = controller_init(setup.controller, s)
            else:
                ctrl, action = process_sample(ctrl, setup.controller, s)
        state = apply_probe_pulse(state, setup.pump)
        if action is Action.STOP:
            stop_index, stop_t = k, t
            off_time = t + stop_latency
            break
        if not probe_after_stop and off_time is not None and off_time <= t:
            break

    if off_time is not None and state.drive_on and off_time <= sweep.t_end:
        state = _advance(state, setup, b, max(off_time, state.t)).switch_off()
    state = _advance(state, setup, b, sweep.t_end)
    return TrialResult(
        trial=trial,
        bz=bz,
        trace=trace,
        log=[e.as_dict() for e in ctrl.log] if ctrl else [],
        final=state.populations,
        stopped=bool(ctrl and ctrl.stopped),
        edge_count=ctrl.edge_count if ctrl else 0,
        stop_index=stop_index,
        stop_time=stop_t,
        drive_off_time=off_time if off_time is not None and off_time <= sweep.t_end else None,
    )


def _record(sc: Scenario, res: TrialResult) -> RunRecord:
    setup = sc.setup
    b = FieldScenario(res.bz)
    crossings = [{"t_ms": tc, "delta0_MHz": transition_detuning(tr, b, setup.constants),
                  "transition": tr.key}
                 for tc, tr in crossing_schedule(setup.sweep, b, list(setup.transitions),
                                                 setup.constants)]
    timing = {
        "sweep_start_ms": setup.sweep.t_start,
        "sweep_end_ms": setup.sweep.t_end,
        "n_samples": len(res.trace),
        "stop_index": res.stop_index,
        "stop_time_ms": res.stop_time,
        "stop_detuning_MHz": setup.sweep.detuning(res.stop_time) if res.stop_time is not None
        else None,
        "drive_off_ms": res.drive_off_time,
    }
    return RunRecord(
        scenario=sc.kind.value, seed=sc.seed, config=sc.config, field_bz=res.bz,
        initial=setup.initial, target=setup.target, trace=res.trace,
        controller_log=res.log, final=res.final,
        sg=bin_populations(res.final, setup.sg, setup.constants), timing=timing,
        crossings=crossings, stopped=res.stopped, edge_count=res.edge_count,
    )


def run_closed_loop(sc: Scenario) -> RunRecord:
    if sc.kind not in (Kind.CLOSED_LOOP, Kind.STERN_GERLACH, Kind.MONTE_CARLO):
        raise ValueError(f"run_closed_loop cannot run a {sc.kind.value} scenario")
    res = simulate_trial(sc.setup, sc.seed, 0, feedback=True,
                         stop_latency=sc.setup.stop_latency)
    return _record(sc, res)


def run_open_loop(sc: Scenario) -> RunRecord:
    if sc.kind not in (Kind.STAIRCASE, Kind.OPEN_LOOP_STOP):
        raise ValueError(f"run_open_loop cannot run a {sc.kind.value} scenario")
    setup = sc.setup
    stop_time = None
    if sc.kind is Kind.OPEN_LOOP_STOP:
        if setup.stop_time is not None:
            stop_time = setup.stop_time
        elif setup.stop_detuning is not None:
            stop_time = setup.sweep.time_at(setup.stop_detuning)
        else:
            raise ValueError("OPEN_LOOP_STOP needs run.stop_time_ms or run.stop_detuning_mhz")
    res = simulate_trial(setup, sc.seed, 0, feedback=False, stop_time=stop_time,
                         probe_after_stop=setup.probe_after_stop)
    return _record(sc, res)


def _mc_trial(args) -> dict:
    config, seed, trial = args
    setup = Setup.from_config(config)
    res = simulate_trial(setup, seed, trial, feedback=True, stop_latency=setup.stop_latency)
    majority = field_aligned(res.final.majority(), res.bz)
    exact = res.stopped and res.edge_count == setup.controller.target_edges
    return {
        "trial": trial,
        "bz": res.bz,
        "stopped": res.stopped,
        "edge_count": res.edge_count,
        "stop_time_ms": res.stop_time,
        "majority_state": majority.label,
        "purity": res.final[field_aligned(setup.target, res.bz)],
        "lost": res.final.lost,
        "success": bool(exact and majority == setup.target),
    }


def _stats(values: list[float]) -> dict | None:
    if not values:
        return None
    a = np.asarray(values, dtype=float)
    q = np.quantile(a, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {"n": int(a.size), "mean": float(a.mean()), "std": float(a.std()),
            "min": float(a.min()), "max": float(a.max()),
            "q05": float(q[0]), "q25": float(q[1]), "median": float(q[2]),
            "q75": float(q[3]), "q95": float(q[4])}


def run_monte_carlo(sc: Scenario, trials: int | None = None,
                    workers: int | None = None) -> dict:
    """Closed-loop trials over random fields; returns summary statistics and per-trial rows."""
    if sc.kind is not Kind.MONTE_CARLO:
        raise ValueError(f"run_monte_carlo cannot run a {sc.kind.value} scenario")
    setup = sc.setup
    n = trials if trials is not None else setup.trials
    workers = workers if workers is not None else setup.workers
    # the field is always drawn from the configured range for Monte Carlo
    config = {**sc.config, "field": {**sc.config["field"], "bz": None}}
    jobs = [(config, sc.seed, k) for k in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_mc_trial, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        rows = [_mc_trial(j) for j in jobs]
    rows.sort(key=lambda r: r["trial"])

    majority_counts: dict[str, int] = {}
    for r in rows:
        majority_counts[r["majority_state"]] = majority_counts.get(r["majority_state"], 0) + 1
    successes = sum(r["success"] for r in rows)
    return {
        "scenario": sc.kind.value,
        "seed": sc.seed,
        "trials": n,
        "target": setup.target.label,
        "target_edges": setup.controller.target_edges,
        "successes": successes,
        "success_rate": successes / n,
        "stopped_exact": sum(r["stopped"] and r["edge_count"] == setup.controller.target_edges
                             for r in rows),
        "majority_counts": dict(sorted(majority_counts.items())),
        "purity": _stats([r["purity"] for r in rows]),
        "stop_time_ms": _stats([r["stop_time_ms"] for r in rows if r["stop_time_ms"] is not None]),
        "per_trial": rows,
    }


def isolated_crossing(rabi: float, rate: float, bz: float = 10.0, rel_tol: float = 1e-9,
                      half_span: float | None = None) -> PopulationVector:
    """Populations after sweeping |2,2> through the |2,2>-|1,1> resonance alone.

    All other couplings are switched off and the sweep is centred on the
    resonance. The default half-span keeps the drive at least 1 MHz and
    100 Rabi frequencies away from resonance at both ends.
    """
    transitions = allowed_transitions(rabi=0.0, overrides={"2,2|1,1": rabi})
    b = FieldScenario(bz)
    d = transition_detuning(transitions[0], b)
    if half_span is None:
        half_span = max(1.0, 100.0 * rabi * 1e-3)
    sweep = SweepProfile(center=d, span=2 * half_span, rate=rate)
    state = EngineState.pure(HyperfineState(2, 2), t=sweep.t_start, coherent=True)
    return evolve_ode(state, sweep, b, sweep.t_end, rel_tol, transitions).populations


def isolated_crossing_efficiency(rabi: float, rate: float, bz: float = 10.0,
                                 rel_tol: float = 1e-9, half_span: float | None = None) -> float:
    """Transfer |2,2> -> |1,1> through that crossing alone, with the coherent engine."""
    if rabi == 0:
        return 0.0
    return isolated_crossing(rabi, rate, bz, rel_tol, half_span)[HyperfineState(1, 1)]


def run_adiabaticity_scan(sc: Scenario) -> list[dict]:
    """Single-crossing efficiency from both engines over a (Rabi, rate) grid."""
    if sc.kind is not Kind.ADIABATICITY_SCAN:
        raise ValueError(f"run_adiabaticity_scan cannot run a {sc.kind.value} scenario")
    scan = sc.config["scan"]
    rabis = sorted(scan["rabi_khz"])
    if scan["include_zero"]:
        rabis = [0.0] + rabis
    rows = []
    for rate in scan["rates"]:
        for rabi in rabis:
            p_lz = lz_probability(rabi, rate)
            p_ode = isolated_crossing_efficiency(rabi, rate, scan["bz"], scan["rel_tol"]) \
                if scan["ode"] else None
            rows.append({
                "rabi_khz": rabi,
                "rate_MHz_per_ms": rate,
                "gamma": adiabaticity(rabi, rate),
                "p_lz": p_lz,
                "p_ode": p_ode,
                "abs_diff": None if p_ode is None else abs(p_ode - p_lz),
            })
    return rows


def stern_gerlach_readout(record: RunRecord, setup: Setup) -> dict:
    y, profile = absorption_profile(record.sg, setup.sg, n_points=setup.sg_points)
    return {"y_mm": y, "profile": profile}


def run(sc: Scenario, trials: int | None = None, workers: int | None = None) -> Any:
    """Dispatch on the scenario kind."""
    if sc.kind is Kind.MONTE_CARLO:
        return run_monte_carlo(sc, trials, workers)
    if sc.kind is Kind.ADIABATICITY_SCAN:
        return run_adiabaticity_scan(sc)
    if sc.kind in (Kind.STAIRCASE, Kind.OPEN_LOOP_STOP):
        return run_open_loop(sc)
    return run_closed_loop(sc)
