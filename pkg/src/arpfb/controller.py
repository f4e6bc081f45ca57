"""Edge-counting feedback automaton driving the microwave switch.

The controller sees one demodulated I/Q pair per probe pulse, forms the
magnitude A, and tracks the extrema of A on the current plateau. A plateau
ends when A crosses the midpoint between the tracked extrema (for the default
``threshold_fraction`` of 0.5) for ``debounce`` consecutive samples. Edges
alternate falling/rising because the ensemble starts in the probe-visible
F=2 manifold and each crossing swaps manifolds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .probe import IQSample, magnitude
from .zeeman import HyperfineState


class Phase(str, enum.Enum):
    HIGH = "HIGH"
    LOW = "LOW"


class Edge(str, enum.Enum):
    FALLING = "FALLING"
    RISING = "RISING"


class Action(str, enum.Enum):
    NONE = "NONE"
    STOP = "STOP"


class ControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    target_edges: int = 2
    threshold_fraction: float = 0.5
    debounce: int = 1
    initial_min: float = 0.0

    def __post_init__(self):
        if self.target_edges < 1:
            raise ValueError("target_edges must be >= 1")
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ValueError("threshold_fraction must lie in (0, 1)")
        if self.debounce < 1:
            raise ValueError("debounce must be >= 1")


@dataclass(frozen=True)
class EdgeEvent:
    index: int
    t: float
    direction: Edge
    a: float
    ref_min: float
    ref_max: float
    threshold: float

    def as_dict(self) -> dict:
        return {"index": self.index, "t_ms": self.t, "direction": self.direction.value,
                "A": self.a, "ref_min": self.ref_min, "ref_max": self.ref_max,
                "threshold": self.threshold}


@dataclass(frozen=True)
class ControllerState:
    ref_max: float
    ref_min: float
    phase: Phase = Phase.HIGH
    edge_count: int = 0
    pending: int = 0
    stopped: bool = False
    n_samples: int = 1
    log: tuple[EdgeEvent, ...] = field(default_factory=tuple)

    def threshold(self, cfg: ControllerConfig) -> float:
        return self.ref_min + cfg.threshold_fraction * (self.ref_max - self.ref_min)


def controller_init(cfg: ControllerConfig, first_sample: IQSample) -> ControllerState:
    """Seed the extrema: the first magnitude is the maximum, ``initial_min`` the minimum."""
    a0 = magnitude(first_sample)
    return ControllerState(ref_max=max(a0, cfg.initial_min), ref_min=cfg.initial_min)


def process_sample(state: ControllerState, cfg: ControllerConfig,
                   s: IQSample) -> tuple[ControllerState, Action]:
    if state.stopped:
        raise ControllerError("sample received after STOP")
    index = state.n_samples
    a = magnitude(s)
    thr = state.threshold(cfg)
    ref_max, ref_min, pending = state.ref_max, state.ref_min, state.pending

    if state.phase is Phase.HIGH:
        if a < thr:
            pending += 1
        else:
            pending = 0
            ref_max = max(ref_max, a)
    else:
        if a > thr:
            pending += 1
        else:
            pending = 0
            ref_min = min(ref_min, a)

    if pending < cfg.debounce:
        return replace(state, ref_max=ref_max, ref_min=ref_min, pending=pending,
                       n_samples=index + 1), Action.NONE

    if state.phase is Phase.HIGH:
        direction, phase, ref_min = Edge.FALLING, Phase.LOW, a
    else:
        direction, phase, ref_max = Edge.RISING, Phase.HIGH, a
    event = EdgeEvent(index, s.t, direction, a, state.ref_min, state.ref_max, thr)
    count = state.edge_count + 1
    stopped = count == cfg.target_edges
    new = ControllerState(ref_max=ref_max, ref_min=ref_min, phase=phase, edge_count=count,
                          pending=0, stopped=stopped, n_samples=index + 1,
                          log=state.log + (event,))
    return new, Action.STOP if stopped else Action.NONE


def expected_edges(target: HyperfineState, initial: HyperfineState, path) -> int:
    """Number of crossings along ``path`` (from ``ladder_path``) needed to reach ``target``."""
    if target == initial:
        return 0
    for k, (_, reached) in enumerate(path, start=1):
        if reached == target:
            return k
    raise ValueError(f"{target} is not reachable from {initial} along this sweep")
