"""Ground-state Zeeman ladder of 87Rb in a static field (linear Zeeman model).

All frequencies are cyclic and expressed as offsets from the zero-field
hyperfine splitting ``f0`` in MHz. Times are in ms, so sweep rates are MHz/ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    f0: float = 6834.68261          # MHz
    muB_over_h: float = 1.3996245   # MHz/G
    gF2: float = 0.5
    gF1: float = -0.5

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be positive")
        if not self.muB_over_h > 0:
            raise ValueError("muB_over_h must be positive")

    def g_factor(self, f: int) -> float:
        return self.gF2 if f == 2 else self.gF1


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True, order=True)
class HyperfineState:
    f: int
    mf: int

    def __post_init__(self):
        if self.f not in (1, 2):
            raise ValueError(f"F must be 1 or 2, got {self.f}")
        if abs(self.mf) > self.f:
            raise ValueError(f"|mF| must be <= F, got F={self.f}, mF={self.mf}")

    @property
    def label(self) -> str:
        return f"{self.f},{self.mf}"

    @property
    def column(self) -> str:
        return f"p_{self.f}_{self.mf}"

    def __str__(self) -> str:
        return f"|{self.f},{self.mf}>"

    @classmethod
    def parse(cls, text: str) -> "HyperfineState":
        """Parse ``"2,1"`` or ``"|2,1>"``."""
        f, mf = text.strip().strip("|>").split(",")
        return cls(int(f), int(mf))


# Canonical ordering used for every population vector, matrix and CSV column.
STATES: tuple[HyperfineState, ...] = tuple(
    [HyperfineState(2, m) for m in (2, 1, 0, -1, -2)]
    + [HyperfineState(1, m) for m in (1, 0, -1)]
)
N_STATES = len(STATES)
STATE_INDEX: dict[HyperfineState, int] = {s: i for i, s in enumerate(STATES)}
F2_MASK = np.array([s.f == 2 for s in STATES])


def state_index(s: HyperfineState) -> int:
    return STATE_INDEX[s]


def field_aligned(s: HyperfineState, bz: float) -> HyperfineState:
    """Map a state label quoted relative to the local field direction onto lab-z labels.

    For bz < 0 the quantization axis points along -z, so the stretched state the
    experiment prepares as |2,2> is |2,-2> in lab labels.
    """
    return HyperfineState(s.f, -s.mf) if bz < 0 else s


@dataclass(frozen=True)
class Transition:
    upper: HyperfineState
    lower: HyperfineState
    rabi: float = 5.0  # kHz, cyclic

    def __post_init__(self):
        if self.upper.f != 2 or self.lower.f != 1:
            raise ValueError("transition must couple an F=2 upper to an F=1 lower state")
        if abs(self.upper.mf - self.lower.mf) > 1:
            raise ValueError("|delta m| must be <= 1")
        if self.rabi < 0:
            raise ValueError("rabi frequency must be non-negative")

    @property
    def shift_index(self) -> int:
        return self.upper.mf + self.lower.mf

    @property
    def delta_m(self) -> int:
        return self.upper.mf - self.lower.mf

    @property
    def key(self) -> str:
        return f"{self.upper.label}|{self.lower.label}"

    def involves(self, s: HyperfineState) -> bool:
        return s == self.upper or s == self.lower

    def partner(self, s: HyperfineState) -> HyperfineState:
        if s == self.upper:
            return self.lower
        if s == self.lower:
            return self.upper
        raise ValueError(f"{s} is not part of {self}")

    def __str__(self) -> str:
        return f"{self.upper}<->{self.lower}"


@dataclass(frozen=True)
class FieldScenario:
    bz: float  # gauss

    def __post_init__(self):
        if not np.isfinite(self.bz):
            raise ValueError("bz must be finite")


@dataclass(frozen=True)
class SweepProfile:
    """Linear chirp of the drive detuning from f0.

    The sweep starts at the band edge opposite to the sweep direction, so a
    negative rate starts at ``center + span/2`` and ends at ``center - span/2``.
    """

    center: float = 0.0   # MHz
    span: float = 75.0    # MHz
    rate: float = -0.3    # MHz/ms
    t_start: float = 0.0  # ms

    def __post_init__(self):
        if not self.span > 0:
            raise ValueError("span must be positive")
        if self.rate == 0 or not math.isfinite(self.rate):
            raise ValueError("rate must be finite and non-zero")

    @classmethod
    def between(cls, start: float, stop: float, duration: float, t_start: float = 0.0):
        """Sweep from detuning ``start`` to ``stop`` (MHz) in ``duration`` ms."""
        return cls(center=(start + stop) / 2, span=abs(stop - start),
                   rate=(stop - start) / duration, t_start=t_start)

    @property
    def duration(self) -> float:
        return self.span / abs(self.rate)

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def start_detuning(self) -> float:
        return self.center - math.copysign(self.span / 2, self.rate)

    @property
    def end_detuning(self) -> float:
        return self.center + math.copysign(self.span / 2, self.rate)

    @property
    def band(self) -> tuple[float, float]:
        return self.center - self.span / 2, self.center + self.span / 2

    def detuning(self, t):
        """Instantaneous drive detuning from f0 (MHz) at time ``t`` (ms)."""
        return self.start_detuning + self.rate * (t - self.t_start)

    def time_at(self, detuning: float) -> float:
        """Time (ms) at which the drive passes ``detuning``; may lie outside the sweep."""
        return self.t_start + (detuning - self.start_detuning) / self.rate


def zeeman_shift(s: HyperfineState, b: FieldScenario,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return constants.g_factor(s.f) * s.mf * constants.muB_over_h * b.bz


def transition_detuning(t: Transition, b: FieldScenario,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Resonance of ``t`` relative to f0, MHz."""
    return zeeman_shift(t.upper, b, constants) - zeeman_shift(t.lower, b, constants)


def allowed_transitions(rabi: float = 5.0,
                        overrides: Mapping[str, float] | None = None) -> list[Transition]:
    """All nine F=2 <-> F=1 couplings with |delta m| <= 1.

    Ordered by shift index (descending), ties broken by the upper m_F (descending).
    ``overrides`` maps transition keys such as ``"2,2|1,1"`` to a Rabi frequency in kHz.
    """
    overrides = dict(overrides or {})
    out = []
    for m2 in range(2, -3, -1):
        for m1 in range(1, -2, -1):
            if abs(m2 - m1) <= 1:
                out.append(Transition(HyperfineState(2, m2), HyperfineState(1, m1), rabi))
    out.sort(key=lambda tr: (-tr.shift_index, -tr.upper.mf))
    keys = {tr.key for tr in out}
    unknown = set(overrides) - keys
    if unknown:
        raise ValueError(f"unknown transition keys in overrides: {sorted(unknown)}")
    return [replace(tr, rabi=float(overrides[tr.key])) if tr.key in overrides else tr
            for tr in out]


def crossing_schedule(sweep: SweepProfile, b: FieldScenario,
                      transitions: list[Transition] | None = None,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS
                      ) -> list[tuple[float, Transition]]:
    """Times at which the drive passes each in-band resonance, ascending.

    Degenerate crossings keep the canonical transition order (stable sort).
    """
    if transitions is None:
        transitions = allowed_transitions()
    lo, hi = sweep.band
    out = []
    for tr in transitions:
        d = transition_detuning(tr, b, constants)
        if lo <= d <= hi:
            out.append((sweep.time_at(d), tr))
    out.sort(key=lambda item: item[0])
    return out


def ladder_path(initial: HyperfineState, sweep: SweepProfile, b: FieldScenario,
                transitions: list[Transition] | None = None,
                constants: PhysicalConstants = DEFAULT_CONSTANTS
                ) -> list[tuple[Transition, HyperfineState]]:
    """Fully adiabatic sequence of population-carrying crossings starting from ``initial``."""
    current = initial
    path = []
    for _, tr in crossing_schedule(sweep, b, transitions, constants):
        if tr.involves(current):
            current = tr.partner(current)
            path.append((tr, current))
    return path
