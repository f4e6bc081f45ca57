"""Fit of the probe back-action rate model.

The target is the optical-pumping estimate for two sets of 20 probe pulses on
an ensemble starting in |2,2>, each set followed by an ideal population swap
(|2,2> <-> |1,1>, then |1,1> <-> |2,1>). Run ``python -m arpfb.calibration``
to regenerate the defaults stored in :mod:`arpfb.dynamics`.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from .dynamics import EngineState, PumpModel, apply_probe_pulse
from .zeeman import STATE_INDEX, HyperfineState

S22, S21, S20 = HyperfineState(2, 2), HyperfineState(2, 1), HyperfineState(2, 0)
S11, S10 = HyperfineState(1, 1), HyperfineState(1, 0)

# expected population fractions after both pulse sets
BACKACTION_TARGET: dict[HyperfineState, float] = {
    S21: 0.89,
    S11: 0.055,
    S22: 0.045,
    S20: 0.005,
    S10: 0.005,
}
PULSES_PER_SET = 20


def _swap(state: EngineState, a: HyperfineState, b: HyperfineState) -> EngineState:
    p = state.p.copy()
    ia, ib = STATE_INDEX[a], STATE_INDEX[b]
    p[ia], p[ib] = p[ib], p[ia]
    state.p = p
    return state


def backaction_sequence(pump: PumpModel, pulses: int = PULSES_PER_SET) -> EngineState:
    state = EngineState.pure(S22)
    for swap in ((S22, S11), (S11, S21)):
        for _ in range(pulses):
            state = apply_probe_pulse(state, pump)
        state = _swap(state, *swap)
    return state


def _residuals(x: np.ndarray) -> np.ndarray:
    p = backaction_sequence(PumpModel.adjacent(x[0], x[1])).populations
    return np.array([p[s] - v for s, v in BACKACTION_TARGET.items()])


def fit_pump_model() -> tuple[float, float]:
    """Least-squares (depump_prob, f1_share) against :data:`BACKACTION_TARGET`."""
    fit = least_squares(_residuals, x0=[0.005, 0.5], bounds=([0.0, 0.0], [0.2, 1.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return float(fit.x[0]), float(fit.x[1])


if __name__ == "__main__":
    d, q = fit_pump_model()
    print(f"CALIBRATED_DEPUMP_PROB = {d!r}")
    print(f"CALIBRATED_F1_SHARE = {q!r}")
    final = backaction_sequence(PumpModel.adjacent(d, q)).populations
    for s, target in BACKACTION_TARGET.items():
        print(f"{s}: {100 * final[s]:6.2f} %  (target {100 * target:.1f} %)")
