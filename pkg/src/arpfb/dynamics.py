"""Population dynamics under the swept microwave drive.

Two engines share one :class:`EngineState`:

* ``evolve_lz`` treats every resonance as an instantaneous Landau-Zener
  crossing acting on classical populations.
* ``evolve_ode`` integrates the Schrodinger equation for the eight amplitudes
  in the frame rotating with the drive phase. It is the coherent oracle for
  the LZ engine.

Unit convention: stored frequencies are cyclic (MHz for detunings, kHz for Rabi
frequencies) and times are in ms. Angular quantities only appear inside the
formulas below, where 1 kHz cyclic = 2*pi rad/ms and 1 MHz = 2*pi*1e3 rad/ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import ode

from .zeeman import (
    DEFAULT_CONSTANTS,
    F2_MASK,
    N_STATES,
    STATE_INDEX,
    STATES,
    FieldScenario,
    HyperfineState,
    PhysicalConstants,
    SweepProfile,
    Transition,
    allowed_transitions,
    crossing_schedule,
    transition_detuning,
    zeeman_shift,
)

TWO_PI = 2.0 * math.pi
MHZ_TO_RAD_PER_MS = TWO_PI * 1e3
KHZ_TO_RAD_PER_MS = TWO_PI


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t!r} ms)")
        self.t = t


@dataclass
class PopulationVector:
    p: np.ndarray
    lost: float = 0.0

    def __getitem__(self, s: HyperfineState) -> float:
        return float(self.p[STATE_INDEX[s]])

    @property
    def total(self) -> float:
        return float(self.p.sum()) + self.lost

    @property
    def f2_fraction(self) -> float:
        return float(self.p[F2_MASK].sum())

    def majority(self) -> HyperfineState:
        return STATES[int(np.argmax(self.p))]

    def check(self, tol: float = 1e-9):
        if np.any(self.p < -tol) or self.lost < -tol:
            raise ValueError("negative population")
        if abs(self.total - 1.0) > tol:
            raise ValueError(f"populations sum to {self.total!r}, expected 1")

    def as_dict(self) -> dict[str, float]:
        out = {s.label: float(v) for s, v in zip(STATES, self.p)}
        out["lost"] = float(self.lost)
        return out


@dataclass
class EngineState:
    """Time, state representation and drive switch of one trial.

    Exactly one of ``p`` (populations) or ``amp`` (rotating-frame amplitudes)
    is the live representation; ``amp is None`` selects the population engine.
    """

    t: float
    p: np.ndarray | None = None
    amp: np.ndarray | None = None
    lost: float = 0.0
    drive_on: bool = True
    rng_stream: int | None = None

    @classmethod
    def pure(cls, s: HyperfineState, t: float = 0.0, coherent: bool = False,
             rng_stream: int | None = None) -> "EngineState":
        if coherent:
            amp = np.zeros(N_STATES, dtype=complex)
            amp[STATE_INDEX[s]] = 1.0
            return cls(t=t, amp=amp, rng_stream=rng_stream)
        p = np.zeros(N_STATES)
        p[STATE_INDEX[s]] = 1.0
        return cls(t=t, p=p, rng_stream=rng_stream)

    @property
    def coherent(self) -> bool:
        return self.amp is not None

    @property
    def populations(self) -> PopulationVector:
        if self.amp is not None:
            return PopulationVector(np.abs(self.amp) ** 2, self.lost)
        return PopulationVector(self.p.copy(), self.lost)

    def switch_off(self) -> "EngineState":
        return replace(self, drive_on=False)


def adiabaticity(rabi: float, sweep_rate: float) -> float:
    """Gamma = Omega^2 / |d(Delta omega)/dt| with both quantities angular.

    ``rabi`` in kHz, ``sweep_rate`` in MHz/ms.
    """
    if sweep_rate == 0:
        raise ValueError("sweep rate must be non-zero")
    omega = KHZ_TO_RAD_PER_MS * rabi
    return omega * omega / (MHZ_TO_RAD_PER_MS * abs(sweep_rate))


def rabi_for_adiabaticity(gamma: float, sweep_rate: float) -> float:
    """Inverse of :func:`adiabaticity`: the Rabi frequency (kHz) giving ``gamma``."""
    return math.sqrt(gamma * MHZ_TO_RAD_PER_MS * abs(sweep_rate)) / KHZ_TO_RAD_PER_MS


def lz_probability(rabi: float, sweep_rate: float) -> float:
    """Adiabatic transfer probability of one isolated crossing.

    P = 1 - exp(-pi * Omega^2 / (2 * alpha)), Omega = 2*pi*rabi and alpha the
    angular sweep rate of the drive.
    """
    if sweep_rate == 0:
        raise ValueError("sweep rate must be non-zero")
    if rabi < 0:
        raise ValueError("rabi frequency must be non-negative")
    return -math.expm1(-math.pi * adiabaticity(rabi, sweep_rate) / 2.0)


def evolve_lz(state: EngineState, sweep: SweepProfile, b: FieldScenario, to_time: float,
              transitions: list[Transition] | None = None,
              constants: PhysicalConstants = DEFAULT_CONSTANTS) -> EngineState:
    if state.amp is not None:
        raise TypeError("evolve_lz needs a population state")
    if to_time < state.t:
        raise ValueError("cannot evolve backwards in time")
    p = state.p.copy()
    if state.drive_on:
        for tc, tr in crossing_schedule(sweep, b, transitions, constants):
            if not state.t < tc <= to_time:
                continue
            prob = lz_probability(tr.rabi, sweep.rate)
            iu, il = STATE_INDEX[tr.upper], STATE_INDEX[tr.lower]
            pu, pl = p[iu], p[il]
            p[iu] = (1.0 - prob) * pu + prob * pl
            p[il] = (1.0 - prob) * pl + prob * pu
    return replace(state, t=to_time, p=p)


def build_rotating_hamiltonian(t: float, sweep: SweepProfile, b: FieldScenario,
                               transitions: list[Transition] | None = None,
                               constants: PhysicalConstants = DEFAULT_CONSTANTS
                               ) -> np.ndarray:
    """8x8 Hamiltonian in rad/ms in the frame following the drive phase."""
    if transitions is None:
        transitions = allowed_transitions()
    delta0 = sweep.detuning(t)
    h = np.zeros((N_STATES, N_STATES), dtype=complex)
    for i, s in enumerate(STATES):
        z = zeeman_shift(s, b, constants)
        h[i, i] = MHZ_TO_RAD_PER_MS * (z if s.f == 2 else z + delta0)
    for tr in transitions:
        iu, il = STATE_INDEX[tr.upper], STATE_INDEX[tr.lower]
        h[iu, il] = h[il, iu] = KHZ_TO_RAD_PER_MS * tr.rabi / 2.0
    return h


def _diagonal_phase(tau: float, z: np.ndarray, delta0: float, rate: float) -> np.ndarray:
    # integral of the diagonal of build_rotating_hamiltonian over [t0, t0 + tau]
    theta = MHZ_TO_RAD_PER_MS * z * tau
    f1 = ~F2_MASK
    theta[f1] += MHZ_TO_RAD_PER_MS * (delta0 * tau + 0.5 * rate * tau * tau)
    return theta


def _integrate_block(b: np.ndarray, couplings: list, tau_a: float, tau_b: float,
                     rel_tol: float, t0: float) -> None:
    """Integrate the interaction-picture equations on the states touched by ``couplings``.

    Each coupling is (upper index, lower index, half Rabi, c1, c2) with the pair
    phase c1*tau + c2*tau**2. Updates ``b`` in place.
    """
    idx = sorted({i for c in couplings for i in c[:2]})
    local = {g: k for k, g in enumerate(idx)}
    cpl = [(2 * local[u], 2 * local[l], v, c1, c2) for u, l, v, c1, c2 in couplings]
    n = 2 * len(idx)
    cos, sin = math.cos, math.sin

    def rhs(tau, y):
        out = [0.0] * n
        for ju, jl, v, c1, c2 in cpl:
            ph = (c1 + c2 * tau) * tau
            c, s = cos(ph), sin(ph)
            ur, ui, lr, li = y[ju], y[ju + 1], y[jl], y[jl + 1]
            # d b_u = -i v e^{i ph} b_l ; d b_l = -i v e^{-i ph} b_u
            out[ju] += v * (c * li + s * lr)
            out[ju + 1] -= v * (c * lr - s * li)
            out[jl] += v * (c * ui - s * ur)
            out[jl + 1] -= v * (c * ur + s * ui)
        return out

    y0 = np.empty(n)
    y0[0::2] = b[idx].real
    y0[1::2] = b[idx].imag
    # internal tolerance is a decade tighter so the norm drift stays within 10*rel_tol
    solver = ode(rhs).set_integrator("dop853", rtol=rel_tol / 10, atol=rel_tol * 1e-4,
                                     nsteps=100_000_000)
    solver.set_initial_value(y0, tau_a)
    y = solver.integrate(tau_b)
    if not solver.successful():
        raise IntegrationError(f"dop853 failed with code {solver.get_return_code()}",
                               t0 + solver.t)
    b[idx] = y[0::2] + 1j * y[1::2]


def evolve_ode(state: EngineState, sweep: SweepProfile, b: FieldScenario, to_time: float,
               rel_tol: float = 1e-9, transitions: list[Transition] | None = None,
               constants: PhysicalConstants = DEFAULT_CONSTANTS,
               coupling_window: float | None = None) -> EngineState:
    """Integrate i da/dt = H(t) a from ``state.t`` to ``to_time``.

    The diagonal of H is removed analytically (interaction picture) and the
    remaining couplings are integrated with an adaptive 8th-order Dormand-Prince
    scheme. With ``coupling_window`` (MHz) set, a coupling is only integrated
    while the drive is within that distance of its resonance; outside the window
    its effect is a light shift of order Omega^2/detuning and is dropped.
    """
    if state.amp is None:
        raise TypeError("evolve_ode needs an amplitude state")
    if not 1e-12 <= rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in [1e-12, 1e-6]")
    if to_time < state.t:
        raise ValueError("cannot evolve backwards in time")
    if transitions is None:
        transitions = allowed_transitions()
    t0 = state.t
    tau_end = to_time - t0
    delta0 = sweep.detuning(t0)
    z = np.array([zeeman_shift(s, b, constants) for s in STATES])
    bvec = state.amp.astype(complex).copy()

    if state.drive_on and tau_end > 0:
        couplings = []
        for tr in transitions:
            if tr.rabi <= 0:
                continue
            d_t = transition_detuning(tr, b, constants)
            couplings.append((STATE_INDEX[tr.upper], STATE_INDEX[tr.lower],
                              KHZ_TO_RAD_PER_MS * tr.rabi / 2.0,
                              MHZ_TO_RAD_PER_MS * (d_t - delta0),
                              -0.5 * MHZ_TO_RAD_PER_MS * sweep.rate, d_t))
        edges = {0.0, tau_end}
        if coupling_window is not None:
            for c in couplings:
                for side in (-1.0, 1.0):
                    tau = sweep.time_at(c[5] + side * coupling_window) - t0
                    if 0.0 < tau < tau_end:
                        edges.add(tau)
        edges = sorted(edges)
        for tau_a, tau_b in zip(edges[:-1], edges[1:]):
            mid = sweep.detuning(t0 + 0.5 * (tau_a + tau_b))
            active = [c[:5] for c in couplings
                      if coupling_window is None or abs(c[5] - mid) < coupling_window]
            if active:
                _integrate_block(bvec, active, tau_a, tau_b, rel_tol, t0)

    amp = bvec * np.exp(-1j * _diagonal_phase(tau_end, z, delta0, sweep.rate))
    return replace(state, t=to_time, amp=amp)


def adjacent_branch(f1_share: float) -> np.ndarray:
    """Row-stochastic redistribution of atoms pumped out of each F=2 state.

    An atom leaving |2,m> lands one step closer to m=0: a share ``f1_share`` in
    |1,m-sgn(m)> and the rest in |2,m-sgn(m)>. From |2,0> the F=2 share is split
    evenly between |2,+1> and |2,-1> and the F=1 share goes to |1,0>. Rows of
    F=1 states are identity (the probe does not address F=1).
    """
    if not 0.0 <= f1_share <= 1.0:
        raise ValueError("f1_share must lie in [0, 1]")
    branch = np.zeros((N_STATES, N_STATES))
    for i, s in enumerate(STATES):
        if s.f == 1:
            branch[i, i] = 1.0
            continue
        if s.mf == 0:
            branch[i, STATE_INDEX[HyperfineState(2, 1)]] = (1 - f1_share) / 2
            branch[i, STATE_INDEX[HyperfineState(2, -1)]] = (1 - f1_share) / 2
            branch[i, STATE_INDEX[HyperfineState(1, 0)]] = f1_share
        else:
            m = s.mf - (1 if s.mf > 0 else -1)
            branch[i, STATE_INDEX[HyperfineState(2, m)]] = 1 - f1_share
            branch[i, STATE_INDEX[HyperfineState(1, m)]] += f1_share
    return branch


# Least-squares fit of (depump_prob, f1_share) to the target optical-pumping
# estimate; regenerate with ``arpfb.calibration.fit_pump_model``.
CALIBRATED_DEPUMP_PROB = 0.005955045720252327
CALIBRATED_F1_SHARE = 0.4502667576382928


@dataclass
class PumpModel:
    depump_prob: float = 0.0
    branch: np.ndarray = field(default_factory=lambda: np.eye(N_STATES))
    loss_prob: float = 0.0

    def __post_init__(self):
        self.branch = np.asarray(self.branch, dtype=float)
        if self.branch.shape != (N_STATES, N_STATES):
            raise ValueError("branch must be 8x8")
        if np.any(self.branch < 0) or not np.allclose(self.branch.sum(axis=1), 1.0,
                                                      rtol=0, atol=1e-12):
            raise ValueError("branch rows must be non-negative and sum to 1")
        for name in ("depump_prob", "loss_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.depump_prob + self.loss_prob > 1.0:
            raise ValueError("depump_prob + loss_prob must not exceed 1")

    @classmethod
    def adjacent(cls, depump_prob: float, f1_share: float, loss_prob: float = 0.0):
        return cls(depump_prob, adjacent_branch(f1_share), loss_prob)

    @classmethod
    def calibrated(cls, loss_prob: float = 0.0) -> "PumpModel":
        return cls.adjacent(CALIBRATED_DEPUMP_PROB, CALIBRATED_F1_SHARE, loss_prob)


def _pump_populations(p: np.ndarray, lost: float, pump: PumpModel):
    f2 = np.where(F2_MASK, p, 0.0)
    moved = pump.depump_prob * f2
    gone = pump.loss_prob * f2
    return p - moved - gone + moved @ pump.branch, lost + float(gone.sum())


def apply_probe_pulse(state: EngineState, pump: PumpModel) -> EngineState:
    """Deterministic back-action of one probe pulse.

    Coherent states are collapsed to populations first; the returned amplitudes
    are the real square roots of the new populations (phases reset).
    """
    if state.amp is not None:
        p, lost = _pump_populations(np.abs(state.amp) ** 2, state.lost, pump)
        return replace(state, amp=np.sqrt(np.clip(p, 0.0, None)).astype(complex), lost=lost)
    p, lost = _pump_populations(state.p, state.lost, pump)
    return replace(state, p=p, lost=lost)
