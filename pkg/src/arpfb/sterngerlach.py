"""Stern-Gerlach time-of-flight readout.

A field gradient applied during the first ``t_grad`` of free fall gives each
sub-level the force -g_F m_F mu_B dB/dy. Positions are reported in mm along
the gradient axis; gravity is along the imaging axis and not included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import h as PLANCK

from .dynamics import PopulationVector
from .zeeman import DEFAULT_CONSTANTS, STATES, HyperfineState, PhysicalConstants

RB87_MASS = 1.44316e-25  # kg


@dataclass(frozen=True)
class SGConfig:
    gradient: float = 10.0   # G/cm
    t_grad: float = 10.0     # ms
    t_tof: float = 20.0      # ms
    atom_mass: float = RB87_MASS
    bin_width: float = 0.1   # mm, Gaussian width used for profile rendering
    f2_only: bool = False    # image without repump: F=1 atoms invisible

    def __post_init__(self):
        if not 0 < self.t_grad <= self.t_tof:
            raise ValueError("need 0 < t_grad <= t_tof")
        if not np.isfinite(self.gradient):
            raise ValueError("gradient must be finite")


@dataclass(frozen=True)
class SGBin:
    position: float  # mm
    population: float
    states: tuple[HyperfineState, ...]

    def as_dict(self) -> dict:
        return {"position_mm": self.position, "population": self.population,
                "states": [s.label for s in self.states]}


@dataclass(frozen=True)
class SGHistogram:
    bins: tuple[SGBin, ...]
    lost: float
    hidden: float = 0.0  # F=1 population not imaged when f2_only

    @property
    def total(self) -> float:
        return sum(b.population for b in self.bins)

    def bin_of(self, s: HyperfineState) -> SGBin:
        return next(b for b in self.bins if s in b.states)

    def dominant(self) -> SGBin:
        return max(self.bins, key=lambda b: b.population)


def acceleration(s: HyperfineState, cfg: SGConfig,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Magnetic acceleration in m/s^2."""
    mu_b = PLANCK * constants.muB_over_h * 1e10  # MHz/G -> J/T
    grad = cfg.gradient * 1e-2  # G/cm -> T/m
    return -constants.g_factor(s.f) * s.mf * mu_b * grad / cfg.atom_mass


def displacement(s: HyperfineState, cfg: SGConfig,
                 constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    tg, tt = cfg.t_grad * 1e-3, cfg.t_tof * 1e-3
    y = acceleration(s, cfg, constants) * (0.5 * tg * tg + tg * (tt - tg))
    return y * 1e3 + 0.0  # normalise -0.0 for m_F = 0


def bin_populations(p: PopulationVector, cfg: SGConfig,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> SGHistogram:
    """Group the eight states into clouds sharing a displacement, ordered by position."""
    groups: dict[float, list[int]] = {}
    for i, s in enumerate(STATES):
        groups.setdefault(displacement(s, cfg, constants), []).append(i)
    bins, hidden = [], 0.0
    for pos in sorted(groups):
        visible = 0.0
        for i in groups[pos]:
            if cfg.f2_only and STATES[i].f == 1:
                hidden += float(p.p[i])
            else:
                visible += float(p.p[i])
        bins.append(SGBin(pos, visible, tuple(STATES[i] for i in groups[pos])))
    return SGHistogram(tuple(bins), float(p.lost), hidden)


def absorption_profile(hist: SGHistogram, cfg: SGConfig, n_points: int = 2001,
                       margin: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Sum of unit-area Gaussians (width ``bin_width``) scaled by bin population."""
    if not cfg.bin_width > 0:
        raise ValueError("bin_width must be positive")
    pos = np.array([b.position for b in hist.bins])
    w = np.array([b.population for b in hist.bins])
    y = np.linspace(pos.min() - margin * cfg.bin_width, pos.max() + margin * cfg.bin_width,
                    n_points)
    g = np.exp(-0.5 * ((y[:, None] - pos[None, :]) / cfg.bin_width) ** 2)
    profile = g @ w / (cfg.bin_width * np.sqrt(2 * np.pi))
    return y, profile
