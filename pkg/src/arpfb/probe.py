"""Pulsed dispersive probe record: demodulated I/Q samples per probe pulse."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProbeConfig:
    pulse_period: float = 2.5      # ms
    pulse_duration: float = 500.0  # ns, metadata only (pulses are instantaneous samples)
    gain: float = 1.0
    offset0: float = 0.05
    offset_growth: float = 0.5
    demod_phase: float = 0.6       # rad
    noise_sigma: float = 0.03

    def __post_init__(self):
        if not self.pulse_period > 0:
            raise ValueError("pulse_period must be positive")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class IQSample:
    t: float
    i: float
    q: float


def pulse_times(cfg: ProbeConfig, t_start: float, t_end: float) -> list[float]:
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    # tolerate rounding in (t_end - t_start) / period so the end point is kept
    n = int(math.floor((t_end - t_start) / cfg.pulse_period + 1e-9))
    return [t_start + k * cfg.pulse_period for k in range(n + 1)]


def synthesize_sample(t: float, f2_fraction: float, lost: float, cfg: ProbeConfig,
                      rng: np.random.Generator) -> IQSample:
    """Noisy I/Q pair whose noiseless magnitude is offset + leak offset + gain * F=2 fraction.

    Two normal draws are taken from ``rng`` per call, even when the noise is zero,
    so a trial's random stream does not depend on the noise setting.
    """
    if not -1e-12 <= f2_fraction <= 1 + 1e-12:
        raise ValueError(f"f2_fraction out of range: {f2_fraction!r}")
    amplitude = cfg.offset0 + cfg.offset_growth * lost + cfg.gain * f2_fraction
    n1, n2 = rng.normal(0.0, 1.0, size=2)
    return IQSample(
        t=t,
        i=amplitude * math.cos(cfg.demod_phase) + cfg.noise_sigma * n1,
        q=amplitude * math.sin(cfg.demod_phase) + cfg.noise_sigma * n2,
    )


def magnitude(s: IQSample) -> float:
    return math.hypot(s.i, s.q)
