"""Free-field simulation of a chirp source received by a microphone array."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import Direction, dir_to_unit
from .spectral import MultichannelSignal
from .srp import SPEED_OF_SOUND


@dataclass(frozen=True)
class LfmSpec:
    f0: float = 500.0
    f1: float = 2500.0
    duration: float = 0.5

    def __post_init__(self):
        if not 0 < self.f0 < self.f1:
            raise ValueError("need 0 < f0 < f1")
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def __call__(self, t):
        """Closed-form chirp at arbitrary times; zero outside [0, duration)."""
        t = np.asarray(t, dtype=float)
        k = (self.f1 - self.f0) / (2.0 * self.duration)
        s = np.sin(2.0 * np.pi * (self.f0 * t + k * t * t))
        return np.where((t >= 0.0) & (t < self.duration), s, 0.0)


@dataclass(frozen=True)
class SourceSpec:
    direction: Direction
    distance: float = 1.0
    kind: str = "lfm"

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("source distance must be positive")
        if self.kind != "lfm":
            raise ValueError(f"unsupported source kind {self.kind!r}")

    @property
    def position(self):
        return self.distance * dir_to_unit(self.direction)


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float = math.inf
    seed: int = 0


def _check_rate(lfm, fs):
    if not fs > 2.0 * lfm.f1:
        raise ValueError(f"sample rate {fs} Hz does not exceed twice the top frequency {lfm.f1} Hz")


def lfm_chirp(spec, fs):
    _check_rate(spec, fs)
    n = int(round(spec.duration * fs))
    return spec(np.arange(n) / fs)


def mic_delays(geometry, source, c=SPEED_OF_SOUND):
    """Propagation distance (m) and delay (s) from the source to each mic."""
    dist = np.linalg.norm(geometry.mic_positions - source.position, axis=1)
    return dist, dist / c


def propagate(geometry, source, lfm=LfmSpec(), fs=50_000.0, c=SPEED_OF_SOUND):
    """Spherical-wave propagation with exact fractional delays and 1/r gain."""
    _check_rate(lfm, fs)
    dist, delay = mic_delays(geometry, source, c)
    n = int(math.ceil((lfm.duration + delay.max()) * fs))
    t = np.arange(n) / fs
    x = lfm(t[None, :] - delay[:, None]) / dist[:, None]
    return MultichannelSignal(fs, x)


def noise_for(signal, spec):
    """The noise `add_noise` would add: one independent stream per channel."""
    x = signal.channels
    if math.isinf(spec.snr_db) and spec.snr_db > 0:
        return np.zeros_like(x)
    power = np.mean(x * x, axis=1)
    if np.any(power == 0.0):
        raise ValueError("cannot set an SNR on an all-zero channel")
    sigma = np.sqrt(power / 10.0 ** (spec.snr_db / 10.0))
    out = np.empty_like(x)
    for ch in range(x.shape[0]):
        rng = np.random.default_rng([int(spec.seed) & (2**64 - 1), ch])
        out[ch] = sigma[ch] * rng.standard_normal(x.shape[1])
    return out


def add_noise(signal, spec):
    if math.isinf(spec.snr_db) and spec.snr_db > 0:
        return signal
    return MultichannelSignal(signal.sample_rate, signal.channels + noise_for(signal, spec))
