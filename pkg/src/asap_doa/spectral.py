"""STFT framing and frame-averaged GCC-PHAT.

Lag convention: ``R_lm`` peaks at lag ``a_l - a_m`` (in samples), where
``a_k`` is the arrival time at microphone ``k``.  A positive lag therefore
means channel ``m`` receives the wavefront first.  This is the sign produced
by the cross-spectrum ``X_l * conj(X_m)`` and is the same convention as
:func:`asap_doa.srp.pair_tdoa`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

_warned_out_of_range = False


@dataclass(frozen=True)
class MultichannelSignal:
    sample_rate: float
    channels: np.ndarray = field(repr=False)  # (M, N)

    def __post_init__(self):
        x = np.array(self.channels, dtype=float)
        if x.ndim != 2:
            raise ValueError("channels must be a 2-D array (M, N)")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "channels", x)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def num_channels(self):
        return self.channels.shape[0]

    @property
    def num_samples(self):
        return self.channels.shape[1]


@dataclass(frozen=True)
class FrameSpec:
    """Framing and GCC-PHAT front-end settings.

    `band` limits the PHAT-weighted spectrum to ``(f_lo, f_hi)`` Hz (None keeps
    the full band).  `phat` selects where the magnitude normalisation happens:
    ``"frame"`` normalises each frame's cross-spectrum before averaging,
    ``"average"`` normalises the frame-averaged cross-spectrum.  `upsample`
    evaluates the lag table on a grid `upsample` times finer than one sample.
    """

    nfft: int = 1024
    overlap_fraction: float = 0.5
    window: str = "hann"
    band: tuple | None = None
    phat: str = "average"
    upsample: int = 8

    def __post_init__(self):
        if self.nfft < 2 or self.nfft & (self.nfft - 1):
            raise ValueError(f"nfft must be a power of two, got {self.nfft}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        hop = self.nfft * (1.0 - self.overlap_fraction)
        if hop != int(hop) or hop < 1:
            raise ValueError(f"hop {hop} is not a positive integer")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.band is not None:
            lo, hi = (float(b) for b in self.band)
            if not 0.0 <= lo < hi:
                raise ValueError(f"band must satisfy 0 <= f_lo < f_hi, got {self.band!r}")
            object.__setattr__(self, "band", (lo, hi))
        if self.phat not in ("frame", "average"):
            raise ValueError(f"phat must be 'frame' or 'average', got {self.phat!r}")
        if int(self.upsample) != self.upsample or self.upsample < 1:
            raise ValueError("upsample must be a positive integer")

    @property
    def hop(self):
        return int(self.nfft * (1.0 - self.overlap_fraction))


def stft(signal, spec):
    """Per-channel one-sided spectra, shape (M, frames, nfft // 2 + 1).

    Uses the periodic Hann window; only full frames are kept.
    """
    x = signal.channels
    n = x.shape[1]
    if n < spec.nfft:
        raise ValueError(f"signal has {n} samples, fewer than one frame of {spec.nfft}")
    n_frames = (n - spec.nfft) // spec.hop + 1
    window = np.hanning(spec.nfft + 1)[:-1]
    idx = np.arange(spec.nfft)[None, :] + spec.hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(x[:, idx] * window, axis=-1)


def _phat(g):
    mag = np.abs(g)
    eps = 1e-12 * mag.max(axis=-1, keepdims=True) + 1e-20
    return g / (mag + eps)


def gcc_phat_pair(frames_l, frames_m, phat="average", bin_mask=None, upsample=1):
    """Frame-averaged GCC-PHAT of two channels' STFT frames.

    Returns a real array of length ``nfft * upsample`` whose index ``k`` holds
    lag ``k / upsample - nfft / 2`` samples.  `bin_mask` zeroes frequency bins
    after weighting.
    """
    frames_l = np.atleast_2d(frames_l)
    frames_m = np.atleast_2d(frames_m)
    if frames_l.shape != frames_m.shape:
        raise ValueError("frame arrays must have identical shapes")
    if frames_l.shape[0] == 0:
        raise ValueError("no frames to correlate")
    g = frames_l * np.conj(frames_m)
    if phat == "frame":
        weighted = _phat(g).mean(axis=0)
    elif phat == "average":
        weighted = _phat(g.mean(axis=0))
    else:
        raise ValueError(f"unknown PHAT mode {phat!r}")
    if bin_mask is not None:
        weighted = weighted * bin_mask
    n = 2 * (frames_l.shape[-1] - 1) * upsample
    if upsample > 1:
        # the old Nyquist bin becomes an ordinary bin counted twice
        weighted = weighted.copy()
        weighted[-1] *= 0.5
    return np.fft.fftshift(np.fft.irfft(weighted, n=n)) * upsample


@dataclass(frozen=True)
class GccSet:
    """GCC-PHAT tables for every microphone pair (l < m), row-major pair order."""

    sample_rate: float
    pairs: tuple
    table: np.ndarray = field(repr=False)  # (num_pairs, nfft * upsample)
    upsample: int = 1

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] != len(self.pairs):
            raise ValueError("table must have one row per pair")
        if not np.all(np.isfinite(t)):
            raise ValueError("GCC table contains non-finite values")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        object.__setattr__(self, "_row", {p: i for i, p in enumerate(self.pairs)})

    @property
    def num_pairs(self):
        return len(self.pairs)

    @property
    def nfft(self):
        return self.table.shape[1] // self.upsample

    def row(self, l, m):
        try:
            return self._row[(l, m)]
        except KeyError:
            raise KeyError(f"pair ({l}, {m}) is not registered") from None


def band_mask(spec, sample_rate):
    if spec.band is None:
        return None
    f = np.fft.rfftfreq(spec.nfft, 1.0 / sample_rate)
    return ((f >= spec.band[0]) & (f <= spec.band[1])).astype(float)


def build_gcc_set(signal, spec=FrameSpec()):
    frames = stft(signal, spec)
    mask = band_mask(spec, signal.sample_rate)
    m_count = signal.num_channels
    pairs = [(l, m) for l in range(m_count) for m in range(l + 1, m_count)]
    table = np.stack([
        gcc_phat_pair(frames[l], frames[m], spec.phat, mask, spec.upsample) for l, m in pairs
    ])
    return GccSet(signal.sample_rate, tuple(pairs), table, spec.upsample)


def interp_lags(table, rows, lags, upsample=1):
    """Linearly interpolate ``table[rows]`` at fractional sample lags.

    `rows` and `lags` broadcast together.  Lags outside the table
    (``[-nfft/2, nfft/2 - 1/upsample]`` samples) score 0.
    """
    global _warned_out_of_range
    size = table.shape[1]
    pos = np.asarray(lags, dtype=float) * upsample + size // 2
    rows = np.asarray(rows)
    rows, pos = np.broadcast_arrays(rows, pos)
    inside = (pos >= 0.0) & (pos <= size - 1)
    if not np.all(inside) and not _warned_out_of_range:
        log.warning("steering lag outside the GCC table; scoring it as 0")
        _warned_out_of_range = True
    pos = np.where(inside, pos, 0.0)
    lo = np.minimum(np.floor(pos).astype(np.intp), size - 2)
    frac = pos - lo
    val = (1.0 - frac) * table[rows, lo] + frac * table[rows, lo + 1]
    return np.where(inside, val, 0.0)


def sample_gcc(gcc, l, m, tau):
    """GCC value of pair (l, m) at a delay of `tau` seconds."""
    return float(interp_lags(gcc.table, gcc.row(l, m), tau * gcc.sample_rate, gcc.upsample))
