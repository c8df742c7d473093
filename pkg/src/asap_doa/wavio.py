"""Multichannel WAV input/output (PCM16 and float32)."""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .spectral import MultichannelSignal


class WavFormatError(ValueError):
    pass


def load_wav(path, expected_channels=None):
    """Read a WAV file into a signal with samples in [-1, 1].

    PCM16 is scaled by 1/32768, so full scale 32767 maps to 32767/32768.
    Channel order is kept as microphone order.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        fs, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}; use PCM16 or float32")
    x = x.reshape(len(x), -1).T
    if x.shape[0] < 2:
        raise WavFormatError(f"{path}: need at least 2 channels, found {x.shape[0]}")
    if expected_channels is not None and x.shape[0] != expected_channels:
        raise WavFormatError(
            f"{path}: {x.shape[0]} channels but the array geometry has {expected_channels} mics"
        )
    return MultichannelSignal(float(fs), x)


def save_wav(path, signal, fmt="float32"):
    x = signal.channels.T
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    wavfile.write(path, int(round(signal.sample_rate)), data)
