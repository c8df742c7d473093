"""Far-field steering delays and the SRP-PHAT objective."""

from __future__ import annotations

import threading

import numpy as np

from .spectral import interp_lags

SPEED_OF_SOUND = 343.0


def pair_tdoa(geometry, u, l, m, c=SPEED_OF_SOUND):
    """Arrival-time difference ``a_l - a_m`` (seconds) of a plane wave from `u`.

    Positive when microphone ``m`` hears the wave first, matching the lag sign
    of the GCC tables.
    """
    r = geometry.mic_positions
    return float(np.dot(r[m] - r[l], u) / c)


class SrpEvaluator:
    """SRP-PHAT objective over one GCC set, with an evaluation counter."""

    def __init__(self, geometry, gcc, speed_of_sound=SPEED_OF_SOUND):
        if not speed_of_sound > 0:
            raise ValueError("speed_of_sound must be positive")
        m = geometry.num_mics
        if gcc.num_pairs != m * (m - 1) // 2:
            raise ValueError(
                f"GCC set has {gcc.num_pairs} pairs but the geometry has {m} mics"
            )
        self.geometry = geometry
        self.gcc = gcc
        self.speed_of_sound = float(speed_of_sound)
        r = geometry.mic_positions
        l_idx, m_idx = np.array(gcc.pairs).T
        # rows: pairs; lag (samples) = baseline . u
        self._baselines = (r[m_idx] - r[l_idx]) * (gcc.sample_rate / self.speed_of_sound)
        self._rows = np.arange(gcc.num_pairs)
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self):
        return self._count

    def _add(self, n):
        with self._lock:
            self._count += n

    def power_batch(self, candidates):
        u = np.atleast_2d(np.asarray(candidates, dtype=float))
        if u.shape[0] == 0:
            raise ValueError("empty candidate list")
        lags = u @ self._baselines.T  # (n, pairs)
        vals = interp_lags(self.gcc.table, self._rows[None, :], lags, self.gcc.upsample)
        self._add(u.shape[0])
        return 2.0 * np.pi * vals.sum(axis=1)

    def power(self, u):
        return float(self.power_batch(np.asarray(u, dtype=float)[None, :])[0])


def srp_power(ev, u):
    return ev.power(u)


def srp_power_batch(ev, candidates):
    return ev.power_batch(candidates)
