"""Acceptance criteria 1-10, each checked at its stated tolerance.

A summary line per criterion is printed at the end of the run by the
``pytest_terminal_summary`` hook in conftest.py.
"""

import csv
import io
import math
import time

import numpy as np
import pytest

from asap_doa.cli import main
from asap_doa.geom import (
    Direction,
    SphericalCap,
    build_icosphere,
    cap_contains,
    dir_to_unit,
    slerp,
)
from asap_doa.harness import (
    Settings,
    draw_trials,
    locate,
    run_recorded_bench,
    run_simulation_bench,
)
from asap_doa.search import METHODS, CfrcConfig, bp_arc_samples, cfrc_search, full_grid_search, quad_interp_peak
from asap_doa.spectral import FrameSpec, MultichannelSignal, build_gcc_set
from asap_doa.srp import SrpEvaluator
from asap_doa.synth import SourceSpec, propagate
from asap_doa.wavio import save_wav

criterion = pytest.mark.criterion


def great_circle_deg(u, v):
    """Angle between unit vectors, accurate for tiny angles."""
    return math.degrees(math.atan2(np.linalg.norm(np.cross(u, v)), float(np.dot(u, v))))


def random_units(rng, n):
    u = rng.standard_normal((n, 3))
    return u / np.linalg.norm(u, axis=1)[:, None]


@pytest.fixture(scope="module")
def table1_runs():
    clean = run_simulation_bench(list(METHODS), 200, level=5, distance=1.0, condition=None, master_seed=0)
    noisy = run_simulation_bench(list(METHODS), 200, level=5, distance=1.0, condition=1.5, master_seed=0)
    for name, rep in (("clean", clean), ("1.5 dB", noisy)):
        print(f"\n{name}: " + ", ".join(f"{r.method}={r.rmse_deg:.3f}" for r in rep.rows))
    return clean, noisy


@criterion(1, "icosphere vertex counts 42/162/642/2562/10242, built in under 1 s")
def test_tessellation_exactness():
    build_icosphere.cache_clear()
    t0 = time.perf_counter()
    counts = [len(build_icosphere(level, hemisphere_only=False)) for level in range(1, 6)]
    elapsed = time.perf_counter() - t0
    assert counts == [42, 162, 642, 2562, 10242]
    assert elapsed < 1.0


@criterion(2, "clean 200 trials at 1 m: full-grid RMSE in [1.5, 4.5] deg and BP <= full grid + 0.3 deg")
def test_clean_table(table1_runs):
    clean, _ = table1_runs
    fg = clean.row("full_grid").rmse_deg
    bp = clean.row("asap_bp").rmse_deg
    assert bp <= fg + 0.3
    assert 1.5 <= fg <= 4.5, f"full-grid clean RMSE {fg:.3f} deg outside [1.5, 4.5]"


@criterion(3, "SNR 1.5 dB: every method worse than clean and BP <= CFRC + 0.2 deg")
def test_noise_ordering(table1_runs):
    clean, noisy = table1_runs
    for method in METHODS:
        c, n = clean.row(method).rmse_deg, noisy.row(method).rmse_deg
        assert n > c, f"{method}: noisy {n:.3f} <= clean {c:.3f}"
    assert noisy.row("asap_bp").rmse_deg <= noisy.row("cfrc").rmse_deg + 0.2


@criterion(4, "mean evaluations over 100 trials: BP < MC < CFRC < 0.25 x full grid")
def test_efficiency_ordering():
    rep = run_simulation_bench(list(METHODS), 100, level=5, master_seed=0)
    mean = {r.method: r.total_evaluations / r.trial_count for r in rep.rows}
    assert mean["asap_bp"] < mean["asap_mc"] < mean["cfrc"] < 0.25 * mean["full_grid"]


@criterion(5, "no-contraction CFRC equals full grid on 20 trials at level 3")
def test_oracle_equivalence():
    settings = Settings()
    cfg = CfrcConfig(max_level=3, top_n=10**6, cap_angles_deg=(180.0, 180.0))
    for trial in draw_trials(20, master_seed=5):
        sig = propagate(settings.geometry, SourceSpec(trial.true_direction, trial.distance))
        gcc = build_gcc_set(sig, settings.frame)
        a = cfrc_search(SrpEvaluator(settings.geometry, gcc), cfg)
        b = full_grid_search(SrpEvaluator(settings.geometry, gcc), 3)
        assert a.direction == b.direction
        assert a.score == b.score


@criterion(6, "GCC-PHAT recovers integer delays 1/5/10/50; x10 gain leaves lag and SRP score unchanged")
def test_delay_recovery():
    rng = np.random.default_rng(6)
    for d in (1, 5, 10, 50):
        s = rng.standard_normal(40_000 + d)
        base = np.stack([s[d:], s[:-d]])  # channel 1 lags channel 0 by d samples
        for gain in (1.0, 10.0):
            x = base.copy()
            x[1] *= gain
            gcc = build_gcc_set(MultichannelSignal(50_000.0, x), FrameSpec())
            row = gcc.table[0]
            lag = (int(np.argmax(row)) - len(row) // 2) / gcc.upsample
            assert lag == -d

    settings = Settings()
    truth = Direction(40.0, 30.0)
    sig = propagate(settings.geometry, SourceSpec(truth, 1.0))
    scaled = sig.channels.copy()
    scaled[3] *= 10.0
    cand = np.vstack([dir_to_unit(truth), build_icosphere(3).vertices])
    ref = SrpEvaluator(settings.geometry, build_gcc_set(sig, settings.frame)).power_batch(cand)
    out = SrpEvaluator(
        settings.geometry, build_gcc_set(MultichannelSignal(sig.sample_rate, scaled), settings.frame)
    ).power_batch(cand)
    np.testing.assert_allclose(out, ref, rtol=1e-6, atol=1e-6 * np.abs(ref).max())


@criterion(7, "parabolic vertex exact on 1000 quadratics; symmetric and flat cases give 0")
def test_quadratic_refinement():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        step = rng.uniform(0.05, 5.0)
        x0 = rng.uniform(-0.5, 0.5) * step
        a, c = -rng.uniform(0.01, 100.0), rng.uniform(-10, 10)
        p = [a * (x - x0) ** 2 + c for x in (-step, 0.0, step)]
        got = quad_interp_peak(*p, step)
        assert abs(got - x0) <= 1e-9 * max(abs(x0), step)
    assert quad_interp_peak(1.0, 3.0, 1.0, 1.0) == 0.0
    assert quad_interp_peak(2.0, 2.0, 2.0, 1.0) == 0.0


@criterion(8, "SLERP, BP arc and cap properties under 10 seeds")
@pytest.mark.parametrize("seed", range(10))
def test_geometry_properties(seed):
    rng = np.random.default_rng(seed)
    u1, u2 = random_units(rng, 2)
    alpha = math.acos(float(np.clip(u1 @ u2, -1, 1)))
    t = np.linspace(0.0, 1.0, 101)
    arc = slerp(u1, u2, t)
    np.testing.assert_allclose(np.linalg.norm(arc, axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(slerp(u1, u2, 0.0), u1, atol=1e-15)
    np.testing.assert_allclose(slerp(u1, u2, 1.0), u2, atol=1e-12)
    ang = np.arccos(np.clip(arc @ u1, -1, 1))
    np.testing.assert_allclose(ang, t * alpha, atol=1e-6)

    _, samples, _ = bp_arc_samples(u1, u2, 0.5)
    for s in samples:
        assert abs(np.linalg.det(np.stack([u1, u2, s]))) < 1e-9

    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    rot = q * np.sign(np.diag(r))
    for c, u, a in zip(random_units(rng, 50), random_units(rng, 50), rng.uniform(0.05, 3.0, 50)):
        rc = rot @ c
        assert cap_contains(SphericalCap(c, a), u) == cap_contains(SphericalCap(rc / np.linalg.norm(rc), a), rot @ u)


@criterion(9, "bench-sim --seed 7 --trials 20 --level 4 reproducible apart from wall time")
def test_cli_determinism(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        assert main(["bench-sim", "--seed", "7", "--trials", "20", "--level", "4", "--out", str(path)]) == 0
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
        for row in rows:
            row.pop("total_time_s")
        outs.append(rows)
    assert len(outs[0]) == len(METHODS)
    assert outs[0] == outs[1]


@criterion(10, "float32 WAV through load_wav and run_recorded_bench matches in-memory locate within 1e-6 deg")
def test_recorded_path(tmp_path):
    settings = Settings()
    truth = Direction(-123.0, 41.0)
    sig = propagate(settings.geometry, SourceSpec(truth, 1.2))
    save_wav(str(tmp_path / "scene.wav"), sig, "float32")
    (tmp_path / "manifest.csv").write_text(
        f"wav_path,azimuth_deg,elevation_deg,speaker_id\nscene.wav,{truth.azimuth},{truth.elevation},synthetic\n"
    )
    rep = run_recorded_bench(str(tmp_path / "manifest.csv"), list(METHODS), level=5)
    for method in METHODS:
        mem = locate(sig, method, 5, settings)
        est = rep.row(method).estimates[0]
        assert great_circle_deg(dir_to_unit(est), mem.unit) <= 1e-6
