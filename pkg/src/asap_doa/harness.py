"""Benchmark runner, accuracy metrics, manifests and report output."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .geom import Direction, StripSet, build_uca, dir_to_unit, wrap_azimuth
from .search import METHODS, AsapConfig, CfrcConfig, method_configs, run_method
from .spectral import FrameSpec, build_gcc_set
from .srp import SPEED_OF_SOUND, SrpEvaluator
from .synth import LfmSpec, NoiseSpec, SourceSpec, add_noise, propagate
from .wavio import load_wav

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "method", "level", "condition", "distance_m", "trials",
    "rmse_deg", "total_time_s", "total_evaluations",
)
MANIFEST_COLUMNS = ("wav_path", "azimuth_deg", "elevation_deg", "speaker_id")

METHOD_LABELS = {
    "full_grid": "SRP-PHAT (full grid)",
    "cfrc": "CFRC",
    "asap_bp": "BP (ASAP)",
    "asap_mc": "MC (ASAP)",
}


class ManifestError(ValueError):
    pass


class ConfigFileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# metrics

def angular_error(est, truth):
    """Great-circle angle in degrees between two unit vectors."""
    d = float(np.dot(est, truth))
    return math.degrees(math.acos(min(1.0, max(-1.0, d))))


def _rmse(values):
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(v * v))) if len(v) else float("nan")


# ---------------------------------------------------------------------------
# settings

@dataclass(frozen=True)
class Settings:
    """Everything a benchmark run needs besides the method list and level."""

    num_mics: int = 8
    radius: float = 0.0444
    sample_rate: float = 50_000.0
    speed_of_sound: float = SPEED_OF_SOUND
    # PHAT weighting restricted to the chirp band
    frame: FrameSpec = FrameSpec(band=(500.0, 2500.0))
    lfm: LfmSpec = LfmSpec()
    cfrc: CfrcConfig = CfrcConfig()
    asap: AsapConfig = AsapConfig()

    @property
    def geometry(self):
        return build_uca(self.num_mics, self.radius)

    def snapshot(self):
        """Flat key/value view, the same keys `load_config` accepts."""
        a, c = self.asap, self.cfrc
        return {
            "num_mics": self.num_mics,
            "radius": self.radius,
            "sample_rate": self.sample_rate,
            "speed_of_sound": self.speed_of_sound,
            "nfft": self.frame.nfft,
            "overlap_fraction": self.frame.overlap_fraction,
            "band": "none" if self.frame.band is None else ",".join(map(str, self.frame.band)),
            "phat": self.frame.phat,
            "upsample": self.frame.upsample,
            "f0": self.lfm.f0,
            "f1": self.lfm.f1,
            "duration": self.lfm.duration,
            "start_level": c.start_level,
            "top_n": c.top_n,
            "cap_scale": c.cap_scale,
            "cap_angles_deg": "" if c.cap_angles_deg is None else ",".join(map(str, c.cap_angles_deg)),
            "strip_centers": ",".join(map(str, a.strips.centers)),
            "strip_half_width": a.strips.half_width,
            "mc_half_window": a.mc_half_window,
            "mc_step": a.mc_step,
            "bp_step": a.bp_step,
            "quad_refine": a.quad_refine,
            "stage2_window": a.stage2_window,
        }


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def settings_from_mapping(values, base=None):
    """Apply flat ``key -> string`` overrides on top of `base`."""
    s = base or Settings()
    v = dict(values)
    top = {}
    for f in fields(Settings):
        if f.name in v and f.name not in ("frame", "lfm", "cfrc", "asap"):
            raw = v.pop(f.name)
            top[f.name] = int(raw) if f.name == "num_mics" else float(raw)
    fkw = {}
    if "nfft" in v:
        fkw["nfft"] = int(v.pop("nfft"))
    if "overlap_fraction" in v:
        fkw["overlap_fraction"] = float(v.pop("overlap_fraction"))
    if "band" in v:
        raw = v.pop("band").strip().lower()
        fkw["band"] = None if raw in ("", "none", "full") else _floats(raw)
    if "phat" in v:
        fkw["phat"] = v.pop("phat").strip()
    if "upsample" in v:
        fkw["upsample"] = int(v.pop("upsample"))
    frame = replace(s.frame, **fkw)
    lfm = LfmSpec(*(float(v.pop(k, getattr(s.lfm, k))) for k in ("f0", "f1", "duration")))
    c = s.cfrc
    ckw = {}
    for k, conv in (("start_level", int), ("max_level", int), ("top_n", int), ("cap_scale", float)):
        if k in v:
            ckw[k] = conv(v.pop(k))
    if "cap_angles_deg" in v:
        ckw["cap_angles_deg"] = _floats(v.pop("cap_angles_deg")) or None
    cfrc = replace(c, **ckw)
    a = s.asap
    akw = {}
    strips = a.strips
    if "strip_centers" in v or "strip_half_width" in v:
        strips = StripSet(
            _floats(v.pop("strip_centers")) if "strip_centers" in v else strips.centers,
            float(v.pop("strip_half_width", strips.half_width)),
        )
    for k in ("mc_half_window", "mc_step", "bp_step", "stage2_window"):
        if k in v:
            akw[k] = float(v.pop(k))
    if "quad_refine" in v:
        akw["quad_refine"] = _bool(v.pop("quad_refine"))
    if "variant" in v:
        akw["variant"] = v.pop("variant")
    if "mc_half_window" in akw and "stage2_window" not in akw:
        akw["stage2_window"] = akw["mc_half_window"]
    asap = replace(a, strips=strips, cfrc=cfrc, **akw)
    if v:
        raise ConfigFileError(f"unknown configuration keys: {', '.join(sorted(v))}")
    return replace(s, frame=frame, lfm=lfm, cfrc=cfrc, asap=asap, **top)


def load_config(path, base=None):
    """Read a flat ``key = value`` file (``#`` starts a comment)."""
    values = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigFileError(f"{path}:{n}: expected key=value")
            key, val = (p.strip() for p in line.split("=", 1))
            values[key] = val
    try:
        return settings_from_mapping(values, base)
    except ConfigFileError:
        raise
    except ValueError as exc:
        raise ConfigFileError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# trials and reports

@dataclass(frozen=True)
class TrialSpec:
    true_direction: Direction
    distance: float
    condition: float | None  # SNR in dB; None means clean
    seed: int


def condition_label(condition):
    if condition is None or (isinstance(condition, float) and math.isinf(condition)):
        return "clean"
    if isinstance(condition, str):
        return condition
    return f"{condition:g}dB"


def draw_trials(trial_count, master_seed, distance=1.0, condition=None):
    """Seeded trials with azimuth and elevation uniform in degrees.

    Trials depend only on `master_seed`, so different conditions with the same
    seed share directions and noise seeds.
    """
    if trial_count < 1:
        raise ValueError("trial_count must be at least 1")
    out = []
    for child in np.random.SeedSequence(master_seed).spawn(trial_count):
        rng = np.random.default_rng(child)
        az = rng.uniform(-180.0, 180.0)
        el = rng.uniform(0.0, 90.0)
        seed = int(child.generate_state(1, np.uint64)[0])
        out.append(TrialSpec(Direction(az, el), float(distance), condition, seed))
    return out


@dataclass
class MethodRow:
    method: str
    rmse_deg: float
    azimuth_rmse_deg: float
    elevation_rmse_deg: float
    total_wall_time_s: float
    total_evaluations: int
    trial_count: int
    estimates: list = field(default_factory=list, repr=False)
    errors_deg: list = field(default_factory=list, repr=False)


@dataclass
class BenchmarkReport:
    rows: list
    metadata: dict

    def row(self, method):
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


class _Accumulator:
    def __init__(self, method):
        self.method = method
        self.wall = 0.0
        self.evals = 0
        self.err, self.az_err, self.el_err, self.est = [], [], [], []

    def add(self, res, truth, wall):
        self.wall += wall
        self.evals += res.evaluations
        self.err.append(angular_error(res.unit, dir_to_unit(truth)))
        self.az_err.append(wrap_azimuth(res.direction.azimuth - truth.azimuth))
        self.el_err.append(res.direction.elevation - truth.elevation)
        self.est.append(res.direction)

    def row(self):
        return MethodRow(
            self.method, _rmse(self.err), _rmse(self.az_err), _rmse(self.el_err),
            self.wall, self.evals, len(self.err), self.est, self.err,
        )


def _check_methods(methods):
    methods = list(methods)
    if not methods:
        raise ValueError("no methods selected")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return methods


def _bench(cases, methods, level, settings, geometry):
    methods = _check_methods(methods)
    configs = method_configs(level, settings.cfrc, settings.asap)
    acc = {m: _Accumulator(m) for m in methods}
    front = 0.0
    for signal, truth in cases:
        t0 = time.perf_counter()
        gcc = build_gcc_set(signal, settings.frame)
        front += time.perf_counter() - t0
        for m in methods:
            ev = SrpEvaluator(geometry, gcc, settings.speed_of_sound)
            t0 = time.perf_counter()
            res = run_method(ev, m, configs[m])
            acc[m].add(res, truth, time.perf_counter() - t0)
    return [acc[m].row() for m in methods], front


def run_simulation_bench(methods, trial_count, level=5, distance=1.0, condition=None,
                         master_seed=0, settings=None):
    """Synthesise seeded trials and score every method on identical GCC sets."""
    settings = settings or Settings()
    geometry = settings.geometry
    trials = draw_trials(trial_count, master_seed, distance, condition)

    def cases():
        for tr in trials:
            src = SourceSpec(tr.true_direction, tr.distance)
            sig = propagate(geometry, src, settings.lfm, settings.sample_rate, settings.speed_of_sound)
            if tr.condition is not None:
                sig = add_noise(sig, NoiseSpec(float(tr.condition), tr.seed))
            yield sig, tr.true_direction

    rows, front = _bench(cases(), methods, level, settings, geometry)
    meta = {
        "level": level,
        "condition": condition_label(condition),
        "distance_m": float(distance),
        "seed": master_seed,
        "frontend_time_s": front,
        "config": settings.snapshot(),
    }
    return BenchmarkReport(rows, meta)


@dataclass(frozen=True)
class GroundTruthRecord:
    wav_path: str
    azimuth_deg: float
    elevation_deg: float
    speaker_id: str

    @property
    def direction(self):
        return Direction(self.azimuth_deg, self.elevation_deg)


def read_manifest(path):
    """Parse a ``wav_path,azimuth_deg,elevation_deg,speaker_id`` CSV.

    Relative WAV paths are resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ManifestError(f"{path}: manifest is empty")
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ManifestError(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}")
        records = []
        for n, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(f"{path}: row {n}: expected 4 fields, got {len(row)}")
            wav, az, el, spk = (c.strip() for c in row)
            try:
                az, el = float(az), float(el)
            except ValueError:
                raise ManifestError(f"{path}: row {n}: angles must be numbers") from None
            if not (-180.0 <= az <= 180.0 and 0.0 <= el <= 90.0):
                raise ManifestError(f"{path}: row {n}: angles out of range")
            wav = wav if os.path.isabs(wav) else os.path.join(base, wav)
            if not os.path.isfile(wav):
                raise ManifestError(f"{path}: row {n}: missing WAV file {wav}")
            records.append(GroundTruthRecord(wav, az, el, spk))
    if not records:
        raise ManifestError(f"{path}: manifest has no records")
    return records


def run_recorded_bench(manifest_path, methods, level=5, settings=None):
    settings = settings or Settings()
    geometry = settings.geometry
    records = read_manifest(manifest_path)

    def cases():
        for rec in records:
            yield load_wav(rec.wav_path, geometry.num_mics), rec.direction

    rows, front = _bench(cases(), methods, level, settings, geometry)
    meta = {
        "level": level,
        "condition": "recorded",
        "distance_m": float("nan"),
        "seed": None,
        "frontend_time_s": front,
        "config": settings.snapshot(),
        "manifest": os.path.abspath(manifest_path),
    }
    return BenchmarkReport(rows, meta)


def locate(signal, method="asap_bp", level=5, settings=None):
    """Estimate one direction from a multichannel recording."""
    settings = settings or Settings()
    geometry = settings.geometry
    if signal.num_channels != geometry.num_mics:
        raise ValueError(f"signal has {signal.num_channels} channels, geometry has {geometry.num_mics} mics")
    _check_methods([method])
    gcc = build_gcc_set(signal, settings.frame)
    ev = SrpEvaluator(geometry, gcc, settings.speed_of_sound)
    return run_method(ev, method, method_configs(level, settings.cfrc, settings.asap)[method])


# ---------------------------------------------------------------------------
# output

def _fmt_distance(d):
    return "" if d is None or (isinstance(d, float) and math.isnan(d)) else f"{d:g}"


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    m = report.metadata
    for r in report.rows:
        w.writerow([
            r.method, m["level"], m["condition"], _fmt_distance(m["distance_m"]),
            r.trial_count, f"{r.rmse_deg:.2f}", f"{r.total_wall_time_s:.3f}", r.total_evaluations,
        ])
    return buf.getvalue()


def report_markdown(report):
    m = report.metadata
    rows = report.rows
    labels = [METHOD_LABELS[r.method] for r in rows]
    head = "| " + " | ".join(["Condition"] + labels) + " |"
    axis_head = "| " + " | ".join(["Axis"] + labels) + " |"
    rule = "|" + "---|" * (len(rows) + 1)
    lines = [
        f"RMSE (deg), {rows[0].trial_count} trials, level {m['level']}, "
        f"distance {_fmt_distance(m['distance_m']) or 'n/a'} m",
        "",
        head, rule,
        "| " + " | ".join([m["condition"]] + [f"{r.rmse_deg:.2f}" for r in rows]) + " |",
        "",
        "Per-axis RMSE (deg)",
        "",
        axis_head, rule,
        "| azimuth | " + " | ".join(f"{r.azimuth_rmse_deg:.2f}" for r in rows) + " |",
        "| elevation | " + " | ".join(f"{r.elevation_rmse_deg:.2f}" for r in rows) + " |",
        "",
        "Total computation time (s) and SRP evaluations",
        "",
        "| Level | " + " | ".join(labels) + " |",
        rule,
        f"| level {m['level']} | " + " | ".join(f"{r.total_wall_time_s:.3f}" for r in rows) + " |",
        "| evaluations | " + " | ".join(str(r.total_evaluations) for r in rows) + " |",
        "",
    ]
    return "\n".join(lines)


def emit_report(report, path, fmt="csv"):
    if fmt == "csv":
        text = report_csv(report)
    elif fmt in ("markdown", "md"):
        text = report_markdown(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path in (None, "-"):
        print(text, end="")
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)
