"""Command-line entry point: ``asap-doa {bench-sim,bench-real,locate}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import (
    Settings,
    emit_report,
    load_config,
    locate,
    run_recorded_bench,
    run_simulation_bench,
)
from .search import METHODS
from .wavio import load_wav


def _methods(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be a comma list of {', '.join(METHODS)}")
    return names


def _snr(text):
    if text.lower() in ("clean", "none", "inf"):
        return None
    return float(text)


def build_parser():
    p = argparse.ArgumentParser(prog="asap-doa", description="SRP-PHAT DOA search benchmarks")
    p.add_argument("--config", help="key=value file overriding search/array settings")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("bench-sim", help="simulated chirp benchmark")
    sim.add_argument("--level", type=int, default=5)
    sim.add_argument("--trials", type=int, default=100)
    sim.add_argument("--distance", type=float, default=1.0, help="source distance (m)")
    sim.add_argument("--snr", type=_snr, default=None, help="SNR in dB, or 'clean'")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--methods", type=_methods, default=list(METHODS))
    sim.add_argument("--out", default="-")
    sim.add_argument("--format", choices=("csv", "markdown"), default="csv")

    real = sub.add_parser("bench-real", help="benchmark on recordings listed in a manifest")
    real.add_argument("--manifest", required=True)
    real.add_argument("--level", type=int, default=5)
    real.add_argument("--methods", type=_methods, default=list(METHODS))
    real.add_argument("--out", default="-")
    real.add_argument("--format", choices=("csv", "markdown"), default="csv")

    loc = sub.add_parser("locate", help="estimate the DOA of one WAV recording")
    loc.add_argument("--wav", required=True)
    loc.add_argument("--level", type=int, default=5)
    loc.add_argument("--method", choices=METHODS, default="asap_bp")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = load_config(args.config) if args.config else Settings()
        if args.command == "bench-sim":
            report = run_simulation_bench(args.methods, args.trials, args.level, args.distance,
                                          args.snr, args.seed, settings)
            emit_report(report, args.out, args.format)
        elif args.command == "bench-real":
            report = run_recorded_bench(args.manifest, args.methods, args.level, settings)
            emit_report(report, args.out, args.format)
        else:
            signal = load_wav(args.wav, settings.num_mics)
            res = locate(signal, args.method, args.level, settings)
            print(res.direction)
    except (OSError, ValueError, KeyError) as exc:
        print(f"asap-doa: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
