"""Command-line interface: simulate, analyze, report, serve, replay."""

from __future__ import annotations

import argparse
import glob
import os
import sys
from pathlib import Path

from .agent import PROFILES, run_session
from .analysis import ProbeDetectionParams, metrics_table, write_metrics_csv
from .engine import SessionConfig, replay as replay_record
from .records import load_record, record_filename, record_to_jsonl, save_record
from .report import build_study_report
from .stats import read_profiles_csv

RECORD_DIR_ENV = "EPIDUSIM_RECORD_DIR"
STATIC_DIR_ENV = "EPIDUSIM_STATIC_DIR"
HOST_ENV = "EPIDUSIM_HOST"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epidusim",
        description="Epidural needle-insertion training simulator toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run synthetic-agent trials and write record files")
    sim.add_argument("--profile", choices=sorted(PROFILES), default="expert")
    sim.add_argument("--mass", type=float, default=None,
                     help="fixed patient mass in kg; default cycles 55/85/115 in blocks")
    sim.add_argument("--trials", type=int, default=12)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=Path, required=True)

    ana = sub.add_parser("analyze", help="compute per-trial metrics from record files")
    ana.add_argument("--in", dest="pattern", required=True, help="glob of record files")
    ana.add_argument("--out", type=Path, default=Path("metrics.csv"))
    ana.add_argument("--prominence", type=float, default=0.5,
                     help="minimum probe peak prominence in mm")
    ana.add_argument("--separation", type=float, default=0.05,
                     help="minimum probe peak separation in s")

    rep = sub.add_parser("report", help="build the validity study tables")
    rep.add_argument("--metrics", type=Path, required=True)
    rep.add_argument("--profiles", type=Path, required=True)
    rep.add_argument("--out", type=Path, required=True)

    srv = sub.add_parser("serve", help="host the live session service")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--record-dir", type=Path,
                     default=os.environ.get(RECORD_DIR_ENV) or "records")
    srv.add_argument("--static-dir", type=Path,
                     default=os.environ.get(STATIC_DIR_ENV) or None,
                     help="trainer console bundle; defaults to frontend/dist if present")

    rpl = sub.add_parser("replay", help="re-simulate a record file")
    rpl.add_argument("--in", dest="record_file", type=Path, required=True)
    rpl.add_argument("--verify", action="store_true",
                     help="exit nonzero unless the replay is byte-identical")
    return parser


def _cmd_simulate(args) -> int:
    if args.trials < 1:
        print("simulate: --trials must be >= 1", file=sys.stderr)
        return 2
    if args.mass is not None:
        config = SessionConfig(
            n_familiarization=0,
            test_masses=(args.mass,),
            blocks=args.trials,
            rng_seed=args.seed,
        )
    else:
        masses = (55.0, 85.0, 115.0)
        if args.trials % len(masses) != 0:
            print(
                f"simulate: --trials must be a multiple of {len(masses)} "
                "when no --mass is given",
                file=sys.stderr,
            )
            return 2
        config = SessionConfig(
            n_familiarization=0,
            test_masses=masses,
            blocks=args.trials // len(masses),
            rng_seed=args.seed,
        )
    participant = f"{args.profile}-s{args.seed}"
    records = run_session(
        PROFILES[args.profile], config, seed=args.seed, participant=participant
    )
    args.out.mkdir(parents=True, exist_ok=True)
    for record in records:
        save_record(record, args.out / record_filename(record))
    print(f"simulate: wrote {len(records)} records to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        print(f"analyze: no record files match {args.pattern!r}", file=sys.stderr)
        return 2
    records = [load_record(p) for p in paths]
    params = ProbeDetectionParams(
        min_prominence=args.prominence, min_separation=args.separation
    )
    rows = metrics_table(records, params=params)
    write_metrics_csv(rows, args.out)
    print(f"analyze: wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_report(args) -> int:
    from .analysis import read_metrics_csv

    rows = read_metrics_csv(args.metrics)
    profiles = read_profiles_csv(args.profiles)
    try:
        report = build_study_report(rows, profiles)
    except ValueError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 2
    written = report.write(args.out)
    print(f"report: wrote {len(written)} files to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import run_server

    static_dir = args.static_dir
    if static_dir is None:
        default_bundle = Path("frontend") / "dist"
        static_dir = default_bundle if default_bundle.is_dir() else None
    host = os.environ.get(HOST_ENV, "127.0.0.1")
    run_server(host=host, port=args.port, record_dir=args.record_dir, static_dir=static_dir)
    return 0


def _cmd_replay(args) -> int:
    record = load_record(args.record_file)
    again = replay_record(record)
    same = record_to_jsonl(again) == record_to_jsonl(record)
    print(
        f"replay: {args.record_file} -> {again.outcome.kind.value} "
        f"(error {again.outcome.signed_error:+.2f} mm), "
        f"{'bit-identical' if same else 'DIVERGED'}"
    )
    if args.verify and not same:
        return 1
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "analyze": _cmd_analyze,
        "report": _cmd_report,
        "serve": _cmd_serve,
        "replay": _cmd_replay,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
