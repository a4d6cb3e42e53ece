"""Command-line front end for the proof pipeline.

Subcommands run single stages or the whole chain, regenerate seed fixtures,
and emit plot data.  Exit codes: 0 verified, 2 inconclusive, 3 failed,
4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .pipeline import Pipeline, PipelineConfig, STAGES, ConfigError

EXIT_VERIFIED = 0
EXIT_INCONCLUSIVE = 2
EXIT_FAILED = 3
EXIT_CONFIG = 4


def _build_parser():
    p = argparse.ArgumentParser(
        prog="oterma",
        description="validated drift-orbit certificates for the planar "
                    "restricted three-body problem")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="certificate output directory")
    p.add_argument("--threads", type=int, help="parallelism degree")
    p.add_argument("--reseed", action="store_true",
                   help="regenerate the non-rigorous seed fixtures")
    sub = p.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, help=f"run the {stage} stage")
    sub.add_parser("all", help="run every stage in dependency order")
    plot = sub.add_parser("plot", help="emit CSV plot data")
    plot.add_argument("kind", choices=["homoclinic_xy",
                                       "energy_change_vs_theta"])
    plot.add_argument("--samples", type=int, default=200)
    plot.add_argument("--output", default=None)
    return p


def _report_line(rep):
    extra = f"  ({rep.message})" if rep.message else ""
    return f"{rep.stage:15s} {rep.status:12s} {rep.wall_time:8.1f}s{extra}"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = PipelineConfig.load(args.config) if args.config \
            else PipelineConfig()
        if args.out:
            cfg.out_dir = args.out
        if args.threads:
            cfg.threads = args.threads
        cfg.validate()
        pipe = Pipeline(cfg, reseed=args.reseed)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "all":
            reports = pipe.run_all()
            for rep in reports:
                print(_report_line(rep))
            total = sum(r.wall_time for r in reports)
            if all(r.status == "verified" for r in reports) \
                    and len(reports) == len(STAGES):
                print(f"diffusion certificate issued  (total {total:.1f}s)")
                return EXIT_VERIFIED
            first_bad = next(r for r in reports if r.status != "verified")
            print(f"pipeline stopped at {first_bad.stage}: {first_bad.status}")
            return EXIT_INCONCLUSIVE if first_bad.status == "inconclusive" \
                else EXIT_FAILED
        if args.command == "plot":
            out = args.output or f"{args.kind}.csv"
            if args.kind == "energy_change_vs_theta" and args.samples <= 0:
                print("sample count must be positive", file=sys.stderr)
                return EXIT_CONFIG
            path = pipe.emit_plot(args.kind, out, samples=args.samples)
            print(f"wrote {path}")
            return EXIT_VERIFIED
        rep = pipe.run_stage(args.command)
        print(_report_line(rep))
        if rep.status == "verified":
            return EXIT_VERIFIED
        return EXIT_INCONCLUSIVE if rep.status == "inconclusive" \
            else EXIT_FAILED
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
