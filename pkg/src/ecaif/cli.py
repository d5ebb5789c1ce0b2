"""Command-line entry point: ``ecaif run|heatmap|timeline``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import EcaifError
from .scenario import TraceLog, emit_heatmap, emit_timeline, format_timeline, load_scenario, run


def _mode(value):
    if value != "ecaif" and not value.startswith("agent:"):
        raise argparse.ArgumentTypeError("mode must be 'ecaif' or 'agent:<what>'")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="ecaif", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file (or a shipped scenario name)")
    p.add_argument("scenario")
    p.add_argument("--out", type=Path, help="directory for trace.jsonl, summary.json, heatmaps, timeline")
    p.add_argument("--mode", type=_mode)
    p.add_argument("--horizon", type=int)
    p.add_argument("--precision", type=float)
    p.add_argument("--select", choices=["argmax", "sample"])
    p.add_argument("--seed", type=int)
    p.add_argument("--timesteps", type=int)

    p = sub.add_parser("heatmap", help="observation counts of one what from a saved trace")
    p.add_argument("trace", type=Path)
    p.add_argument("--what", required=True)

    p = sub.add_parser("timeline", help="per-timestep selections from a saved trace")
    p.add_argument("trace", type=Path)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_scenario(args.scenario).with_overrides(
                mode=args.mode, horizon=args.horizon, precision=args.precision,
                select=args.select, seed=args.seed, timesteps=args.timesteps)
            trace = run(cfg)
            if args.out is not None:
                trace.write(args.out)
            print(format_timeline(emit_timeline(trace)), end="")
            print(json.dumps({"executed": trace.summary()["executed_actions"],
                              "paths": trace.summary()["object_paths"]}))
        elif args.command == "heatmap":
            print(emit_heatmap(TraceLog.read(args.trace), args.what).to_csv(), end="")
        else:
            print(format_timeline(emit_timeline(TraceLog.read(args.trace))), end="")
    except (EcaifError, OSError) as exc:
        print(f"ecaif: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
