"""Command line entry point: one subcommand per study kind plus a report
renderer.  Exit code 0 iff every configured assertion passed."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import default_config, parse_config_file, run_study
from .reporting import render_report

_COMMANDS = {
    "simulate": "simulate",
    "converge-n": "converge_N",
    "noise-rates": "noise_rates",
    "wick-rates": "wick_rates",
    "diverging-bound": "diverging_bound",
    "inequalities": "inequalities",
    "focusing-gate": "focusing_gate",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wickgp",
        description="Hermite-spectral studies of the renormalized noisy Gross-Pitaevskii flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind} study")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads for realizations")
        p.add_argument("--verbose", action="store_true")
    rep = sub.add_parser("report", help="render figures next to existing study outputs")
    rep.add_argument("--out", required=True, help="directory holding study CSV/JSON outputs")
    rep.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        written = render_report(args.out)
        for path in written:
            print(f"wrote {path}")
        if not written:
            print(f"no study outputs found in {args.out}", file=sys.stderr)
            return 1
        return 0

    kind = _COMMANDS[args.command]
    overrides = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    cfg = default_config(kind, **overrides)

    result = run_study(cfg)
    result.write(cfg.output_path)
    for name, ok in result.summary.get("assertions", {}).items():
        print(f"[{kind}] {'PASS' if ok else 'FAIL'} {name}")
    if args.verbose:
        print(json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    print(f"[{kind}] outputs in {cfg.output_path}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
