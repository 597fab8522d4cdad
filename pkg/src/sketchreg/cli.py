"""Command-line front end.

One subcommand per experiment.  Exit status: 0 when the experiment's
thresholds are met, 2 on a threshold miss, 1 on any error (including
malformed configs).
"""

from __future__ import annotations

import argparse
import sys

from .bench import emit_report, run_experiment
from .config import EXPERIMENTS, default_config, load_config


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sketchreg",
        description="Sketched k-sparse regression experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for exp in EXPERIMENTS:
        sp = sub.add_parser(exp, help=f"run the {exp} experiment")
        sp.add_argument("--config", metavar="PATH", help="JSON config overriding defaults")
        sp.add_argument("--seed", type=int, metavar="U64", help="master seed override")
        sp.add_argument("--trials", type=int, metavar="N", help="trial count override")
        sp.add_argument("--out", metavar="DIR", default=".", help="report output directory")
        sp.add_argument(
            "--format", choices=("csv", "json", "svg"), default="json", help="report format"
        )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, args.experiment)
        else:
            cfg = default_config(args.experiment)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.trials is not None:
            cfg.trials = args.trials
        report = run_experiment(cfg)
        path = emit_report(report, args.out, args.format)
        met = bool(report.summary.get("thresholds_met"))
        for key, val in sorted(report.summary.items()):
            if key in ("hist_metric",):
                continue
            print(f"{args.experiment}: {key} = {val}")
        print(f"{args.experiment}: report written to {path}")
        print(f"{args.experiment}: {'PASS' if met else 'THRESHOLD MISS'}")
        return 0 if met else 2
    except Exception as exc:  # argparse errors exit on their own
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
