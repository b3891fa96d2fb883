"""Command line interface.

    scenario-eval run  [--config FILE] [--out DIR] [--seed N] [--threads N]
    scenario-eval plot --in DIR [--out DIR]

Exit codes: 0 success, 2 configuration/input problems, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericalInstabilityError, ScenarioEvalError
from .harness import resolve_out_dir, run
from .plots import plot_report_dir

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenario-eval",
        description="Simulated evaluation of counterfactual scenario projections")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment and write report CSVs")
    run_p.add_argument("--config", default=None, metavar="FILE",
                       help="key = value config file (defaults built in)")
    run_p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (or set SCENARIO_EVAL_OUT)")
    run_p.add_argument("--seed", type=int, default=None, help="override the seed")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker threads for the SIR solves")

    plot_p = sub.add_parser("plot", help="render SVG figures from a report directory")
    plot_p.add_argument("--in", dest="report_dir", required=True, metavar="DIR",
                        help="report directory produced by 'run'")
    plot_p.add_argument("--out", default=None, metavar="DIR",
                        help="where to write the SVGs (default: the report dir)")
    return parser


def _cmd_run(args) -> int:
    out_dir = resolve_out_dir(args.out)
    report = run(args.config, out_dir, seed=args.seed, threads=args.threads)
    n_rows = len(report.report_rows)
    print(f"wrote report to {out_dir} "
          f"(seed {report.settings.experiment.seed}, {n_rows} report rows)")
    for row in report.report_rows:
        approach, variant, model_id, scenario_index = row[0], row[1], row[2], row[3]
        mae, ks_d = row[8], row[9]
        mae_s = f"{mae:.4f}" if mae != "" else "   n/a"
        ks_s = f"{ks_d:.3f}" if ks_d != "" else "  n/a"
        print(f"  approach {approach} {variant:<13} model {model_id:>2} "
              f"scenario {scenario_index}: mae {mae_s}  ks_d {ks_s}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    written = plot_report_dir(args.report_dir, args.out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_plot(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ScenarioEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
