"""Command line entry point.

    phcq run --config configs/defaults.cfg --seed 3 --strategy phc --out run.csv
    phcq compare --config configs/defaults.cfg --seeds 0,1,2 --out-dir results/
    phcq selftest

Exit status is 0 on success, 1 for configuration errors and 2 for failures
while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    ExperimentConfig,
    compare_strategies,
    emit_csv,
    emit_plot_script,
    run_trace,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_STRATEGY_ALIASES = {"phc": "phc", "semi": "semi_uniform", "semi_uniform": "semi_uniform"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="phcq", description="Probabilistic hill-climbing exploration for robust Q-learning.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment and write its per-period CSV")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--strategy", choices=sorted(_STRATEGY_ALIASES))
    run.add_argument("--out", type=Path, default=Path("run.csv"))
    run.add_argument("--qtable", type=Path, help="also write a snapshot of the learned clusters")

    cmp_ = sub.add_parser("compare", help="PHC against semi-uniform exploration over several seeds")
    cmp_.add_argument("--config", required=True, type=Path)
    cmp_.add_argument("--seeds", required=True, type=_seeds)
    cmp_.add_argument("--out-dir", required=True, type=Path)

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return ap


def _load(path: Path, **overrides) -> ExperimentConfig:
    if not path.is_file():
        raise ConfigError("config", f"no such file: {path}")
    return ExperimentConfig.from_file(path, **overrides)


def cmd_run(args) -> int:
    strategy = _STRATEGY_ALIASES.get(args.strategy) if args.strategy else None
    cfg = _load(args.config, seed=args.seed, strategy=strategy)
    trace = run_trace(cfg)
    emit_csv(trace.records, args.out)
    if args.qtable:
        trace.table.snapshot(args.qtable)
    last = trace.records[-1] if trace.records else None
    if last:
        print(f"{cfg.strategy} seed={cfg.seed}: final coefficient {last.coefficient:.4f}, "
              f"{last.selection_samples} selection samples -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = _load(args.config)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    summary = compare_strategies(base.replace(strategy="phc"), base.replace(strategy="semi_uniform"),
                                 args.seeds, out_dir=args.out_dir)
    csvs = sorted(args.out_dir.glob("*_seed*.csv"))
    emit_plot_script(csvs, args.out_dir / "plot_convergence.py")
    report = {
        "seeds": summary.seeds,
        "phc_periods_to_convergence": summary.phc_periods,
        "semi_periods_to_convergence": summary.semi_periods,
        "phc_final_coefficients": summary.phc_final,
        "semi_final_coefficients": summary.semi_final,
        "median_phc": summary.median_phc,
        "median_semi": summary.median_semi,
        "speedup": summary.speedup,
        "median_per_seed_ratio": summary.median_ratio,
    }
    (args.out_dir / "summary.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"median periods to convergence: phc {summary.median_phc}, "
          f"semi-uniform {summary.median_semi}, speedup {summary.speedup:.2f}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    return EXIT_OK if run_all() else EXIT_RUNTIME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "compare": cmd_compare, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to one exit code
        logging.getLogger("phcq").debug("failure", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
