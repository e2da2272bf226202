"""Command-line entry point.

    psdselect run --config exp.json --out results/ [--jobs N]
    psdselect synth --spec synth.json --seed 7 --out data/manifest.json
    psdselect validate --config exp.json
    psdselect stats --table accuracies.csv --control "LR + Burg"

Exit status: 0 on success, 1 on configuration or input errors, 2 when a
run finished but some combinations failed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import PsdSelectError
from .pipeline import ExperimentConfig, combination_count, load_source, resolve_units, run_experiment, validate_config
from .signals import SynthSpec, synth_generate, write_dataset
from .stats import ComparisonTable, friedman_test, posthoc_vs_control, significance_report

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    out = args.out or config.output_dir
    if out is None:
        print("error: no output directory (--out or output_dir in the config)", file=sys.stderr)
        return EXIT_CONFIG
    report = run_experiment(config, jobs=args.jobs, out_dir=out)
    n_ok = sum(1 for c in report.data["combinations"] if "error" not in c)
    print(f"{n_ok}/{len(report.data['combinations'])} combinations evaluated; tables written to {out}")
    if report.data["ranking"]:
        best = report.data["ranking"][0]
        print(f"best combination: {best['combination']} (average rank {best['average_rank']:.3g})")
    if not report.ok:
        for f in report.failures:
            print(f"failed: {f}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec)
    path = write_dataset(synth_generate(spec, args.seed), args.out)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    dataset = load_source(config)
    problems = validate_config(config, dataset)
    units = resolve_units(config, dataset)
    n_combo, n_base = combination_count(config, len(units))
    print(f"{len(dataset.trials)} trials, {len(units)} evaluation units, "
          f"{n_combo} selection combinations, {n_base} baselines x {len(config.classifiers)} classifiers")
    for p in problems:
        print(f"problem: {p}", file=sys.stderr)
    return EXIT_CONFIG if problems else EXIT_OK


def _cmd_stats(args) -> int:
    table = ComparisonTable.from_csv(args.table)
    fr = friedman_test(table)
    ph = posthoc_vs_control(fr, args.control)
    print(f"# Friedman chi2 = {fr.statistic:.6g}, df = {fr.df}, p = {fr.pvalue:.6g}, control = {ph.control}")
    text = ph.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    n_sig = sum(c.significant for c in significance_report(ph, args.alpha))
    print(f"# {n_sig} of {len(ph.methods)} comparisons significant at alpha = {args.alpha} (Hommel)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psdselect", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a full experiment")
    r.add_argument("--config", required=True, help="experiment JSON")
    r.add_argument("--out", help="output directory (overrides output_dir in the config)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--spec", required=True, help="synthetic spec JSON")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="manifest path")
    s.set_defaults(func=_cmd_synth)

    v = sub.add_parser("validate", help="dry-run checks on a config")
    v.add_argument("--config", required=True, help="experiment JSON")
    v.set_defaults(func=_cmd_validate)

    t = sub.add_parser("stats", help="Friedman test and post-hoc p-values for a CSV table")
    t.add_argument("--table", required=True, help="CSV, one row per method, one column per unit")
    t.add_argument("--control", help="control method (default: best average rank)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--out", help="write the post-hoc CSV here")
    t.set_defaults(func=_cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PsdSelectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
