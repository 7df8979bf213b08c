"""``pes-nn`` command line: run experiments, export data, explain saved models."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import PESError
from .experiments import RUNNERS, emit_reports, generate_dataset, load_config
from .explain import background_sample, shapley_values
from .trainer import load_model

log = logging.getLogger("pesnn")


def _apply_overrides(config, args):
    if getattr(args, "seed", None) is not None:
        config.seeds = [args.seed]
    if getattr(args, "out", None):
        config.output_dir = args.out
    return config


def cmd_run(args):
    config = _apply_overrides(load_config(args.config), args)
    outputs = RUNNERS[config.family](config, jobs=args.jobs)
    paths = emit_reports(outputs, config)
    for name, p in paths.items():
        print(f"{name}: {p}")


def write_dataset_csv(path, X, y, column_names):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(column_names) + ["target"])
        for row, t in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])


def read_dataset_csv(path):
    """Returns (X, target or None, column names); a trailing ``target`` column is split off."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PESError(f"{path} is empty")
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header and header[-1] == "target":
        return body[:, :-1], body[:, -1], header[:-1]
    return body, None, header


def cmd_gen_data(args):
    config = _apply_overrides(load_config(args.config), args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in config.seeds:
        X, _, y = generate_dataset(config, seed)
        path = out / f"data_{config.experiment}_seed{seed}.csv"
        write_dataset_csv(path, X, y, config.scenario.column_names)
        print(path)


def cmd_shap(args):
    model = load_model(args.model_file)
    X, _, names = read_dataset_csv(args.data_file)
    if model.feature_names and list(names) != list(model.feature_names):
        raise PESError(f"data columns {names} do not match model inputs {model.feature_names}")
    if args.background:
        bg, _, _ = read_dataset_csv(args.background)
    else:
        bg = X[background_sample(X, args.background_size, args.seed or 0)]
    phi = shapley_values(model.predict, X, bg)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["row", "feature", "x", "phi_model"])
        for i in range(X.shape[0]):
            for j, name in enumerate(names):
                w.writerow([i, name, repr(float(X[i, j])), repr(float(phi[i, j]))])
    finally:
        if args.out:
            out.close()


def build_parser():
    parser = argparse.ArgumentParser(prog="pes-nn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and write reports")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--jobs", type=int, default=1, help="parallel grid points")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen-data", help="write the clean scenario datasets as CSV")
    gen.add_argument("config")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen_data)

    shap = sub.add_parser("shap", help="Shapley values of a saved model on a CSV dataset")
    shap.add_argument("model_file")
    shap.add_argument("data_file")
    shap.add_argument("--background", help="CSV of background rows (default: subsample of data)")
    shap.add_argument("--background-size", type=int, default=100)
    shap.add_argument("--seed", type=int)
    shap.add_argument("--out", help="output CSV (default: stdout)")
    shap.set_defaults(func=cmd_shap)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except BrokenPipeError:
        return 1
    except (PESError, FloatingPointError, OSError) as exc:
        print(f"pes-nn: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
