"""Paired informed-vs-agnostic experiments over corruption grids and seeds.

Every grid point ``(level, seed)`` draws one clean dataset, corrupts its
training and validation splits, and trains two networks on the identical
corrupted data: one with the configured constraints and one without. Both are
scored on the clean test split, by the task metric and by the Shapley distance
to the data-generating function.

Configs are JSON documents whose keys mirror ``ExperimentConfig`` fields; any
key left out takes the experiment's default (see ``default_config``).
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constraints import LossWeights, PESConstraint
from .errors import PESError
from .explain import ShapReport, background_sample, shapley_values
from .metrics import MetricRecord
from .nn import DataMatrix
from .synth import (CorruptionSpec, ScenarioConfig, classification_scenario, corrupt,
                    gen_classification_targets, regression_function, regression_scenario,
                    sample_mvn, split_indices)
from .trainer import TrainConfig, default_weights, evaluate, save_model, train

log = logging.getLogger(__name__)

EXPERIMENTS = ("exp1_src", "exp1_or", "exp2_src", "exp2_or", "exp3_src", "exp3_or")
MODEL_TAGS = ("seann", "agnostic")

# stream ids for np.random.default_rng([scenario_seed, seed, stream, ...])
_DATA, _LABELS, _SPLIT, _CORRUPT, _BACKGROUND = range(5)


@dataclass
class Duplicate:
    """Extra model column copying ``source``; its reference Shapley column is ``reference``."""

    source: str
    name: str
    reference: str

    def to_dict(self):
        return {"source": self.source, "name": self.name, "reference": self.reference}


@dataclass
class ExperimentConfig:
    experiment: str
    scenario: ScenarioConfig
    corruption_mode: str
    corruption_columns: str | list[str]
    levels: list[float]
    constraints: list[PESConstraint]
    train: TrainConfig
    seeds: list[int]
    output_dir: str = "results"
    split_sizes: tuple = (600, 200, 200)
    weights: dict = field(default_factory=lambda: {"mode": "explicit", "lambda0": 0.1})
    background_size: int = 100
    drop_columns: list[str] = field(default_factory=list)
    duplicate: Duplicate | None = None
    agnostic_duplicate: bool = False
    save_models: bool = False

    def __post_init__(self):
        self.levels = [float(x) for x in self.levels]
        self.seeds = [int(s) for s in self.seeds]
        self.split_sizes = tuple(int(s) for s in self.split_sizes)
        if isinstance(self.duplicate, dict):
            self.duplicate = Duplicate(**self.duplicate)
        self.validate()

    @property
    def task(self) -> str:
        return self.scenario.task

    @property
    def family(self) -> str:
        return self.experiment.split("_")[0]

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise PESError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.levels:
            raise PESError("corruption grid is empty")
        if not self.seeds:
            raise PESError("no seeds given")
        if len(set(self.seeds)) != len(self.seeds):
            raise PESError("seeds must be distinct")
        for lvl in self.levels:
            CorruptionSpec(self.corruption_mode, lvl, self.corruption_columns)
        if sum(self.split_sizes) != self.scenario.m:
            raise PESError(f"split sizes {self.split_sizes} do not sum to m={self.scenario.m}")
        mode = self.weights.get("mode")
        if mode not in ("explicit", "confidence"):
            raise PESError("weights.mode must be 'explicit' or 'confidence'")
        if mode == "explicit" and not 0 < float(self.weights.get("lambda0", 0)) <= 1:
            raise PESError("explicit weights need 0 < lambda0 <= 1")
        names = self.model_columns(seann=True)
        for c in self.constraints:
            if names.count(c.feature) != 1:
                raise PESError(f"constraint feature {c.feature!r} is not a model input {names}")
        if self.family == "exp1":
            if any(b < a for a, b in zip(self.levels, self.levels[1:])):
                raise PESError("exp1 corruption levels must be non-decreasing")
            if self.task == "regression" and any(c.feature == "bmi" for c in self.constraints):
                raise PESError("bmi acts nonlinearly and has no SRC; it cannot be constrained")
        if self.family == "exp2":
            cols = self.corruption_columns
            if cols == "all" or len(cols) != 1:
                raise PESError("exp2 corrupts exactly one column")
            if [c.feature for c in self.constraints] != list(cols):
                raise PESError("exp2 needs exactly one constraint, on the corrupted column")
        if self.family == "exp3":
            if not self.drop_columns or self.duplicate is None:
                raise PESError("exp3 must declare dropped columns and a duplicated column")
            if any(c.feature == self.duplicate.name for c in self.constraints):
                raise PESError("the duplicated column must stay unconstrained")

    def model_columns(self, seann: bool) -> list[str]:
        return [name for name, _, _ in self._layout(seann)]

    def _layout(self, seann):
        """(model column name, source column, reference column) triples."""
        names = list(self.scenario.column_names)
        for d in self.drop_columns:
            if d not in names:
                raise PESError(f"cannot drop unknown column {d!r}")
        out = [(n, names.index(n), names.index(n)) for n in names if n not in self.drop_columns]
        dup = self.duplicate
        if dup is not None and (seann or self.agnostic_duplicate):
            if dup.source not in names or dup.reference not in names:
                raise PESError("duplicate source/reference must be scenario columns")
            pos = [n for n, _, _ in out].index(dup.source) + 1
            out.insert(pos, (dup.name, names.index(dup.source), names.index(dup.reference)))
        return out

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "scenario": self.scenario.to_dict(),
            "corruption_mode": self.corruption_mode,
            "corruption_columns": self.corruption_columns,
            "levels": list(self.levels),
            "constraints": [c.to_dict() for c in self.constraints],
            "train": self.train.to_dict(),
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "split_sizes": list(self.split_sizes),
            "weights": dict(self.weights),
            "background_size": self.background_size,
            "drop_columns": list(self.drop_columns),
            "duplicate": self.duplicate.to_dict() if self.duplicate else None,
            "agnostic_duplicate": self.agnostic_duplicate,
            "save_models": self.save_models,
        }


def _true_constraints(kind, scenario, features, confidence=10000.0):
    names = scenario.column_names
    return [PESConstraint(kind, f, float(scenario.betas[1 + names.index(f)]), confidence)
            for f in features]


def default_config(experiment: str) -> ExperimentConfig:
    """Defaults for each experiment; constraint values are the true coefficients."""
    if experiment not in EXPERIMENTS:
        raise PESError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    family, kind = experiment.split("_")
    if kind == "src":
        scenario, pes = regression_scenario(), "SRC"
    else:
        scenario, pes = classification_scenario(label_rule="threshold"), "OR"
    kw = dict(experiment=experiment, scenario=scenario,
              train=TrainConfig(constraint_units="raw"), seeds=list(range(10)))
    if family == "exp1":
        eligible = ["mercury", "fish_intake", "perceived_stress"]
        if kind == "src":
            kw.update(corruption_mode="gaussian_noise", levels=[0.0, 0.25, 0.5, 0.75, 1.0, 1.5])
        else:
            kw.update(corruption_mode="mcar_impute", levels=[0.0, 0.25, 0.5])
        kw.update(corruption_columns="all", constraints=_true_constraints(pes, scenario, eligible))
    elif family == "exp2":
        kw.update(corruption_mode="gaussian_noise", corruption_columns=["fish_intake"],
                  levels=[0.75 if kind == "src" else 1.5],
                  constraints=_true_constraints(pes, scenario, ["fish_intake"]))
    else:
        kw.update(corruption_mode="gaussian_noise", corruption_columns="all", levels=[0.0],
                  constraints=_true_constraints(pes, scenario, ["mercury"]),
                  drop_columns=["fish_intake"],
                  duplicate=Duplicate("mercury", "mercury_dup", "fish_intake"))
    return ExperimentConfig(**kw)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Overlay a (possibly partial) config mapping on the experiment's defaults."""
    d = {k: v for k, v in d.items() if k != "_meta"}
    if "experiment" not in d:
        raise PESError("config needs an 'experiment' key")
    base = default_config(d["experiment"]).to_dict()
    unknown = set(d) - set(base)
    if unknown:
        raise PESError(f"unknown config keys {sorted(unknown)}")
    for key in ("scenario", "train"):
        if key in d:
            base[key] = {**base[key], **d.pop(key)}
    base.update(d)
    constraints = base["constraints"]
    if isinstance(constraints, str):
        constraints = load_constraints(constraints)
    base["constraints"] = [c if isinstance(c, PESConstraint) else PESConstraint.from_dict(c)
                           for c in constraints]
    base["scenario"] = ScenarioConfig.from_dict(base["scenario"])
    base["train"] = TrainConfig(**base["train"])
    return ExperimentConfig(**base)


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_constraints(path) -> list[PESConstraint]:
    """Constraint declarations from JSON (list of records) or CSV with a header row."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        out = []
        for r in rows:
            r = {k: v for k, v in r.items() if v not in (None, "")}
            for k in ("value", "confidence", "perturbation"):
                if k in r:
                    r[k] = float(r[k])
            out.append(PESConstraint.from_dict(r))
        return out
    return [PESConstraint.from_dict(r) for r in json.loads(path.read_text(encoding="utf-8"))]


@dataclass
class RunResult:
    experiment: str
    model_tag: str
    level: float
    seed: int
    metric: MetricRecord
    delta_shap: dict
    sum_delta_shap: float
    stopped_epoch: int
    weights_mode: str
    shap_slope: dict = field(default_factory=dict)


@dataclass
class PointOutput:
    level: float
    seed: int
    results: list[RunResult]
    reports: dict
    models: dict


def _rng(config, seed, *stream):
    return np.random.default_rng([config.scenario.seed, seed, *stream])


def generate_dataset(config: ExperimentConfig, seed: int):
    """Clean inputs, training targets and evaluation targets for one seed."""
    sc = config.scenario
    X = sample_mvn(sc, _rng(config, seed, _DATA))
    if sc.task == "regression":
        Y = regression_function(X, sc.betas)
        return X, Y, Y
    _, labels = gen_classification_targets(X, sc.betas, _rng(config, seed, _LABELS), sc.label_rule)
    return X, labels, labels


def _weights_for(config, constraints, n_train, p):
    if not constraints:
        return LossWeights(1.0)
    w = config.weights
    if w["mode"] == "explicit":
        lam0 = float(w["lambda0"])
        lambdas = w.get("lambdas")
        if lambdas is None:
            lambdas = [(1.0 - lam0) / len(constraints)] * len(constraints)
        return LossWeights(1.0 - float(np.sum(lambdas)), lambdas)
    return default_weights(constraints, n_train, p, w.get("data_confidence"))


def _slope(x, phi):
    x = x - x.mean()
    den = float(x @ x)
    return float(x @ (phi - phi.mean()) / den) if den > 0 else 0.0


def run_point(config: ExperimentConfig, level_index: int, seed: int) -> PointOutput:
    """Train and score both models at one grid point."""
    level = config.levels[level_index]
    X, Ytrain, Yeval = generate_dataset(config, seed)
    tr, va, te = split_indices(X.shape[0], config.split_sizes, _rng(config, seed, _SPLIT))
    names = config.scenario.column_names
    Xc = X.copy()
    for k, idx in enumerate((tr, va)):
        spec = CorruptionSpec(config.corruption_mode, level, config.corruption_columns)
        Xc[idx] = corrupt(X[idx], spec, names, rng=_rng(config, seed, _CORRUPT, level_index, k))
    bg = tr[background_sample(tr, config.background_size, _rng(config, seed, _BACKGROUND))]
    phi_ref_full = shapley_values(config.scenario.true_function(), X[te], X[bg])

    results, reports, models = [], {}, {}
    for tag in MODEL_TAGS:
        seann = tag == "seann"
        layout = config._layout(seann)
        cols = [s for _, s, _ in layout]
        ref_cols = [r for _, _, r in layout]
        mnames = [n for n, _, _ in layout]
        constraints = list(config.constraints) if seann else []
        weights = _weights_for(config, constraints, len(tr), len(cols))
        model = train(DataMatrix(Xc[tr][:, cols], mnames, Ytrain[tr]),
                      DataMatrix(Xc[va][:, cols], mnames, Ytrain[va]),
                      constraints, weights, config.train, config.task)
        ev = evaluate(model, X[te][:, cols], Yeval[te])
        phi_model = shapley_values(model.predict, X[te][:, cols], X[bg][:, cols])
        report = ShapReport(mnames, X[te][:, cols], phi_model, phi_ref_full[:, ref_cols],
                            {"source": "training split (clean values)", "size": int(len(bg)),
                             "seed": seed},
                            [names[r] for r in ref_cols])
        wmode = "none" if not constraints else config.weights["mode"]
        results.append(RunResult(
            config.experiment, tag, level, seed, ev["metric"], report.delta_by_feature(),
            report.sum_delta_shap, model.stopped_epoch, wmode,
            {n: _slope(report.x_values[:, j], phi_model[:, j]) for j, n in enumerate(mnames)},
        ))
        reports[tag] = report
        models[tag] = model
    return PointOutput(level, seed, results, reports, models)


def _point_job(args):
    cfg_dict, li, seed = args
    return run_point(config_from_dict(cfg_dict), li, seed)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[PointOutput]:
    """All grid points in (level, seed) order, optionally in parallel processes."""
    grid = [(li, s) for li in range(len(config.levels)) for s in config.seeds]
    if jobs <= 1:
        outs = []
        for li, s in grid:
            log.info("%s level=%s seed=%s", config.experiment, config.levels[li], s)
            outs.append(run_point(config, li, s))
        return outs
    cfg = config.to_dict()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_point_job, [(cfg, li, s) for li, s in grid]))


def _check_family(config, family):
    if config.family != family:
        raise PESError(f"{config.experiment} is not an {family} configuration")


def run_experiment1(config: ExperimentConfig, jobs=1) -> list[PointOutput]:
    _check_family(config, "exp1")
    return run_experiment(config, jobs)


def run_experiment2(config: ExperimentConfig, jobs=1) -> list[PointOutput]:
    _check_family(config, "exp2")
    return run_experiment(config, jobs)


def run_experiment3(config: ExperimentConfig, jobs=1) -> list[PointOutput]:
    _check_family(config, "exp3")
    return run_experiment(config, jobs)


RUNNERS = {"exp1": run_experiment1, "exp2": run_experiment2, "exp3": run_experiment3}


def results_table(outputs) -> list[RunResult]:
    return [r for o in outputs for r in o.results]


def _feature_order(results):
    seen = []
    for r in results:
        for k in r.delta_shap:
            if k not in seen:
                seen.append(k)
    return seen


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_results_csv(results, path):
    feats = _feature_order(results)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "model", "level", "seed", "metric", "value", "n",
                    "stopped_epoch", "weights_mode", "sum_delta_shap"]
                   + [f"delta_shap_{f}" for f in feats] + [f"shap_slope_{f}" for f in feats])
        for r in results:
            w.writerow([r.experiment, r.model_tag, _fmt(r.level), r.seed, r.metric.name,
                        _fmt(r.metric.value), r.metric.n, r.stopped_epoch, r.weights_mode,
                        _fmt(r.sum_delta_shap)]
                       + [_fmt(r.delta_shap.get(f)) for f in feats]
                       + [_fmt(r.shap_slope.get(f)) for f in feats])


def _stats(values):
    v = np.asarray(values, dtype=float)
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75), "n": int(v.size)}


def summarize(results) -> dict:
    """Median and interquartile range across seeds, per level and model tag."""
    feats = _feature_order(results)
    levels = sorted({r.level for r in results})
    rows = []
    for lvl in levels:
        for tag in MODEL_TAGS:
            sub = [r for r in results if r.level == lvl and r.model_tag == tag]
            if not sub:
                continue
            rows.append({
                "level": lvl,
                "model": tag,
                "metric": sub[0].metric.name,
                "value": _stats([r.metric.value for r in sub]),
                "sum_delta_shap": _stats([r.sum_delta_shap for r in sub]),
                "delta_shap": {f: _stats([r.delta_shap[f] for r in sub if f in r.delta_shap])
                               for f in feats if any(f in r.delta_shap for r in sub)},
                "stopped_epoch": _stats([r.stopped_epoch for r in sub]),
            })
    return {"experiment": results[0].experiment if results else None, "rows": rows}


def write_shap_csv(outputs, tag, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "seed", "test_row", "feature", "reference_feature", "x",
                    "phi_model", "phi_reference"])
        for o in outputs:
            rep = o.reports[tag]
            refs = dict(zip(rep.feature_names, rep.reference_features))
            for i, name, x, pm, pr in rep.rows():
                w.writerow([_fmt(o.level), o.seed, i, name, refs[name], _fmt(x), _fmt(pm), _fmt(pr)])


def lock_dict(config: ExperimentConfig) -> dict:
    d = config.to_dict()
    d["_meta"] = {"package_version": __version__,
                  "shapley_value_function": "interventional",
                  "weights_mode": config.weights["mode"]}
    return d


def emit_reports(outputs, config: ExperimentConfig, out_dir=None) -> dict:
    """Write results.csv, summary.json, shap_<exp>_<model>.csv and config.lock.json."""
    results = results_table(outputs)
    if not results:
        raise PESError("no results to report")
    out = Path(out_dir or config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PESError(f"cannot create output directory {out}: {exc}") from exc
    paths = {"results": out / "results.csv", "summary": out / "summary.json",
             "lock": out / "config.lock.json"}
    write_results_csv(results, paths["results"])
    paths["summary"].write_text(json.dumps(summarize(results), indent=2) + "\n", encoding="utf-8")
    lock = lock_dict(config)
    lock["output_dir"] = str(out)
    paths["lock"].write_text(json.dumps(lock, indent=2) + "\n", encoding="utf-8")
    for tag in MODEL_TAGS:
        p = out / f"shap_{config.experiment}_{tag}.csv"
        write_shap_csv(outputs, tag, p)
        paths[f"shap_{tag}"] = p
    if config.save_models:
        for o in outputs:
            for tag, model in o.models.items():
                save_model(model, out / f"model_{config.experiment}_{tag}_level{o.level:g}_seed{o.seed}.json")
    return paths


def read_results_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
