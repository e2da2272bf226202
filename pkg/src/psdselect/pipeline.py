"""Configuration-driven experiment runner.

One run takes a dataset (a manifest on disk or a synthetic recipe), cuts
every trial into segments, extracts PSD features with each configured
estimator and, for every subject and task pair, evaluates

* a no-selection baseline per classifier, and
* every (selection criterion, classifier) combination through the
  incremental top-k cross-validation curve.

Gains over the baseline are then ranked across combinations and tested
with the Friedman test and control-method post-hoc adjustments.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ClassifierSpec, CvConfig, cv_accuracy, incremental_evaluation
from .errors import ConfigError, PsdSelectError
from .selection import CRITERIA, CRITERION_LABELS, LabeledFeatureMatrix, forward_select, rank_univariate
from .signals import TASKS, Dataset, SynthSpec, load_dataset, segment_length, segment_trial, synth_generate
from .spectral import EXTRACTION_METHODS, ExtractionConfig, FrequencyGrid, canonical_grid, extract_features
from .stats import (
    ComparisonTable,
    friedman_test,
    percentage_gain,
    posthoc_vs_control,
    robust_rank,
    significance_report,
)

log = logging.getLogger(__name__)

EXTRACTION_LABELS = {"welch": "Welch", "burg": "Burg", "music": "MUSIC"}
CV_CAVEAT = (
    "cross-validation folds are drawn over half-second segments; segments cut from the same "
    "trial can fall in both training and test folds"
)


def combination_label(selection: str, extraction: str) -> str:
    return f"{CRITERION_LABELS[selection]} + {EXTRACTION_LABELS[extraction]}"


@dataclass(frozen=True)
class RedundancyConfig:
    """Append noisy copies of the top FDR-ranked features of each unit.

    Each copy is ``f + jitter * std(f) * N(0, 1)``. This builds a feature
    pool where a univariate ranking fills its top slots with near-duplicates.
    """

    top: int = 1
    copies: int = 24
    jitter: float = 0.05

    def __post_init__(self):
        if self.top < 1 or self.copies < 1 or self.jitter < 0:
            raise ConfigError("redundancy needs top >= 1, copies >= 1 and jitter >= 0")

    def to_dict(self):
        return {"top": self.top, "copies": self.copies, "jitter": self.jitter}


def _grid_from(d) -> FrequencyGrid:
    if d is None:
        return canonical_grid()
    if isinstance(d, list):
        return FrequencyGrid(d)
    if "frequencies" in d:
        return FrequencyGrid(d["frequencies"])
    return FrequencyGrid.uniform(float(d.get("start", 0.0)), float(d["step"]), int(d["count"]))


def _classifier_from(c) -> ClassifierSpec:
    if isinstance(c, str):
        return ClassifierSpec(c)
    return ClassifierSpec(c["name"], dict(c.get("params", {})))


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = None
    synthetic: SynthSpec | None = None
    seed: int = 0
    subjects: tuple | None = None
    task_pairs: tuple | None = None
    segment_seconds: float = 0.5
    grid: FrequencyGrid = field(default_factory=canonical_grid)
    extraction_methods: tuple = EXTRACTION_METHODS
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    selections: tuple = CRITERIA
    classifiers: tuple = (ClassifierSpec("lda"), ClassifierSpec("qda"), ClassifierSpec("svm"))
    cap: int = 25
    mi_bins: int | None = None
    mrmr_exclude_self: bool = False
    cv: CvConfig = field(default_factory=CvConfig)
    redundancy: RedundancyConfig | None = None
    control: str | None = None
    alpha: float = 0.05
    keep_raw: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if (self.manifest is None) == (self.synthetic is None):
            raise ConfigError("give exactly one dataset source: a manifest or a synthetic spec")
        # an empty selection axis is allowed: the run then scores baselines only
        for name, axis in (("extraction", self.extraction_methods), ("classifier", self.classifiers)):
            if not axis:
                raise ConfigError(f"the {name} axis is empty")
        for m in self.extraction_methods:
            if m not in EXTRACTION_METHODS:
                raise ConfigError(f"unknown extraction method {m!r}")
        for s in self.selections:
            if s not in CRITERIA:
                raise ConfigError(f"unknown selection criterion {s!r}")
        if self.cap < 1:
            raise ConfigError("cap must be >= 1")
        if self.task_pairs is not None:
            for pair in self.task_pairs:
                if len(pair) != 2 or pair[0] == pair[1] or any(t not in TASKS for t in pair):
                    raise ConfigError(f"invalid task pair {pair!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        try:
            ds = d["dataset"]
            manifest = ds.get("manifest")
            if manifest is not None and base_dir is not None and not os.path.isabs(manifest):
                manifest = str(Path(base_dir) / manifest)
            synthetic = SynthSpec.from_dict(ds["synthetic"]) if "synthetic" in ds else None
            ext = d.get("extraction", {})
            sel = d.get("selection", {})
            kwargs = dict(
                manifest=manifest,
                synthetic=synthetic,
                seed=int(ds.get("seed", 0)),
                subjects=None if d.get("subjects") is None else tuple(str(s) for s in d["subjects"]),
                task_pairs=None if d.get("task_pairs") is None else tuple(tuple(p) for p in d["task_pairs"]),
                segment_seconds=float(d.get("segment_seconds", 0.5)),
                grid=_grid_from(d.get("grid")),
                extraction_methods=tuple(ext.get("methods", EXTRACTION_METHODS)),
                extraction=ExtractionConfig.from_dict(ext),
                selections=tuple(sel.get("methods", CRITERIA)),
                cap=int(sel.get("cap", 25)),
                mi_bins=sel.get("mi_bins"),
                mrmr_exclude_self=bool(sel.get("mrmr_exclude_self", False)),
                cv=CvConfig(**d.get("cv", {})),
                redundancy=None if d.get("redundancy") is None else RedundancyConfig(**d["redundancy"]),
                control=d.get("control"),
                alpha=float(d.get("alpha", 0.05)),
                keep_raw=bool(d.get("keep_raw", False)),
                output_dir=d.get("output_dir"),
            )
            if "classifiers" in d:
                kwargs["classifiers"] = tuple(_classifier_from(c) for c in d["classifiers"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed experiment config: {exc!r}") from exc
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        """Full echo of the configuration, defaults included."""
        ds = {"seed": self.seed}
        if self.manifest is not None:
            ds["manifest"] = self.manifest
        else:
            ds["synthetic"] = self.synthetic.to_dict()
        return {
            "dataset": ds,
            "subjects": None if self.subjects is None else list(self.subjects),
            "task_pairs": None if self.task_pairs is None else [list(p) for p in self.task_pairs],
            "segment_seconds": self.segment_seconds,
            "grid": {"frequencies": [float(f) for f in self.grid.frequencies]},
            "extraction": {"methods": list(self.extraction_methods), **self.extraction.to_dict()},
            "selection": {
                "methods": list(self.selections),
                "cap": self.cap,
                "mi_bins": self.mi_bins,
                "mrmr_exclude_self": self.mrmr_exclude_self,
            },
            "classifiers": [c.to_dict() for c in self.classifiers],
            "cv": self.cv.to_dict(),
            "redundancy": None if self.redundancy is None else self.redundancy.to_dict(),
            "control": self.control,
            "alpha": self.alpha,
            "keep_raw": self.keep_raw,
            "regularization": "cov + 1e-6 * trace(cov) / d * I",
        }


def load_source(config: ExperimentConfig) -> Dataset:
    if config.manifest is not None:
        return load_dataset(config.manifest)
    return synth_generate(config.synthetic, config.seed)


def resolve_units(config: ExperimentConfig, dataset: Dataset) -> list[tuple[str, tuple[str, str]]]:
    """(subject, task pair) evaluation units in a fixed order."""
    subjects = dataset.subjects if config.subjects is None else list(config.subjects)
    pairs = (
        list(itertools.combinations(dataset.tasks, 2))
        if config.task_pairs is None
        else [tuple(p) for p in config.task_pairs]
    )
    return [(s, p) for s in subjects for p in pairs]


def validate_config(config: ExperimentConfig, dataset: Dataset | None = None) -> list[str]:
    """Dry-run checks; returns human-readable problems (empty when the config is runnable)."""
    problems = []
    try:
        dataset = dataset or load_source(config)
    except PsdSelectError as exc:
        return [f"dataset: {exc}"]
    fs = dataset.sample_rate_hz
    try:
        n_seg = segment_length(config.segment_seconds, fs)
    except ConfigError as exc:
        return [f"segmentation: {exc}"]
    try:
        config.grid.check_nyquist(fs)
    except ConfigError as exc:
        problems.append(f"grid: {exc}")
    ex = config.extraction
    if "welch" in config.extraction_methods and ex.welch.sub_segment_len > n_seg:
        problems.append(f"welch: sub-segment length {ex.welch.sub_segment_len} exceeds segment length {n_seg}")
    if "burg" in config.extraction_methods and not 0 <= ex.burg_order < n_seg:
        problems.append(f"burg: order {ex.burg_order} must be below segment length {n_seg}")
    if "music" in config.extraction_methods and ex.music.corr_dim > n_seg:
        problems.append(f"music: correlation dimension {ex.music.corr_dim} exceeds segment length {n_seg}")
    for subject, pair in resolve_units(config, dataset):
        for task in pair:
            trials = dataset.select(subject, task)
            n = sum(t.n_samples // n_seg for t in trials)
            if n < config.cv.n_folds:
                problems.append(
                    f"subject {subject}, task {task}: {n} segments, fewer than {config.cv.n_folds} folds"
                )
    return problems


def combination_count(config: ExperimentConfig, n_units: int) -> tuple[int, int]:
    """(selection combinations, baseline feature sets) the run will evaluate.

    A baseline is the full unselected feature matrix of one extraction on one
    unit; each is scored under every classifier so gains stay paired.
    """
    e, s, c = len(config.extraction_methods), len(config.selections), len(config.classifiers)
    return e * s * c * n_units, e * n_units


# -- per-unit work -------------------------------------------------------


def _segments_for(dataset, subject, task, label, seconds):
    out = []
    for t in dataset.select(subject, task):
        out.extend(segment_trial(t, seconds, dataset.sample_rate_hz, label))
    return out


def _unit_seed(config, subject, pair, extraction):
    key = f"{subject}|{pair[0]}{pair[1]}|{extraction}"
    return [config.seed, config.cv.seed, *key.encode()]


def add_redundant_copies(matrix: LabeledFeatureMatrix, redundancy: RedundancyConfig, seed) -> LabeledFeatureMatrix:
    """Append ``copies`` jittered duplicates of each of the top FDR features."""
    rng = np.random.default_rng(seed)
    top = [s.feature_index for s in rank_univariate(matrix, "fdr", redundancy.top)]
    x = matrix.values
    blocks = [x]
    names = list(matrix.feature_names or (f"f{j}" for j in range(matrix.n_features)))
    for j in top:
        col = x[:, j]
        sd = col.std()
        for c in range(redundancy.copies):
            blocks.append((col + redundancy.jitter * sd * rng.standard_normal(col.size))[:, None])
            names.append(f"{names[j]}~copy{c}")
    return LabeledFeatureMatrix(np.hstack(blocks), matrix.labels, names)


def build_unit_matrix(features: dict, subject, pair) -> LabeledFeatureMatrix:
    """Stack the per-task feature blocks of one subject into a labeled matrix."""
    a, b = features[(subject, pair[0])], features[(subject, pair[1])]
    x = np.vstack([a, b])
    y = np.concatenate([np.zeros(len(a), dtype=int), np.ones(len(b), dtype=int)])
    return LabeledFeatureMatrix(x, y)


def _evaluate_unit(job):
    """Baselines and every selection x classifier curve for one unit and extractor."""
    config, extraction, subject, pair, matrix = job
    out = {"baselines": {}, "combinations": {}}
    for clf in config.classifiers:
        try:
            res = cv_accuracy(matrix.values, matrix.labels, clf, config.cv)
            out["baselines"][clf.name] = {"accuracy": res.mean_accuracy}
        except PsdSelectError as exc:
            out["baselines"][clf.name] = {"error": f"{type(exc).__name__}: {exc}"}
    for sel in config.selections:
        try:
            trace = forward_select(matrix, sel, config.cap, config.mi_bins, config.mrmr_exclude_self)
        except PsdSelectError as exc:
            for clf in config.classifiers:
                out["combinations"][(sel, clf.name)] = {"error": f"selection failed: {type(exc).__name__}: {exc}"}
            continue
        for clf in config.classifiers:
            try:
                rep = incremental_evaluation(matrix, trace, clf, config.cv)
            except PsdSelectError as exc:
                out["combinations"][(sel, clf.name)] = {"error": f"{type(exc).__name__}: {exc}"}
                continue
            entry = {
                "trace": [int(i) for i in trace.ordered_indices],
                "trace_scores": [float(s) for s in trace.step_scores],
                "curve": [float(v) for v in rep.curve],
                "best_k": rep.best_k,
                "best_accuracy": rep.best_accuracy,
            }
            if config.keep_raw:
                entry["raw"] = rep.raw.tolist()
            out["combinations"][(sel, clf.name)] = entry
    return out


# -- report --------------------------------------------------------------


@dataclass
class RunReport:
    data: dict
    wall_clock_seconds: float = 0.0

    @property
    def failures(self) -> list:
        return self.data["failures"]

    @property
    def ok(self) -> bool:
        return not self.data["failures"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _pair_key(pair):
    return f"{pair[0]}-{pair[1]}"


def _jsonable(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


def run_experiment(config: ExperimentConfig, jobs: int = 1, out_dir=None) -> RunReport:
    """Execute the whole protocol; writes tables when an output directory is given."""
    t0 = time.perf_counter()
    dataset = load_source(config)
    units = resolve_units(config, dataset)
    failures = []

    # feature extraction, once per (extractor, subject, task)
    features = {}
    for extraction in config.extraction_methods:
        for subject in sorted({u[0] for u in units}):
            for task in sorted({t for u in units for t in u[1]}, key=TASKS.index):
                try:
                    segs = _segments_for(dataset, subject, task, 0, config.segment_seconds)
                    if not segs:
                        raise ConfigError(f"no trials for subject {subject}, task {task}")
                    block = np.stack(
                        [extract_features(s, extraction, config.extraction, config.grid) for s in segs]
                    )
                    features[(extraction, subject, task)] = block
                except PsdSelectError as exc:
                    failures.append(
                        {"stage": "extraction", "extraction": extraction, "subject": subject, "task": task,
                         "error": f"{type(exc).__name__}: {exc}"}
                    )

    work, keys = [], []
    for extraction in config.extraction_methods:
        per = {(s, t): v for (e, s, t), v in features.items() if e == extraction}
        for subject, pair in units:
            if (subject, pair[0]) not in per or (subject, pair[1]) not in per:
                failures.append({"stage": "unit", "extraction": extraction, "subject": subject,
                                 "pair": _pair_key(pair), "error": "missing features for this unit"})
                continue
            matrix = build_unit_matrix(per, subject, pair)
            if config.redundancy is not None:
                matrix = add_redundant_copies(matrix, config.redundancy, _unit_seed(config, subject, pair, extraction))
            work.append((config, extraction, subject, pair, matrix))
            keys.append((extraction, subject, pair))

    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_unit, work))
    else:
        results = [_evaluate_unit(w) for w in work]

    baselines, combos, gains = [], [], []
    for (extraction, subject, pair), res, job in zip(keys, results, work):
        n_features = job[4].n_features
        for clf in config.classifiers:
            b = res["baselines"][clf.name]
            entry = {"extraction": extraction, "classifier": clf.name, "subject": subject,
                     "pair": _pair_key(pair), "n_features": n_features, **b}
            baselines.append(entry)
            if "error" in b:
                failures.append({"stage": "baseline", **entry})
        for sel in config.selections:
            for clf in config.classifiers:
                c = res["combinations"][(sel, clf.name)]
                entry = {"extraction": extraction, "selection": sel, "classifier": clf.name,
                         "subject": subject, "pair": _pair_key(pair),
                         "combination": combination_label(sel, extraction), **c}
                combos.append(entry)
                if "error" in c:
                    failures.append({"stage": "combination", **{k: entry[k] for k in (
                        "extraction", "selection", "classifier", "subject", "pair", "error")}})
                    continue
                base = res["baselines"][clf.name].get("accuracy")
                gain = None if base is None or base <= 0 else percentage_gain(c["best_accuracy"], base)
                gains.append({"combination": entry["combination"], "extraction": extraction, "selection": sel,
                              "classifier": clf.name, "subject": subject, "pair": _pair_key(pair),
                              "best_k": c["best_k"], "best_accuracy": c["best_accuracy"],
                              "baseline_accuracy": base, "gain_percent": gain})

    data = {
        "library_version": __version__,
        "config": config.to_dict(),
        "notes": [CV_CAVEAT, "ranking uses mean-rank aggregation of percentage gains"],
        "units": [{"subject": s, "pair": _pair_key(p)} for s, p in units],
        "baselines": baselines,
        "combinations": combos,
        "gains": gains,
        "failures": failures,
    }
    data.update(_comparative_stats(config, gains))
    report = RunReport(data, time.perf_counter() - t0)
    out_dir = out_dir if out_dir is not None else config.output_dir
    if out_dir is not None:
        emit_tables(report, out_dir)
    return report


def gain_table(gains: list[dict]) -> ComparisonTable | None:
    """Combinations x (subject, pair, classifier) table of gains; incomplete columns dropped."""
    cells = {}
    for g in gains:
        if g["gain_percent"] is None:
            continue
        col = f"s{g['subject']}:{g['pair']}:{g['classifier']}"
        cells.setdefault(g["combination"], {})[col] = g["gain_percent"]
    if not cells:
        return None
    methods = sorted(cells)
    cols = sorted(set.intersection(*(set(v) for v in cells.values())))
    if not cols:
        return None
    return ComparisonTable(tuple(methods), tuple(cols), np.array([[cells[m][c] for c in cols] for m in methods]))


def _comparative_stats(config, gains):
    out = {"ranking": [], "friedman": None, "posthoc": None}
    table = gain_table(gains)
    if table is None or len(table.methods) < 2:
        out["stats_note"] = "fewer than two complete combinations; ranking and tests skipped"
        return out
    rank = robust_rank(table)
    out["ranking"] = [{"combination": m, "average_rank": rank.rank_of(m)} for m in rank.ordering]
    out["table_columns"] = list(table.columns)
    if len(table.columns) < 2:
        out["stats_note"] = "fewer than two evaluation columns; Friedman test skipped"
        return out
    fr = friedman_test(table)
    out["friedman"] = {
        "statistic": fr.statistic, "df": fr.df, "pvalue": fr.pvalue, "n_columns": fr.n_columns,
        "average_ranks": {m: float(r) for m, r in zip(fr.methods, fr.average_ranks)},
    }
    control = config.control if config.control in table.methods else fr.best_method
    ph = posthoc_vs_control(fr, control)
    out["posthoc"] = {
        "control": control,
        "rows": ph.to_rows(),
        "significant_hommel": [c.method for c in significance_report(ph, config.alpha) if c.significant],
    }
    return out


# -- file emission -------------------------------------------------------


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v)) for v in r))
    return "\n".join(lines) + "\n"


def emit_tables(report: RunReport, out_dir) -> list[Path]:
    """Write report.json, ranking.csv, posthoc.csv, gains.csv and per-combination accuracy curves."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    d = report.data
    written = []

    def put(rel, text):
        p = out / rel
        _atomic_write(p, text)
        written.append(p)

    put("report.json", report.to_json())
    put("ranking.csv", _csv([(r["combination"], r["average_rank"]) for r in d["ranking"]],
                            ["combination", "average rank"]))
    ph = d.get("posthoc")
    ph_header = ["combination", "unadjusted p", "p Homm", "p Holm", "p Hoch"]
    ph_rows = [] if not ph else [tuple(r[h] for h in ph_header) for r in ph["rows"]]
    put("posthoc.csv", _csv(ph_rows, ph_header))
    g_header = ["combination", "extraction", "selection", "classifier", "subject", "pair",
                "best_k", "best_accuracy", "baseline_accuracy", "gain_percent"]
    put("gains.csv", _csv([tuple(_jsonable(g[h]) for h in g_header) for g in d["gains"]], g_header))
    put("baselines.csv", _csv(
        [(b["extraction"], b["classifier"], b["subject"], b["pair"], b["n_features"], b.get("accuracy"))
         for b in d["baselines"]],
        ["extraction", "classifier", "subject", "pair", "n_features", "accuracy"],
    ))
    for c in d["combinations"]:
        if "curve" not in c:
            continue
        name = f"{c['extraction']}__{c['selection']}__{c['classifier']}__s{c['subject']}__{c['pair']}.csv"
        put(f"accuracy_curves/{name}", _csv(list(enumerate(c["curve"], start=1)), ["k", "mean_accuracy"]))
    put("timing.json", json.dumps({"wall_clock_seconds": round(report.wall_clock_seconds, 3)}) + "\n")
    return written
