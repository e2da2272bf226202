"""LDA, QDA and linear SVM classifiers with repeated stratified cross-validation.

Every classifier maps an exact tie at the decision boundary to class 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import ConfigError, DataError, NumericError, SolverError
from .selection import REG_SCALE, LabeledFeatureMatrix, SelectionTrace


def _regularize(cov):
    """``cov + lam * I`` with ``lam = 1e-6 * trace / d``; an all-zero covariance gets ``lam = 1e-6``."""
    d = cov.shape[0]
    tr = np.trace(cov)
    if not np.isfinite(tr):
        raise NumericError("covariance is not finite")
    lam = REG_SCALE * tr / d if tr > 0 else REG_SCALE
    return cov + lam * np.eye(d)


def _class_parts(x, y):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y).astype(int).ravel()
    if x.shape[0] != y.size:
        raise DataError(f"{x.shape[0]} samples but {y.size} labels")
    parts = [x[y == 0], x[y == 1]]
    for c, p in enumerate(parts):
        if p.shape[0] < 2:
            raise DataError(f"class {c} needs at least 2 training samples, has {p.shape[0]}")
    return x, y, parts


def _inverse_and_logdet(cov, what):
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericError(f"{what} is singular even after regularization")
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{what} is singular even after regularization") from exc
    return inv, logdet


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


# -- LDA -----------------------------------------------------------------


@dataclass(frozen=True)
class LdaModel:
    means: np.ndarray  # (2, d)
    cov_inverse: np.ndarray
    priors: np.ndarray

    def decision(self, x) -> np.ndarray:
        """Discriminant difference ``delta_1(x) - delta_0(x)``."""
        x = _as_2d(x)
        w = self.cov_inverse @ (self.means[1] - self.means[0])
        c = -0.5 * (self.means[1] @ self.cov_inverse @ self.means[1] - self.means[0] @ self.cov_inverse @ self.means[0])
        c += math.log(self.priors[1]) - math.log(self.priors[0])
        return x @ w + c

    def predict(self, x) -> np.ndarray:
        return (self.decision(x) > 0).astype(int)


def lda_train(x, y) -> LdaModel:
    """Gaussian discriminant with a shared, prior-weighted pooled covariance."""
    x, y, parts = _class_parts(x, y)
    n = y.size
    means = np.stack([p.mean(axis=0) for p in parts])
    priors = np.array([p.shape[0] / n for p in parts])
    pooled = sum(pr * np.atleast_2d(np.cov(p, rowvar=False, ddof=0)) for pr, p in zip(priors, parts))
    inv, _ = _inverse_and_logdet(_regularize(pooled), "pooled covariance")
    return LdaModel(means, inv, priors)


def lda_predict(model: LdaModel, x) -> np.ndarray:
    return model.predict(x)


# -- QDA -----------------------------------------------------------------


@dataclass(frozen=True)
class QdaModel:
    means: np.ndarray
    cov_inverses: tuple
    log_dets: np.ndarray
    priors: np.ndarray

    def scores(self, x) -> np.ndarray:
        x = _as_2d(x)
        out = np.empty((x.shape[0], 2))
        for c in range(2):
            d = x - self.means[c]
            out[:, c] = (
                -0.5 * np.einsum("ij,jk,ik->i", d, self.cov_inverses[c], d)
                - 0.5 * self.log_dets[c]
                + math.log(self.priors[c])
            )
        return out

    def predict(self, x) -> np.ndarray:
        s = self.scores(x)
        return (s[:, 1] > s[:, 0]).astype(int)


def qda_train(x, y) -> QdaModel:
    x, y, parts = _class_parts(x, y)
    n = y.size
    means = np.stack([p.mean(axis=0) for p in parts])
    priors = np.array([p.shape[0] / n for p in parts])
    invs, dets = [], []
    for c, p in enumerate(parts):
        inv, ld = _inverse_and_logdet(
            _regularize(np.atleast_2d(np.cov(p, rowvar=False, ddof=0))), f"class-{c} covariance"
        )
        invs.append(inv)
        dets.append(ld)
    return QdaModel(means, tuple(invs), np.array(dets), priors)


def qda_predict(model: QdaModel, x) -> np.ndarray:
    return model.predict(x)


# -- linear SVM ----------------------------------------------------------


@numba.njit(cache=True)
def _dcd_solve(xa, ys, c, tol, max_sweeps):
    """Dual coordinate descent for the L1-loss SVM on bias-augmented rows.

    Returns (alpha, w, primal, dual, sweeps). Stops once the duality gap is
    at most ``tol * max(1, primal)``.
    """
    n, d = xa.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qd = np.empty(n)
    for i in range(n):
        qd[i] = np.dot(xa[i], xa[i])
    primal = 0.0
    dual = 0.0
    for sweep in range(1, max_sweeps + 1):
        for i in range(n):
            if qd[i] == 0.0:
                continue
            g = ys[i] * np.dot(w, xa[i]) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == c:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                a_new = min(max(a - g / qd[i], 0.0), c)
                delta = (a_new - a) * ys[i]
                if delta != 0.0:
                    for j in range(d):
                        w[j] += delta * xa[i, j]
                alpha[i] = a_new
        ww = np.dot(w, w)
        hinge = 0.0
        for i in range(n):
            m = 1.0 - ys[i] * np.dot(w, xa[i])
            if m > 0.0:
                hinge += m
        primal = 0.5 * ww + c * hinge
        dual = np.sum(alpha) - 0.5 * ww
        if primal - dual <= tol * max(1.0, primal):
            return alpha, w, primal, dual, sweep
    return alpha, w, primal, dual, -1


@dataclass(frozen=True)
class SvmModel:
    """Linear soft-margin SVM.

    The bias is learned as the weight of a constant unit feature, so the
    objective is ``0.5 * (|w|^2 + b^2) + C * sum(hinge)``. ``weights`` and
    ``bias`` act on standardised inputs when ``center``/``scale`` are set.
    """

    weights: np.ndarray
    bias: float
    c: float
    tol: float
    primal_objective: float
    dual_objective: float
    sweeps: int
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def duality_gap(self) -> float:
        return self.primal_objective - self.dual_objective

    def decision(self, x) -> np.ndarray:
        x = _as_2d(x)
        if self.center is not None:
            x = (x - self.center) / self.scale
        return x @ self.weights + self.bias

    def predict(self, x) -> np.ndarray:
        return (self.decision(x) > 0).astype(int)


def svm_train(x, y, c: float = 1.0, tol: float = 1e-6, max_sweeps: int = 100_000, standardize: bool = True) -> SvmModel:
    """Train a linear SVM by a deterministic cyclic dual coordinate-descent sweep."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y).astype(int).ravel()
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("SVM training needs both classes")
    if not c > 0 or not tol > 0:
        raise ConfigError("C and tol must be positive")
    center = scale = None
    if standardize:
        center = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        x = (x - center) / scale
    xa = np.ascontiguousarray(np.hstack([x, np.ones((x.shape[0], 1))]))
    ys = np.where(y == 1, 1.0, -1.0)
    _, w, primal, dual, sweeps = _dcd_solve(xa, ys, float(c), float(tol), int(max_sweeps))
    if sweeps < 0:
        raise SolverError(
            f"SVM did not converge in {max_sweeps} sweeps (duality gap {primal - dual:.3g})",
            gap=primal - dual,
        )
    return SvmModel(w[:-1].copy(), float(w[-1]), float(c), float(tol), float(primal), float(dual), int(sweeps), center, scale)


def svm_predict(model: SvmModel, x) -> np.ndarray:
    return model.predict(x)


# -- classifier specs ----------------------------------------------------

CLASSIFIERS = ("lda", "qda", "svm")


@dataclass(frozen=True)
class ClassifierSpec:
    """A named classifier plus its keyword parameters."""

    name: str
    params: tuple = ()

    def __post_init__(self):
        if self.name not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.name!r}; expected one of {CLASSIFIERS}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    def train(self, x, y):
        kw = dict(self.params)
        if self.name == "lda":
            return lda_train(x, y)
        if self.name == "qda":
            return qda_train(x, y)
        return svm_train(x, y, **kw)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}


def _trainer(classifier) -> Callable:
    if isinstance(classifier, str):
        classifier = ClassifierSpec(classifier)
    if isinstance(classifier, ClassifierSpec):
        return classifier.train
    if callable(classifier):
        return classifier
    raise ConfigError(f"cannot use {classifier!r} as a classifier")


def _predict(model, x):
    return model.predict(x) if hasattr(model, "predict") else model(x)


# -- cross-validation ----------------------------------------------------


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 10
    n_runs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")

    def to_dict(self):
        return {"n_folds": self.n_folds, "n_runs": self.n_runs, "seed": self.seed}


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Fold index (0..k-1) for every sample; class proportions kept per fold."""
    y = np.asarray(labels).astype(int).ravel()
    if k < 2:
        raise ConfigError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ConfigError(f"class {cls} has {idx.size} samples, fewer than {k} folds")
        idx = rng.permutation(idx)
        folds[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return folds


@dataclass(frozen=True)
class CvResult:
    mean_accuracy: float
    raw: np.ndarray  # (n_runs, n_folds)


def _fold_table(y, cv: CvConfig):
    return [stratified_kfold(y, cv.n_folds, cv.seed + r) for r in range(cv.n_runs)]


def _run_folds(x, y, train, folds_per_run, n_folds):
    raw = np.empty((len(folds_per_run), n_folds))
    for r, folds in enumerate(folds_per_run):
        for f in range(n_folds):
            test = folds == f
            try:
                model = train(x[~test], y[~test])
                pred = np.asarray(_predict(model, x[test])).astype(int)
            except (DataError, ConfigError) as exc:
                raise type(exc)(f"run {r}, fold {f}: {exc}") from exc
            except (NumericError, np.linalg.LinAlgError) as exc:
                raise NumericError(f"run {r}, fold {f}: {exc}") from exc
            raw[r, f] = np.mean(pred == y[test])
    return raw


def cv_accuracy(x, y, classifier="lda", cv: CvConfig | None = None) -> CvResult:
    """Mean held-out accuracy over ``n_runs`` re-drawn stratified k-fold splits."""
    cv = cv or CvConfig()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y).astype(int).ravel()
    raw = _run_folds(x, y, _trainer(classifier), _fold_table(y, cv), cv.n_folds)
    return CvResult(float(raw.mean()), raw)


@dataclass(frozen=True)
class CvReport:
    curve: np.ndarray  # mean accuracy for the top-1..top-K features
    best_k: int
    best_accuracy: float
    raw: np.ndarray  # (K, n_runs, n_folds)
    feature_indices: tuple = ()
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "feature_indices": [int(i) for i in self.feature_indices],
            "curve": [float(v) for v in self.curve],
            "best_k": self.best_k,
            "best_accuracy": self.best_accuracy,
            "raw": self.raw.tolist(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,mean_accuracy\n")
            for k, v in enumerate(self.curve, start=1):
                fh.write(f"{k},{float(v)!r}\n")


def incremental_evaluation(
    matrix: LabeledFeatureMatrix,
    trace: SelectionTrace | list,
    classifier="lda",
    cv: CvConfig | None = None,
) -> CvReport:
    """Cross-validate the first k traced features for k = 1..len(trace).

    Fold assignments are drawn once and shared across k so the curve is a
    paired comparison.
    """
    cv = cv or CvConfig()
    indices = tuple(trace.ordered_indices if isinstance(trace, SelectionTrace) else trace)
    if not indices:
        raise ConfigError("selection trace is empty")
    x, y = matrix.values, matrix.labels
    train = _trainer(classifier)
    folds = _fold_table(y, cv)
    raw = np.stack([_run_folds(x[:, list(indices[:k])], y, train, folds, cv.n_folds) for k in range(1, len(indices) + 1)])
    curve = raw.mean(axis=(1, 2))
    best = int(np.argmax(curve))
    echo = {"cv": cv.to_dict()}
    if isinstance(classifier, (str, ClassifierSpec)):
        spec = ClassifierSpec(classifier) if isinstance(classifier, str) else classifier
        echo["classifier"] = spec.to_dict()
    return CvReport(curve, best + 1, float(curve[best]), raw, indices, echo)
