"""Filter feature-selection criteria and the greedy forward-selection driver.

Univariate criteria score one feature against the binary labels:
``corr``, ``mi``, ``fdr``, ``ranksum``. Multivariate criteria score a
whole subset: ``bd`` (Bhattacharyya), ``sr`` (scatter-matrix trace
ratio), ``lr`` (regression R^2) and ``mrmr`` (mean relevance minus mean
redundancy). Class 0 plays the role of the first class everywhere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateInputError, NumericError

log = logging.getLogger(__name__)

UNIVARIATE = ("corr", "mi", "fdr", "ranksum")
MULTIVARIATE = ("bd", "sr", "lr", "mrmr")
CRITERIA = UNIVARIATE + MULTIVARIATE
CRITERION_LABELS = {
    "corr": "CORR", "mi": "MI", "fdr": "FDR", "ranksum": "Ranksum",
    "bd": "BD", "sr": "SR", "lr": "LR", "mrmr": "mRMR",
}

MAX_DEFAULT_BINS = 32
REG_SCALE = 1e-6
TRACE_FLOOR_SCALE = 1e-12


@dataclass(frozen=True)
class LabeledFeatureMatrix:
    """Samples x features matrix with binary labels."""

    values: np.ndarray
    labels: np.ndarray
    feature_names: tuple | None = None

    def __post_init__(self):
        x = np.array(self.values, dtype=float)
        y = np.array(self.labels).astype(int, copy=False).ravel()
        if x.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {x.shape}")
        if x.shape[0] != y.size:
            raise DataError(f"{x.shape[0]} rows but {y.size} labels")
        if not np.all(np.isfinite(x)):
            raise DataError("feature matrix contains non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != x.shape[1]:
                raise DataError(f"{len(names)} feature names for {x.shape[1]} features")
            object.__setattr__(self, "feature_names", names)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "values", x)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def require_both_classes(self):
        if np.all(self.labels == 0) or np.all(self.labels == 1):
            raise DataError("labels must contain both classes")

    def subset(self, indices) -> "LabeledFeatureMatrix":
        idx = list(indices)
        names = None if self.feature_names is None else tuple(self.feature_names[i] for i in idx)
        return LabeledFeatureMatrix(self.values[:, idx], self.labels, names)


@dataclass(frozen=True)
class FeatureScore:
    feature_index: int
    score: float
    criterion: str


@dataclass(frozen=True)
class SelectionTrace:
    ordered_indices: tuple
    step_scores: tuple
    criterion: str

    def __len__(self):
        return len(self.ordered_indices)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("step,feature_index,criterion_value\n")
            for step, (i, s) in enumerate(zip(self.ordered_indices, self.step_scores), start=1):
                fh.write(f"{step},{i},{s!r}\n")


@dataclass(frozen=True)
class ClassGaussianStats:
    means: tuple
    covariances: tuple
    priors: tuple
    global_mean: np.ndarray
    within_scatter: np.ndarray
    between_scatter: np.ndarray


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray  # intercept first
    residuals: np.ndarray
    sse: float
    ssto: float
    r2: float


def _split(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(int).ravel()
    if x.ndim == 1:
        x = x[:, None]
    return x[y == 0], x[y == 1]


def _as_vector(v):
    return np.asarray(v, dtype=float).ravel()


# -- univariate criteria -------------------------------------------------


def corr_score(feature, labels) -> float:
    """Pearson correlation between a feature and the 0/1 labels."""
    f = _as_vector(feature)
    c = _as_vector(labels)
    fc = f - f.mean()
    cc = c - c.mean()
    sf = math.sqrt(np.dot(fc, fc))
    sc = math.sqrt(np.dot(cc, cc))
    if sf == 0.0 or sc == 0.0:
        raise DegenerateInputError("correlation undefined for a constant feature or constant labels")
    r = float(np.dot(fc, cc) / (sf * sc))
    return min(1.0, max(-1.0, r))


def default_bins(n_samples: int) -> int:
    return min(MAX_DEFAULT_BINS, max(1, math.ceil(math.sqrt(n_samples))))


def discretize(values, bins: int) -> np.ndarray:
    """Equal-width bin codes over the observed range; a constant vector maps to bin 0."""
    v = _as_vector(values)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.size, dtype=np.int64)
    codes = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(codes, bins - 1)


def mutual_information_codes(a, b) -> float:
    """Plug-in mutual information (nats) between two non-negative integer code vectors."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = a.size
    nb = int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=(int(a.max()) + 1) * nb).reshape(-1, nb)
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(pa, pb)
    return max(0.0, float(np.sum(joint[nz] * np.log(joint[nz] * n / outer[nz])) / n))


def mi_score(feature, labels, bins: int | None = None) -> float:
    f = _as_vector(feature)
    bins = default_bins(f.size) if bins is None else int(bins)
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    if f.size < bins:
        raise ConfigError(f"{f.size} samples is fewer than {bins} bins")
    return mutual_information_codes(discretize(f, bins), np.asarray(labels, dtype=np.int64))


def fdr_score(feature, labels) -> float:
    """Fisher discriminant ratio ``(mu0 - mu1)^2 / (var0 + var1)`` with unbiased variances."""
    a, b = _split(feature, labels)
    a, b = a[:, 0], b[:, 0]
    if a.size < 2 or b.size < 2:
        raise DataError("FDR needs at least two samples per class")
    num = (a.mean() - b.mean()) ** 2
    den = a.var(ddof=1) + b.var(ddof=1)
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise DegenerateInputError("both classes have zero variance but different means (infinite FDR)")
    return float(num / den)


def ranksum_counts(feature, labels) -> tuple[int, int]:
    """Return ``(t, n0 * n1)`` where t counts cross-class pairs with x0 - x1 <= 0."""
    a, b = _split(feature, labels)
    a, b = a[:, 0], np.sort(b[:, 0])
    if a.size == 0 or b.size == 0:
        raise DataError("ranksum needs both classes")
    t = int(np.sum(b.size - np.searchsorted(b, a, side="left")))
    return t, a.size * b.size


def ranksum_score(feature, labels) -> float:
    t, total = ranksum_counts(feature, labels)
    return float(max(t, total - t))


def _univariate(criterion, feature, labels, bins):
    if criterion == "corr":
        return corr_score(feature, labels)
    if criterion == "mi":
        return mi_score(feature, labels, bins)
    if criterion == "fdr":
        try:
            return fdr_score(feature, labels)
        except DegenerateInputError:
            # zero within-class spread with distinct means: a perfect separator
            return math.inf
    if criterion == "ranksum":
        return ranksum_score(feature, labels)
    raise ConfigError(f"unknown univariate criterion {criterion!r}")


def rank_univariate(
    matrix: LabeledFeatureMatrix,
    criterion: str,
    cap: int,
    bins: int | None = None,
) -> list[FeatureScore]:
    """Score every feature and return the ``cap`` best, best first.

    Correlation is ranked by absolute value; the signed value is kept in the
    returned score. Degenerate features score 0 and sort after all others,
    except that an infinite FDR (perfect separation, zero spread) ranks first.
    """
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    matrix.require_both_classes()
    if criterion == "mi" and bins is None:
        bins = default_bins(matrix.n_samples)
    keyed = []
    for j in range(matrix.n_features):
        try:
            s = _univariate(criterion, matrix.values[:, j], matrix.labels, bins)
            degenerate = False
        except DegenerateInputError as exc:
            log.info("feature %d scored 0 under %s: %s", j, criterion, exc)
            s, degenerate = 0.0, True
        strength = abs(s) if criterion == "corr" else s
        keyed.append((degenerate, -strength, j, s))
    keyed.sort()
    return [FeatureScore(j, s, criterion) for _, _, j, s in keyed[:cap]]


# -- multivariate criteria -----------------------------------------------


def regularized(cov: np.ndarray) -> np.ndarray:
    """``cov + lam * I`` with ``lam = 1e-6 * trace(cov) / d``."""
    d = cov.shape[0]
    lam = REG_SCALE * np.trace(cov) / d
    return cov + lam * np.eye(d)


def _class_moments(x, labels):
    """Per-class means, unbiased covariances and priors (class 0 first)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels).astype(int).ravel()
    parts = [x[y == 0], x[y == 1]]
    if any(p.shape[0] == 0 for p in parts):
        raise DataError("both classes must be present")
    means, covs = [], []
    for p in parts:
        mu = p.mean(axis=0)
        dev = p - mu
        means.append(mu)
        covs.append(dev.T @ dev / (p.shape[0] - 1) if p.shape[0] > 1 else np.zeros((x.shape[1],) * 2))
    priors = tuple(p.shape[0] / y.size for p in parts)
    return x, parts, tuple(means), tuple(covs), priors


def class_stats(x, labels) -> ClassGaussianStats:
    """Per-class moments (unbiased covariances) plus prior-weighted scatter matrices."""
    x, parts, means, covs, priors = _class_moments(x, labels)
    mu0 = x.mean(axis=0)
    d = x.shape[1]
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for p, mu, prior in zip(parts, means, priors):
        c = p - mu
        sw += prior * (c.T @ c) / p.shape[0]
        dm = (mu - mu0)[:, None]
        sb += prior * (dm @ dm.T)
    return ClassGaussianStats(means, covs, priors, mu0, sw, sb)


def _logdet(m, what):
    sign, val = np.linalg.slogdet(m)
    if sign <= 0 or not np.isfinite(val):
        raise NumericError(f"{what} is singular after regularization")
    return val


def chernoff_distance(x, labels, beta: float) -> float:
    """Gaussian Chernoff distance between the two classes."""
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    _, _, means, covs, _ = _class_moments(x, labels)
    s1 = regularized(covs[0])
    s2 = regularized(covs[1])
    blend = (1.0 - beta) * s1 + beta * s2
    dm = means[1] - means[0]
    try:
        quad = float(dm @ np.linalg.solve(blend, dm))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"blended covariance is singular: {exc}") from exc
    logterm = _logdet(blend, "blended covariance") - (1.0 - beta) * _logdet(
        s1, "class-0 covariance"
    ) - beta * _logdet(s2, "class-1 covariance")
    return 0.5 * beta * (1.0 - beta) * quad + 0.5 * logterm


def bhattacharyya_distance(x, labels) -> float:
    return chernoff_distance(x, labels, 0.5)


def scatter_traces(x, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature contributions to ``trace(S_b)`` and ``trace(S_w)``.

    Both traces are sums over features, so a subset's traces are sums of
    these entries. Columns are processed one at a time so the values do
    not depend on which other columns are present.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels).astype(int).ravel()
    masks = [y == 0, y == 1]
    if not all(m.any() for m in masks):
        raise DataError("both classes must be present")
    priors = [m.sum() / y.size for m in masks]
    tb = np.empty(x.shape[1])
    tw = np.empty(x.shape[1])
    for j in range(x.shape[1]):
        col = x[:, j]
        mu0 = col.mean()
        b = w = 0.0
        for m, prior in zip(masks, priors):
            part = col[m]
            mu = part.mean()
            dev = part - mu
            w += prior * np.dot(dev, dev) / part.size
            b += prior * (mu - mu0) ** 2
        tb[j], tw[j] = b, w
    return tb, tw


def _ratio_from_traces(tb_parts, tw_parts) -> float:
    tb = float(np.sum(tb_parts))
    tw = float(np.sum(tw_parts))
    if tb == 0.0:
        return 0.0
    return tb / max(tw, TRACE_FLOOR_SCALE * (tb + tw))


def scatter_ratio(x, labels) -> float:
    """``trace(S_b) / trace(S_w)``; the within trace is floored at 1e-12 * trace(S_b + S_w)."""
    return _ratio_from_traces(*scatter_traces(x, labels))


def fit_regression(x, labels) -> RegressionFit:
    """OLS of the 0/1 labels on the features with an intercept.

    Falls back to a ridge solution (same penalty rule as the covariance
    regularization, intercept unpenalised) when the centred Gram matrix is
    numerically singular.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=float).ravel()
    n, k = x.shape
    if n <= k + 1:
        raise DataError(f"regression needs more than {k + 1} samples, got {n}")
    xm = x.mean(axis=0)
    ym = y.mean()
    xc = x - xm
    gram = xc.T @ xc
    rhs = xc.T @ (y - ym)
    rank = np.linalg.matrix_rank(gram)
    if rank == k:
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            rank = -1
    if rank != k:
        lam = REG_SCALE * np.trace(gram) / k
        if lam == 0.0:
            raise NumericError("regression design has no variance")
        try:
            beta = np.linalg.solve(gram + lam * np.eye(k), rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"ridge fallback failed: {exc}") from exc
    b0 = ym - xm @ beta
    resid = y - (b0 + x @ beta)
    sse = float(resid @ resid)
    ssto = float(np.sum((y - ym) ** 2))
    if ssto == 0.0:
        raise DegenerateInputError("labels are constant")
    r2 = min(1.0, max(0.0, 1.0 - sse / ssto))
    return RegressionFit(np.concatenate(([b0], beta)), resid, sse, ssto, r2)


def regression_r2(x, labels) -> float:
    return fit_regression(x, labels).r2


def _mid_from_tables(relevance, redundancy, exclude_self):
    k = relevance.size
    rel = relevance.sum() / k
    if exclude_self:
        if k == 1:
            return float(rel)
        red = (redundancy.sum() - np.trace(redundancy)) / (k * (k - 1))
    else:
        red = redundancy.sum() / (k * k)
    return float(rel - red)


def mrmr_mid(x, labels, bins: int | None = None, exclude_self: bool = False) -> float:
    """Mean feature-label MI minus mean pairwise feature-feature MI.

    The redundancy average runs over all ordered pairs including each
    feature with itself; ``exclude_self`` drops the diagonal instead.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] == 0:
        raise DataError("mRMR needs a non-empty subset")
    bins = default_bins(x.shape[0]) if bins is None else int(bins)
    y = np.asarray(labels, dtype=np.int64).ravel()
    codes = [discretize(x[:, j], bins) for j in range(x.shape[1])]
    k = len(codes)
    rel = np.array([mutual_information_codes(c, y) for c in codes])
    red = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            red[i, j] = mutual_information_codes(codes[i], codes[j])
    return _mid_from_tables(rel, red, exclude_self)


def subset_score(criterion: str, x, labels, bins: int | None = None, exclude_self: bool = False) -> float:
    if criterion == "bd":
        return bhattacharyya_distance(x, labels)
    if criterion == "sr":
        return scatter_ratio(x, labels)
    if criterion == "lr":
        return regression_r2(x, labels)
    if criterion == "mrmr":
        return mrmr_mid(x, labels, bins, exclude_self)
    raise ConfigError(f"unknown multivariate criterion {criterion!r}")


class _MrmrCache:
    """Lazily computed MI tables so greedy mRMR avoids recomputing pairs."""

    def __init__(self, x, labels, bins):
        self.codes = [discretize(x[:, j], bins) for j in range(x.shape[1])]
        y = np.asarray(labels, dtype=np.int64)
        self.rel = np.array([mutual_information_codes(c, y) for c in self.codes])
        self.pair = {}

    def mi(self, i, j):
        key = (i, j)
        if key not in self.pair:
            self.pair[key] = mutual_information_codes(self.codes[i], self.codes[j])
        return self.pair[key]

    def score(self, subset, exclude_self):
        k = len(subset)
        red = np.empty((k, k))
        for a, i in enumerate(subset):
            for b, j in enumerate(subset):
                red[a, b] = self.mi(i, j)
        return _mid_from_tables(self.rel[list(subset)], red, exclude_self)


def forward_select(
    matrix: LabeledFeatureMatrix,
    criterion: str,
    cap: int = 25,
    bins: int | None = None,
    exclude_self: bool = False,
) -> SelectionTrace:
    """Produce a nested ordered feature subset of at most ``cap`` features.

    Univariate criteria take the top-``cap`` ranking in rank order.
    Multivariate criteria grow the subset greedily, adding at each step the
    candidate that maximises the criterion on the enlarged subset (ties go
    to the lower index). A candidate whose evaluation fails is skipped.
    """
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    matrix.require_both_classes()
    if criterion in UNIVARIATE:
        ranked = rank_univariate(matrix, criterion, cap, bins)
        return SelectionTrace(
            tuple(s.feature_index for s in ranked), tuple(s.score for s in ranked), criterion
        )
    if criterion not in MULTIVARIATE:
        raise ConfigError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")

    x, y = matrix.values, matrix.labels
    if criterion == "mrmr":
        cache = _MrmrCache(x, y, default_bins(matrix.n_samples) if bins is None else bins)
        evaluate = lambda subset: cache.score(subset, exclude_self)  # noqa: E731
    elif criterion == "sr":
        tb_all, tw_all = scatter_traces(x, y)
        evaluate = lambda subset: _ratio_from_traces(tb_all[subset], tw_all[subset])  # noqa: E731
    else:
        evaluate = lambda subset: subset_score(criterion, x[:, subset], y)  # noqa: E731

    chosen: list[int] = []
    scores: list[float] = []
    remaining = list(range(matrix.n_features))
    while len(chosen) < min(cap, matrix.n_features):
        best_j, best_s = None, -math.inf
        for j in remaining:
            try:
                s = evaluate(chosen + [j])
            except (NumericError, DegenerateInputError, DataError) as exc:
                log.info("%s: candidate %d skipped at step %d: %s", criterion, j, len(chosen) + 1, exc)
                continue
            if not math.isfinite(s):
                log.info("%s: candidate %d gave non-finite score, skipped", criterion, j)
                continue
            if s > best_s:
                best_j, best_s = j, s
        if best_j is None:
            raise NumericError(f"{criterion}: every candidate failed at step {len(chosen) + 1}")
        chosen.append(best_j)
        scores.append(best_s)
        remaining.remove(best_j)
    return SelectionTrace(tuple(chosen), tuple(scores), criterion)
