"""Comparing method combinations across evaluation units.

Percentage gain over a no-selection baseline, mean-rank aggregation, the
Friedman test, control-method z tests and Holm/Hochberg/Hommel adjusted
p-values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import ConfigError, DataError, ParseError

ADJUSTMENTS = ("holm", "hochberg", "hommel")
ADJUSTMENT_HEADERS = {"hommel": "p Homm", "holm": "p Holm", "hochberg": "p Hoch"}


@dataclass(frozen=True)
class ComparisonTable:
    """Methods (rows) x evaluation units (columns); larger values are better."""

    methods: tuple
    columns: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        methods = tuple(str(m) for m in self.methods)
        columns = tuple(str(c) for c in self.columns)
        if v.shape != (len(methods), len(columns)):
            raise DataError(f"values shape {v.shape} does not match {len(methods)} x {len(columns)}")
        if not np.all(np.isfinite(v)):
            raise DataError("comparison table has missing or non-finite cells")
        if len(set(methods)) != len(methods):
            raise DataError("duplicate method names")
        v.setflags(write=False)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", v)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", *self.columns])
        for m, row in zip(self.methods, self.values):
            w.writerow([m, *(repr(float(v)) for v in row)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "ComparisonTable":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise ParseError(f"cannot read table ({exc.strerror})", path) from exc
        rows = [r for r in rows if r]
        if not rows:
            raise ParseError("empty table", path)
        header = rows[0]
        methods, values = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, found {len(row)}", path, lineno)
            methods.append(row[0])
            try:
                values.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from exc
        return cls(tuple(methods), tuple(header[1:]), np.array(values).reshape(len(methods), len(header) - 1))


def percentage_gain(acc_with, acc_baseline):
    """``100 * (acc_with - acc_baseline) / acc_baseline``; works elementwise on arrays."""
    base = np.asarray(acc_baseline, dtype=float)
    if np.any(base <= 0):
        raise ConfigError("baseline accuracy must be positive")
    out = 100.0 * (np.asarray(acc_with, dtype=float) - base) / base
    return float(out) if out.ndim == 0 else out


def column_ranks(table: ComparisonTable) -> np.ndarray:
    """Within-column mid-ranks; the largest value gets rank 1."""
    return np.column_stack([sps.rankdata(-col, method="average") for col in table.values.T]).reshape(
        table.values.shape
    )


@dataclass(frozen=True)
class RankResult:
    methods: tuple
    average_ranks: np.ndarray
    ordering: tuple  # method names, best first

    def rank_of(self, method) -> float:
        return float(self.average_ranks[self.methods.index(method)])


def robust_rank(table: ComparisonTable) -> RankResult:
    """Mean-rank aggregation: average within-column ranks, best (lowest) first.

    Equal averages are ordered by method name.
    """
    if len(table.methods) < 2 or len(table.columns) < 1:
        raise ConfigError("ranking needs at least 2 methods and 1 column")
    avg = column_ranks(table).mean(axis=1)
    order = sorted(range(len(table.methods)), key=lambda i: (avg[i], table.methods[i]))
    return RankResult(table.methods, avg, tuple(table.methods[i] for i in order))


@dataclass(frozen=True)
class FriedmanResult:
    methods: tuple
    average_ranks: np.ndarray
    statistic: float
    df: int
    pvalue: float
    n_columns: int

    @property
    def best_method(self) -> str:
        i = min(range(len(self.methods)), key=lambda j: (self.average_ranks[j], self.methods[j]))
        return self.methods[i]


def friedman_test(table: ComparisonTable) -> FriedmanResult:
    k, n = table.values.shape
    if k < 2:
        raise ConfigError("Friedman test needs at least 2 methods")
    if n < 2:
        raise ConfigError("Friedman test needs at least 2 columns")
    avg = column_ranks(table).mean(axis=1)
    stat = 12.0 * n / (k * (k + 1)) * (np.sum(avg**2) - k * (k + 1) ** 2 / 4.0)
    stat = max(0.0, float(stat))
    return FriedmanResult(table.methods, avg, stat, k - 1, float(sps.chi2.sf(stat, k - 1)), n)


def control_pvalues(result: FriedmanResult, n_columns: int | None = None, control: str | None = None) -> dict:
    """Two-sided normal p-values of each method's average-rank difference to ``control``."""
    n = result.n_columns if n_columns is None else n_columns
    control = result.best_method if control is None else control
    if control not in result.methods:
        raise ConfigError(f"control method {control!r} not in table")
    k = len(result.methods)
    se = np.sqrt(k * (k + 1) / (6.0 * n))
    rc = result.average_ranks[result.methods.index(control)]
    out = {}
    for m, r in zip(result.methods, result.average_ranks):
        if m == control:
            continue
        z = (r - rc) / se
        out[m] = float(2.0 * sps.norm.sf(abs(z)))
    return out


def _holm(p):
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.minimum(1.0, np.maximum.accumulate((m - np.arange(m)) * p[order]))
    out = np.empty(m)
    out[order] = adj
    return out


def _hochberg(p):
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = (m - np.arange(m)) * p[order]
    adj = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    out = np.empty(m)
    out[order] = adj
    return out


def _hommel(p):
    n = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    i = np.arange(1, n + 1)
    q = np.full(n, np.min(n * ps / i))
    pa = q.copy()
    for m in range(n - 1, 1, -1):
        head = np.arange(n - m + 1)
        tail = np.arange(n - m + 1, n)
        q1 = np.min(m * ps[tail] / np.arange(2, m + 1))
        q = q.copy()
        q[head] = np.minimum(m * ps[head], q1)
        q[tail] = q[n - m]
        pa = np.maximum(pa, q)
    adj = np.minimum(1.0, np.maximum(pa, ps))
    out = np.empty(n)
    out[order] = adj
    return out


def posthoc_adjust(raw_p, method: str = "hommel") -> np.ndarray:
    """Family-wise adjusted p-values, returned in the input order."""
    p = np.asarray(raw_p, dtype=float).ravel()
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise DataError("raw p-values must lie in [0, 1]")
    if p.size == 0:
        return p.copy()
    if method == "holm":
        return _holm(p)
    if method == "hochberg":
        return _hochberg(p)
    if method == "hommel":
        return _hommel(p)
    raise ConfigError(f"unknown adjustment {method!r}; expected one of {ADJUSTMENTS}")


@dataclass(frozen=True)
class PosthocResult:
    control: str
    methods: tuple
    raw: np.ndarray
    adjusted: dict  # adjustment name -> array aligned with ``methods``

    def to_rows(self) -> list[dict]:
        """Rows sorted by raw p, then method name."""
        order = sorted(range(len(self.methods)), key=lambda i: (self.raw[i], self.methods[i]))
        rows = []
        for i in order:
            row = {"combination": self.methods[i], "unadjusted p": float(self.raw[i])}
            for name in ("hommel", "holm", "hochberg"):
                if name in self.adjusted:
                    row[ADJUSTMENT_HEADERS[name]] = float(self.adjusted[name][i])
            rows.append(row)
        return rows

    def to_csv(self, path=None) -> str:
        """Table layout: combination, unadjusted p, p Homm, then Holm and Hochberg."""
        headers = ["combination", "unadjusted p"] + [
            ADJUSTMENT_HEADERS[n] for n in ("hommel", "holm", "hochberg") if n in self.adjusted
        ]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=headers, lineterminator="\n")
        w.writeheader()
        for row in self.to_rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def posthoc_vs_control(result: FriedmanResult, control: str | None = None, n_columns: int | None = None) -> PosthocResult:
    control = result.best_method if control is None else control
    raw = control_pvalues(result, n_columns, control)
    methods = tuple(raw)
    p = np.array([raw[m] for m in methods])
    return PosthocResult(control, methods, p, {a: posthoc_adjust(p, a) for a in ADJUSTMENTS})


@dataclass(frozen=True)
class Comparison:
    method: str
    adjusted_p: float
    significant: bool


def significance_report(posthoc: PosthocResult, alpha: float = 0.05, method: str = "hommel") -> list[Comparison]:
    """Flag each comparison whose adjusted p is below ``alpha``; ordered as :meth:`PosthocResult.to_rows`."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    adj = posthoc.adjusted[method]
    order = sorted(range(len(posthoc.methods)), key=lambda i: (posthoc.raw[i], posthoc.methods[i]))
    return [Comparison(posthoc.methods[i], float(adj[i]), bool(adj[i] < alpha)) for i in order]
