import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import make_classes
from psdselect.errors import ConfigError, DataError, DegenerateInputError, NumericError
from psdselect.selection import (
    LabeledFeatureMatrix,
    bhattacharyya_distance,
    chernoff_distance,
    corr_score,
    default_bins,
    discretize,
    fdr_score,
    fit_regression,
    forward_select,
    mi_score,
    mrmr_mid,
    rank_univariate,
    ranksum_counts,
    ranksum_score,
    regression_r2,
    scatter_ratio,
    subset_score,
)


def _random_problem(rng, n=None, d=None):
    n = n or int(rng.integers(20, 60))
    d = d or int(rng.integers(1, 9))
    x, y = make_classes(rng, n // 2, d, shift=rng.uniform(0, 1.5))
    x = x @ rng.standard_normal((d, d)) + rng.standard_normal(d)
    return x, y


# -- univariate ----------------------------------------------------------


def test_corr_example():
    assert corr_score([1, 2, 3, 4], [1, 0, 1, 0]) == pytest.approx(-1 / math.sqrt(5), rel=1e-12)
    assert round(corr_score([1, 2, 3, 4], [1, 0, 1, 0]), 4) == -0.4472


def test_corr_independent_is_small():
    rng = np.random.default_rng(0)
    assert abs(corr_score(rng.standard_normal(10000), rng.integers(0, 2, 10000))) < 0.05


def test_corr_degenerate():
    with pytest.raises(DegenerateInputError):
        corr_score([1, 1, 1], [0, 1, 0])
    with pytest.raises(DegenerateInputError):
        corr_score([1, 2, 3], [1, 1, 1])


@given(st.floats(0.01, 100), st.floats(-100, 100))
def test_corr_affine(scale, shift):
    rng = np.random.default_rng(1)
    f = rng.standard_normal(30)
    y = np.r_[np.zeros(15), np.ones(15)]
    r = corr_score(f, y)
    assert -1 <= r <= 1
    assert corr_score(scale * f + shift, y) == pytest.approx(r, abs=1e-9)
    assert corr_score(-scale * f + shift, y) == pytest.approx(-r, abs=1e-9)


def test_mi_examples():
    y = np.array([0, 1] * 50)
    assert mi_score(y.astype(float), y) == pytest.approx(math.log(2), rel=1e-12)
    assert mi_score(np.full(100, 3.0), y) == 0.0
    rng = np.random.default_rng(0)
    assert mi_score(rng.standard_normal(10000), rng.integers(0, 2, 10000)) < 0.01


def test_default_bins():
    assert default_bins(100) == 10
    assert default_bins(101) == 11
    assert default_bins(5000) == 32


def test_discretize_matches_oracle(rng):
    for _ in range(50):
        v = rng.standard_normal(int(rng.integers(2, 60)))
        b = int(rng.integers(1, 12))
        assert list(discretize(v, b)) == oracles.bin_codes(v, b)


def test_fdr_examples():
    y = np.array([0, 0, 0, 1, 1, 1])
    # class means 0 and 2, unit sample variances
    assert fdr_score([-1, 0, 1, 1, 2, 3], y) == pytest.approx(2.0)
    assert fdr_score([1, 2, 3, 1, 2, 3], y) == 0.0
    assert fdr_score([5, 5, 5, 5, 5, 5], y) == 0.0
    with pytest.raises(DegenerateInputError):
        fdr_score([1, 1, 1, 2, 2, 2], y)


def test_fdr_oracle(rng):
    for _ in range(20):
        f = rng.standard_normal(12)
        y = rng.permutation(np.r_[np.zeros(6, int), np.ones(6, int)])
        assert fdr_score(f, y) == pytest.approx(oracles.fdr(list(f), list(y)), rel=1e-12)


def test_ranksum_examples():
    assert ranksum_counts([1, 2, 3, 4], [0, 0, 1, 1]) == (4, 4)
    assert ranksum_counts([3, 4, 1, 2], [0, 0, 1, 1]) == (0, 4)
    assert ranksum_score([3, 4, 1, 2], [0, 0, 1, 1]) == 4
    assert ranksum_counts([7, 7], [0, 1]) == (1, 1)


@given(st.lists(st.integers(-5, 5), min_size=4, max_size=20))
def test_ranksum_counts_brute_force(vals):
    y = [i % 2 for i in range(len(vals))]
    assert ranksum_counts(vals, y) == oracles.ranksum_t(vals, y)


def test_monotone_invariance(rng):
    f = rng.standard_normal(40)
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    g = 3.0 * f + 7.0
    assert fdr_score(g, y) == pytest.approx(fdr_score(f, y), rel=1e-9)
    assert mi_score(g, y) == pytest.approx(mi_score(f, y), rel=1e-9)
    assert ranksum_score(np.exp(f), y) == ranksum_score(f, y)
    assert ranksum_score(f**3, y) == ranksum_score(f, y)


def test_rank_univariate():
    rng = np.random.default_rng(3)
    y = np.r_[np.zeros(50, int), np.ones(50, int)]
    x = rng.standard_normal((100, 312))
    x[:, 17] = y
    m = LabeledFeatureMatrix(x, y)
    for crit in ("corr", "mi", "fdr", "ranksum"):
        ranked = rank_univariate(m, crit, 25)
        assert len(ranked) == 25 and ranked[0].feature_index == 17
    assert len(rank_univariate(m.subset(range(5)), "fdr", 25)) == 5


def test_rank_univariate_abs_corr_and_signed_report():
    y = np.array([0, 0, 1, 1, 0, 1])
    x = np.column_stack([y * 0.1 + np.arange(6) * 0.001, -y.astype(float), np.arange(6.0)])
    ranked = rank_univariate(LabeledFeatureMatrix(x, y), "corr", 3)
    assert ranked[0].feature_index == 1 and ranked[0].score == pytest.approx(-1.0)


def test_rank_univariate_degenerate_feature_last():
    y = np.array([0, 0, 0, 1, 1, 1])
    x = np.column_stack([np.ones(6), np.arange(6.0)])
    ranked = rank_univariate(LabeledFeatureMatrix(x, y), "corr", 2)
    assert [r.feature_index for r in ranked] == [1, 0]


def test_single_class_rejected():
    with pytest.raises(DataError):
        rank_univariate(LabeledFeatureMatrix(np.ones((4, 2)), [1, 1, 1, 1]), "fdr", 2)


def test_matrix_validation():
    with pytest.raises(DataError):
        LabeledFeatureMatrix(np.ones((3, 2)), [0, 1])
    with pytest.raises(DataError):
        LabeledFeatureMatrix(np.ones((2, 2)), [0, 2])
    with pytest.raises(DataError):
        LabeledFeatureMatrix(np.array([[np.nan, 1.0], [1.0, 1.0]]), [0, 1])


# -- multivariate --------------------------------------------------------


def test_chernoff_identical_classes_is_zero(rng):
    a = rng.standard_normal((10, 3))
    x = np.vstack([a, a])
    y = np.r_[np.zeros(10, int), np.ones(10, int)]
    for beta in (0.1, 0.5, 0.9):
        assert chernoff_distance(x, y, beta) == pytest.approx(0.0, abs=1e-12)


def test_bhattacharyya_is_chernoff_half(rng):
    x, y = _random_problem(rng, 40, 3)
    assert bhattacharyya_distance(x, y) == chernoff_distance(x, y, 0.5)


def test_bhattacharyya_identity_covariances():
    # construct samples whose class covariances are exactly the identity
    base = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float) * math.sqrt(3) / 2
    d = np.array([1.0, 2.0])
    x = np.vstack([base, base + d])
    y = np.r_[np.zeros(4, int), np.ones(4, int)]
    lam_cov = (1 + 1e-6) * np.eye(2)
    expected = d @ np.linalg.solve(lam_cov, d) / 8
    assert bhattacharyya_distance(x, y) == pytest.approx(expected, rel=1e-12)
    assert bhattacharyya_distance(x, y) == pytest.approx(5 / 8, rel=1e-5)


def test_chernoff_class_swap(rng):
    x, y = _random_problem(rng, 40, 3)
    assert bhattacharyya_distance(x, 1 - y) == pytest.approx(bhattacharyya_distance(x, y), rel=1e-10)
    assert chernoff_distance(x, 1 - y, 0.3) == pytest.approx(chernoff_distance(x, y, 0.7), rel=1e-10)


def test_chernoff_beta_range(rng):
    x, y = _random_problem(rng, 20, 2)
    with pytest.raises(ConfigError):
        chernoff_distance(x, y, 1.0)


def test_chernoff_zero_covariance_is_numeric_error():
    x = np.array([[1.0, 2.0]] * 3 + [[3.0, 4.0]] * 3)
    with pytest.raises(NumericError):
        chernoff_distance(x, [0, 0, 0, 1, 1, 1], 0.5)


def test_scatter_ratio_examples():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((10, 2))
    assert scatter_ratio(np.vstack([a, a]), np.r_[np.zeros(10), np.ones(10)]) == pytest.approx(0.0, abs=1e-20)
    x = np.array([[0.0, 0.0]] * 3 + [[2.0, 0.0]] * 3)
    tb = 1.0  # 0.5*1 + 0.5*1
    assert scatter_ratio(x, [0, 0, 0, 1, 1, 1]) == pytest.approx(tb / (1e-12 * tb))


def test_scatter_ratio_orthogonal_invariance(rng):
    x, y = _random_problem(rng, 50, 4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert scatter_ratio(2.5 * x @ q, y) == pytest.approx(scatter_ratio(x, y), rel=1e-9)


def test_regression_examples(rng):
    y = np.r_[np.zeros(10, int), np.ones(10, int)]
    assert regression_r2(3.0 * y + 1.0, y) == pytest.approx(1.0)
    f = np.tile([1.0, -1.0, -1.0, 1.0, 0.0], 4)
    assert regression_r2(f, y) == pytest.approx(0.0, abs=1e-12)
    fit = fit_regression(rng.standard_normal((20, 2)), y)
    assert fit.coefficients.shape == (3,)


def test_regression_rank_deficient_uses_ridge(rng):
    y = np.r_[np.zeros(10, int), np.ones(10, int)]
    f = rng.standard_normal(20)
    r = regression_r2(np.column_stack([f, f]), y)
    assert r == pytest.approx(regression_r2(f, y), rel=1e-4)


def test_regression_r2_nested_non_decreasing(rng):
    x, y = _random_problem(rng, 60, 6)
    vals = [regression_r2(x[:, :k], y) for k in range(1, 7)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_mrmr_single_feature_literal(rng):
    x = rng.standard_normal((30, 1))
    y = np.r_[np.zeros(15, int), np.ones(15, int)]
    b = default_bins(30)
    codes = oracles.bin_codes(x[:, 0], b)
    expected = oracles.mutual_info(codes, list(y)) - oracles.mutual_info(codes, codes)
    assert mrmr_mid(x, y) == pytest.approx(expected, rel=1e-12)
    assert mrmr_mid(x, y, exclude_self=True) == pytest.approx(oracles.mutual_info(codes, list(y)), rel=1e-12)


def test_mrmr_penalises_duplicates():
    rng = np.random.default_rng(4)
    y = rng.integers(0, 2, 400)
    f = rng.standard_normal(400)
    g = rng.standard_normal(400)
    dup = mrmr_mid(np.column_stack([f, f]), y)
    ind = mrmr_mid(np.column_stack([f, g]), y)
    assert dup < ind


@pytest.mark.parametrize("exclude_self", [False, True])
def test_mrmr_oracle(rng, exclude_self):
    for _ in range(10):
        x, y = _random_problem(rng, 40, 3)
        assert mrmr_mid(x, y, 5, exclude_self) == pytest.approx(
            oracles.mrmr(x, y, 5, exclude_self), rel=1e-12, abs=1e-14
        )


def test_subset_criteria_match_oracles(rng):
    for _ in range(30):
        x, y = _random_problem(rng)
        assert bhattacharyya_distance(x, y) == pytest.approx(oracles.bhattacharyya(x, y), rel=1e-9)
        beta = rng.uniform(0.05, 0.95)
        assert chernoff_distance(x, y, beta) == pytest.approx(oracles.chernoff(x, y, beta), rel=1e-9)
        assert scatter_ratio(x, y) == pytest.approx(oracles.scatter_ratio(x, y), rel=1e-10)
        assert regression_r2(x, y) == pytest.approx(oracles.r_squared(x, y), rel=1e-9)


def test_unknown_criterion(rng):
    x, y = _random_problem(rng, 20, 2)
    with pytest.raises(ConfigError):
        subset_score("fisher", x, y)
    with pytest.raises(ConfigError):
        forward_select(LabeledFeatureMatrix(x, y), "fisher")


# -- forward selection ---------------------------------------------------


@pytest.mark.parametrize("criterion", ["bd", "sr", "lr", "mrmr"])
def test_forward_select_equals_greedy_oracle(criterion, rng):
    x, y = _random_problem(rng, 60, 8)
    m = LabeledFeatureMatrix(x, y)
    trace = forward_select(m, criterion, cap=8)
    ref = oracles.greedy(lambda s: subset_score(criterion, x[:, s], y), 8, 8)
    assert list(trace.ordered_indices) == ref


def test_forward_select_nested_and_capped(rng):
    x, y = _random_problem(rng, 80, 8)
    x = np.column_stack([x] * 4)
    trace = forward_select(LabeledFeatureMatrix(x, y), "sr", cap=25)
    assert len(trace) == 25 and len(set(trace.ordered_indices)) == 25
    uni = forward_select(LabeledFeatureMatrix(x, y), "fdr", cap=25)
    assert len(uni) == 25


def test_forward_select_skips_failures_then_errors():
    # bd on a constant column fails at every step; with two constant columns there is nothing left
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    x = np.column_stack([np.ones(10), np.arange(10.0) ** 1.5 % 3])
    trace = forward_select(LabeledFeatureMatrix(x, y), "bd", cap=1)
    assert trace.ordered_indices == (1,)
    with pytest.raises(NumericError):
        forward_select(LabeledFeatureMatrix(np.ones((10, 2)), y), "bd", cap=1)


def test_trace_to_csv(tmp_path, rng):
    x, y = _random_problem(rng, 40, 3)
    trace = forward_select(LabeledFeatureMatrix(x, y), "lr", cap=3)
    trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,feature_index,criterion_value" and len(lines) == 4


def test_criteria_are_deterministic(rng):
    x, y = _random_problem(rng, 40, 4)
    for c in ("bd", "sr", "lr", "mrmr"):
        assert subset_score(c, x, y) == subset_score(c, x.copy(), y.copy())
