"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the pytest terminal summary
and when this file is run as a script) and then asserts.
"""

import math
import time

import numpy as np
import pytest
from scipy.signal import lfilter

import oracles
from reference_values import HOMMEL_REFERENCE, HOMMEL_SIGNIFICANT
from psdselect.classify import ClassifierSpec, CvConfig
from psdselect.pipeline import ExperimentConfig, RedundancyConfig, run_experiment
from psdselect.selection import (
    LabeledFeatureMatrix,
    bhattacharyya_distance,
    chernoff_distance,
    corr_score,
    discretize,
    fdr_score,
    forward_select,
    mi_score,
    mrmr_mid,
    ranksum_counts,
    regression_r2,
    scatter_ratio,
    subset_score,
)
from psdselect.signals import BandComponent, SynthSpec, Trial, segment_trial
from psdselect.spectral import (
    FrequencyGrid,
    MusicConfig,
    WindowFunction,
    burg_fit,
    canonical_grid,
    extract_features,
    music_psd,
    periodogram,
    select_ar_order,
)
from psdselect.signals import TimeSeriesSegment
from psdselect.stats import ComparisonTable, friedman_test, posthoc_adjust

RESULTS = []
FS = 250.0


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    return ok


def _rel(a, b):
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# -- 1 -------------------------------------------------------------------


def test_criterion_1_hommel_reference():
    t0 = time.perf_counter()
    raw = [r[1] for r in HOMMEL_REFERENCE]
    expected = np.array([r[2] for r in HOMMEL_REFERENCE])
    adj = posthoc_adjust(raw, "hommel")
    worst = float(np.max(np.abs(adj - expected) / expected))
    n_sig = int(np.sum(adj < 0.05))
    flagged_rows = [i for i in range(len(adj)) if adj[i] < 0.05]
    elapsed = time.perf_counter() - t0
    ok = worst <= 5e-3 and n_sig == HOMMEL_SIGNIFICANT and flagged_rows == list(range(HOMMEL_SIGNIFICANT)) and elapsed < 1.0
    assert record(1, "Hommel reference table", ok,
                  f"max rel err {worst:.2e} <= 5e-3, {n_sig} significant (want {HOMMEL_SIGNIFICANT}), {elapsed:.3f}s")


# -- 2 -------------------------------------------------------------------


def test_criterion_2_protocol_arithmetic():
    rng = np.random.default_rng(0)
    trial = Trial(rng.standard_normal((6, 2500)), "B", "1", 0)
    segs = segment_trial(trial, 0.5, FS)
    lengths = {len(c) for s in segs for c in s.per_channel}
    grid = canonical_grid()
    vec = extract_features(segs[0], "welch", grid=grid)
    per_channel = vec.size // 6
    ok = len(segs) == 20 and lengths == {125} and len(grid) == 52 and per_channel == 52 and vec.size == 312
    assert record(2, "protocol arithmetic", ok,
                  f"{len(segs)} segments x {lengths} samples, {len(grid)} PSD values/channel, {vec.size} features")


# -- 3 -------------------------------------------------------------------


def _ar_series(coeffs, n, rng, burn=500):
    return lfilter([1.0], np.r_[1.0, coeffs], rng.standard_normal(n + burn))[burn:]


def _ar6():
    poles = []
    for r, f in ((0.9, 10), (0.85, 30), (0.8, 60)):
        z = r * np.exp(2j * np.pi * f / FS)
        poles += [z, np.conj(z)]
    return np.poly(poles).real[1:]


def test_criterion_3_spectral_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)

    # periodogram vs FFT on DFT-aligned grids
    worst = 0.0
    for n in (62, 125, 128, 250):
        for kind in ("rectangular", "hamming", "hann"):
            x = rng.standard_normal(n)
            w = WindowFunction(kind)
            freqs, ref = oracles.dft_periodogram(x, w.values(n), FS)
            got = periodogram(TimeSeriesSegment(x, FS), w, FrequencyGrid(freqs)).power
            worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    ok_pg = worst <= 1e-9

    # Burg on AR(1), a = -0.9
    x = _ar_series([-0.9], 2500, np.random.default_rng(0))
    a1 = float(burg_fit(TimeSeriesSegment(x, FS), 1).coefficients[0])
    ok_burg = abs(a1 + 0.9) <= 0.05

    # MUSIC, two tones at 10 and 17 Hz, SNR 5 dB
    cfg = MusicConfig(signal_dim=4, corr_dim=20)
    grid = canonical_grid()
    amp = math.sqrt(2 * 10 ** 0.5)
    music_ok = 0
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        t = np.arange(2500) / FS
        sig = sum(amp * np.cos(2 * np.pi * f * t + r.uniform(0, 2 * np.pi)) for f in (10.0, 17.0))
        p = music_psd(TimeSeriesSegment(sig + r.standard_normal(2500), FS), cfg, grid)
        peaks = oracles.peak_frequencies(p.frequencies, p.power, 2)
        music_ok += len(peaks) == 2 and abs(peaks[0] - 10) <= 0.5 and abs(peaks[1] - 17) <= 0.5
    ok_music = music_ok == 10

    # AIC order selection on AR(6)
    a = _ar6()
    hits = sum(
        select_ar_order(TimeSeriesSegment(_ar_series(a, 2500, np.random.default_rng(s)), FS), range(1, 11)) in (5, 6, 7)
        for s in range(50)
    )
    ok_aic = hits >= 40
    elapsed = time.perf_counter() - t0
    ok = ok_pg and ok_burg and ok_music and ok_aic and elapsed < 30
    assert record(3, "spectral oracles", ok,
                  f"periodogram rel err {worst:.1e}; Burg a1 {a1:.4f}; MUSIC {music_ok}/10 seeds; "
                  f"AIC {hits}/50 in {{5,6,7}}; {elapsed:.1f}s")


# -- 4 -------------------------------------------------------------------


def _problem(rng):
    n = int(rng.integers(16, 60))
    d = int(rng.integers(1, 9))
    y = rng.permutation(np.r_[np.zeros(n // 2, int), np.ones(n - n // 2, int)])
    x = rng.standard_normal((n, d)) @ rng.standard_normal((d, d)) + np.outer(y, rng.uniform(0, 1.5, d))
    return x, y


def test_criterion_4_criterion_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {k: 0.0 for k in ("corr", "mi", "fdr", "ranksum", "bd", "chernoff", "sr", "lr", "mrmr")}
    for _ in range(1000):
        x, y = _problem(rng)
        yl = list(y)
        j = int(rng.integers(0, x.shape[1]))
        f = x[:, j]
        bins = int(rng.integers(2, 9))
        worst["corr"] = max(worst["corr"], _rel(corr_score(f, y), oracles.pearson(list(f), yl)))
        codes = oracles.bin_codes(f, bins)
        worst["mi"] = max(worst["mi"], _rel(mi_score(f, y, bins), oracles.mutual_info(codes, yl)))
        worst["fdr"] = max(worst["fdr"], _rel(fdr_score(f, y), oracles.fdr(list(f), yl)))
        t, total = ranksum_counts(f, y)
        worst["ranksum"] = max(worst["ranksum"], 0.0 if (t, total) == oracles.ranksum_t(list(f), yl) else 1.0)
        worst["bd"] = max(worst["bd"], _rel(bhattacharyya_distance(x, y), oracles.bhattacharyya(x, y)))
        beta = float(rng.uniform(0.05, 0.95))
        worst["chernoff"] = max(worst["chernoff"], _rel(chernoff_distance(x, y, beta), oracles.chernoff(x, y, beta)))
        worst["sr"] = max(worst["sr"], _rel(scatter_ratio(x, y), oracles.scatter_ratio(x, y)))
        worst["lr"] = max(worst["lr"], _rel(regression_r2(x, y), oracles.r_squared(x, y)))
        excl = bool(rng.integers(0, 2))
        worst["mrmr"] = max(worst["mrmr"], _rel(mrmr_mid(x, y, bins, excl), oracles.mrmr(x, y, bins, excl)))
        assert list(discretize(f, bins)) == codes

    greedy_ok = 0
    n_greedy = 0
    for crit in ("bd", "sr", "lr", "mrmr"):
        for _ in range(10):
            n = int(rng.integers(30, 60))
            y = rng.permutation(np.r_[np.zeros(n // 2, int), np.ones(n - n // 2, int)])
            x = rng.standard_normal((n, 8)) + np.outer(y, rng.uniform(0, 1, 8))
            trace = forward_select(LabeledFeatureMatrix(x, y), crit, cap=8)
            ref = oracles.greedy(lambda s: subset_score(crit, x[:, s], y), 8, 8)
            greedy_ok += list(trace.ordered_indices) == ref
            n_greedy += 1
    elapsed = time.perf_counter() - t0
    max_err = max(worst.values())
    ok = max_err <= 1e-9 and greedy_ok == n_greedy and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert record(4, "criterion oracles", ok,
                  f"1000 trials, max rel err {max_err:.1e} [{detail}]; greedy {greedy_ok}/{n_greedy}; {elapsed:.1f}s")


# -- 5 -------------------------------------------------------------------


def test_criterion_5_statistics_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    rank_ok = True
    for _ in range(200):
        k, n = int(rng.integers(2, 10)), int(rng.integers(2, 12))
        v = rng.integers(0, 6, (k, n)).astype(float)
        fr = friedman_test(ComparisonTable(tuple(f"m{i}" for i in range(k)), tuple(f"c{j}" for j in range(n)), v))
        rank_ok &= abs(fr.average_ranks.sum() - k * (k + 1) / 2) <= 1e-9
    exact, bounds_ok = 0, True
    for _ in range(500):
        k = int(rng.integers(1, 9))
        p = rng.uniform(0, 1, k) ** rng.uniform(1, 6)
        if rng.uniform() < 0.2:
            p[: k // 2] = p[0]  # ties
        adj = posthoc_adjust(p, "hommel")
        ref = np.array(oracles.hommel_closed_testing(list(p)))
        exact += bool(np.allclose(adj, ref, rtol=1e-12, atol=0))
        for m in ("holm", "hochberg", "hommel"):
            a = posthoc_adjust(p, m)
            bounds_ok &= bool(np.all(a >= p) and np.all(a <= 1.0))
    elapsed = time.perf_counter() - t0
    ok = rank_ok and exact == 500 and bounds_ok and elapsed < 30
    assert record(5, "statistics properties", ok,
                  f"rank sums exact: {rank_ok}; Hommel = closed testing {exact}/500; "
                  f"raw <= adjusted <= 1: {bounds_ok}; {elapsed:.1f}s")


# -- 6 -------------------------------------------------------------------

E2E_SPEC = SynthSpec(
    tasks={
        "B": (),
        "C": (BandComponent(10.0, 1.0, (0.7, 0.7, 0, 0, 0, 0)), BandComponent(20.0, 1.0, (0, 0, 0.6, 0.6, 0, 0))),
    },
    trials_per_task=5,
    noise_variance=1.0,
    background_ar2=(0.5, -0.3),
)


def test_criterion_6_end_to_end():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        synthetic=E2E_SPEC,
        seed=0,
        extraction_methods=("burg",),
        selections=("fdr", "lr", "bd", "sr", "mrmr"),
        classifiers=(ClassifierSpec("lda"),),
        cv=CvConfig(10, 10, 0),
        redundancy=RedundancyConfig(top=1, copies=24, jitter=0.05),
    )
    rep = run_experiment(cfg)
    best = {c["selection"]: c["best_accuracy"] for c in rep.data["combinations"]}
    elapsed = time.perf_counter() - t0
    ok_a = best["lr"] >= 0.90
    ok_b = all(best[m] >= best["fdr"] for m in ("lr", "bd", "sr", "mrmr"))
    ok = rep.ok and ok_a and ok_b and elapsed < 300
    detail = ", ".join(f"{k} {v:.3f}" for k, v in sorted(best.items()))
    assert record(6, "end-to-end synthetic reproduction", ok,
                  f"Burg+LR+LDA {best['lr']:.3f} >= 0.90; multivariate >= FDR: {ok_b} [{detail}]; {elapsed:.1f}s")


# -- 7 -------------------------------------------------------------------


def test_criterion_7_determinism(tmp_path):
    spec = SynthSpec(
        tasks={"B": (), "C": (BandComponent(10.0, 1.0, (0.7, 0.7, 0, 0, 0, 0)),),
               "M": (BandComponent(20.0, 1.0, (0, 0, 0.6, 0.6, 0, 0)),)},
        subjects=("1", "2"),
        trials_per_task=1,
        trial_seconds=5.0,
        background_ar2=(0.5, -0.3),
    )
    cfg = ExperimentConfig(
        synthetic=spec,
        seed=7,
        extraction_methods=("welch", "burg", "music"),
        selections=("corr", "mi", "fdr", "ranksum", "bd", "sr", "lr", "mrmr"),
        classifiers=(ClassifierSpec("lda"), ClassifierSpec("svm")),
        task_pairs=(("B", "C"), ("B", "M")),
        cap=4,
        cv=CvConfig(5, 2, 0),
        redundancy=RedundancyConfig(1, 3, 0.05),
    )
    outs = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2), ("d", 3)):
        run_experiment(cfg, jobs=jobs, out_dir=tmp_path / name)
        outs.append((tmp_path / name / "report.json").read_bytes())
    ok = len(set(outs)) == 1
    assert record(7, "determinism", ok,
                  f"report.json identical across 2 serial runs and --jobs 2/3: {ok}; {len(outs[0])} bytes")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
