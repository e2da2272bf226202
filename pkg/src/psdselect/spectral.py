"""Power spectral density estimators evaluated on arbitrary frequency grids.

All estimators evaluate the transform by direct complex-exponential
summation at each grid frequency, so grid points need not be DFT bins.
Welch and Burg outputs are one-sided-grid, two-sided-density values in
amplitude**2 / Hz; MUSIC and Pisarenko return uncalibrated pseudospectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigError, DataError, DegenerateInputError, NumericError
from .signals import SegmentedSample, TimeSeriesSegment

WINDOW_KINDS = ("rectangular", "hamming", "hann")


@dataclass(frozen=True)
class WindowFunction:
    kind: str = "hamming"

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ConfigError(f"unknown window {self.kind!r}; expected one of {WINDOW_KINDS}")

    def values(self, m: int) -> np.ndarray:
        if self.kind == "rectangular":
            return np.ones(m)
        if self.kind == "hamming":
            return np.hamming(m)
        return np.hanning(m)

    def power_u(self, m: int) -> float:
        """Mean squared window value, ``(1/M) * sum(w**2)``."""
        w = self.values(m)
        return float(np.dot(w, w) / m)


@dataclass(frozen=True)
class FrequencyGrid:
    frequencies: np.ndarray

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float).ravel()
        if f.size == 0:
            raise ConfigError("frequency grid is empty")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ConfigError("frequency grid must hold finite, non-negative values")
        if np.any(np.diff(f) <= 0):
            raise ConfigError("frequency grid must be strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    def __len__(self):
        return self.frequencies.size

    @classmethod
    def uniform(cls, start: float, step: float, count: int) -> "FrequencyGrid":
        return cls(start + step * np.arange(count))

    def check_nyquist(self, sample_rate_hz: float):
        if self.frequencies[-1] > sample_rate_hz / 2.0 + 1e-12:
            raise ConfigError(
                f"grid reaches {self.frequencies[-1]} Hz, above Nyquist ({sample_rate_hz / 2.0} Hz)"
            )


def canonical_grid() -> FrequencyGrid:
    """52 points, 0 to 25.5 Hz in 0.5 Hz steps."""
    return FrequencyGrid.uniform(0.0, 0.5, 52)


@dataclass(frozen=True)
class PsdEstimate:
    grid: FrequencyGrid
    power: np.ndarray
    method: str = ""
    pseudospectrum: bool = False

    def __post_init__(self):
        p = np.array(self.power, dtype=float).ravel()
        if p.size != len(self.grid):
            raise DataError(f"{p.size} power values for a {len(self.grid)}-point grid")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DataError("PSD values must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "power", p)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("frequency_hz,power\n")
            for f, p in zip(self.frequencies, self.power):
                fh.write(f"{f!r},{p!r}\n")


@dataclass(frozen=True)
class WelchConfig:
    sub_segment_len: int = 62
    hop: int = 31
    window: WindowFunction = field(default_factory=WindowFunction)

    def __post_init__(self):
        if isinstance(self.window, str):
            object.__setattr__(self, "window", WindowFunction(self.window))
        if not 0 < self.hop <= self.sub_segment_len:
            raise ConfigError(
                f"need 0 < hop ({self.hop}) <= sub-segment length ({self.sub_segment_len})"
            )


@dataclass(frozen=True)
class MusicConfig:
    signal_dim: int = 8
    corr_dim: int = 20
    floor_epsilon: float = 1e-12

    def __post_init__(self):
        if not 0 < self.signal_dim < self.corr_dim:
            raise ConfigError(
                f"need 0 < signal_dim ({self.signal_dim}) < corr_dim ({self.corr_dim})"
            )
        if not self.floor_epsilon > 0:
            raise ConfigError("floor_epsilon must be positive")


@dataclass(frozen=True)
class ArModel:
    """All-pole model ``x(n) = -sum_m a[m] x(n-m) + e(n)``.

    ``reflection`` holds the reflection coefficients produced by the Burg
    recursion, one per order; all have modulus < 1 for a stable model.
    """

    coefficients: np.ndarray
    noise_variance: float
    sample_period: float
    reflection: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def order(self) -> int:
        return self.coefficients.size

    def poles(self) -> np.ndarray:
        return np.roots(np.concatenate(([1.0], self.coefficients)))


@dataclass(frozen=True)
class AutocorrEstimate:
    lags: np.ndarray
    matrix: np.ndarray


def _steering(freqs: np.ndarray, n: int, sample_rate_hz: float) -> np.ndarray:
    """Rows are ``exp(-j 2 pi f k / fs)`` for k = 0..n-1."""
    return np.exp(-2j * np.pi * np.outer(freqs, np.arange(n)) / sample_rate_hz)


def _check_grid(grid: FrequencyGrid, fs: float):
    grid.check_nyquist(fs)


def periodogram(
    segment: TimeSeriesSegment,
    window: WindowFunction | None = None,
    grid: FrequencyGrid | None = None,
) -> PsdEstimate:
    """Windowed periodogram ``|sum w(n) x(n) e^{-j2 pi f n/fs}|^2 / (fs M U)``."""
    window = window or WindowFunction("rectangular")
    grid = grid or canonical_grid()
    fs = segment.sample_rate_hz
    _check_grid(grid, fs)
    return PsdEstimate(grid, _periodogram_values(segment.samples, window, grid.frequencies, fs), "periodogram")


def _periodogram_values(x, window, freqs, fs):
    m = x.size
    w = window.values(m)
    u = float(np.dot(w, w) / m)
    spec = _steering(freqs, m, fs) @ (w * x)
    return (spec.real**2 + spec.imag**2) / (fs * m * u)


def welch_psd(
    segment: TimeSeriesSegment,
    cfg: WelchConfig | None = None,
    grid: FrequencyGrid | None = None,
) -> PsdEstimate:
    """Average of the windowed periodograms of ``K = 1 + (N - M) // D`` sub-segments."""
    cfg = cfg or WelchConfig()
    grid = grid or canonical_grid()
    x = segment.samples
    n, m, d = x.size, cfg.sub_segment_len, cfg.hop
    if m > n:
        raise ConfigError(f"sub-segment length {m} exceeds segment length {n}")
    fs = segment.sample_rate_hz
    _check_grid(grid, fs)
    k = 1 + (n - m) // d
    frames = np.stack([x[i * d : i * d + m] for i in range(k)])
    w = cfg.window.values(m)
    u = float(np.dot(w, w) / m)
    spec = (frames * w) @ _steering(grid.frequencies, m, fs).T
    power = (spec.real**2 + spec.imag**2).mean(axis=0) / (fs * m * u)
    return PsdEstimate(grid, power, "welch")


def burg_fit(segment: TimeSeriesSegment, order: int) -> ArModel:
    """Fit an AR model by Burg's method after removing the segment mean.

    The returned noise variance is the final forward/backward prediction
    error power; for ``order == 0`` it is the (biased) sample variance.
    """
    x = segment.samples - segment.samples.mean()
    n = x.size
    if order < 0 or order >= n:
        raise ConfigError(f"AR order must be in [0, {n - 1}], got {order}")
    err = float(np.dot(x, x) / n)
    if err <= 0.0 or err < 1e-300:
        raise DegenerateInputError("cannot fit an AR model to a constant segment")
    a = np.zeros(0)
    refl = np.zeros(order)
    fwd = x[1:].copy()
    bwd = x[:-1].copy()
    for p in range(order):
        num = -2.0 * np.dot(fwd, bwd)
        den = np.dot(fwd, fwd) + np.dot(bwd, bwd)
        if den <= 0.0:
            raise DegenerateInputError(f"prediction errors vanished at order {p + 1}")
        k = num / den
        refl[p] = k
        a = np.concatenate((a + k * a[::-1], [k]))
        err *= 1.0 - k * k
        fwd, bwd = fwd[1:] + k * bwd[1:], bwd[:-1] + k * fwd[:-1]
    a.setflags(write=False)
    refl.setflags(write=False)
    return ArModel(a, err, 1.0 / segment.sample_rate_hz, refl)


def _ar_denominator(coefficients: np.ndarray, freqs: np.ndarray, sample_period: float) -> np.ndarray:
    poly = np.concatenate(([1.0], coefficients))
    z = np.exp(-2j * np.pi * np.outer(freqs, np.arange(poly.size)) * sample_period) @ poly
    return z.real**2 + z.imag**2


def ar_psd(model: ArModel, grid: FrequencyGrid | None = None) -> PsdEstimate:
    """``sigma^2 T / |1 + sum a_i e^{-j 2 pi f i T}|^2`` on the grid."""
    grid = grid or canonical_grid()
    _check_grid(grid, 1.0 / model.sample_period)
    den = _ar_denominator(model.coefficients, grid.frequencies, model.sample_period)
    return PsdEstimate(grid, model.noise_variance * model.sample_period / den, "burg")


def aic(model: ArModel, n_samples: int) -> float:
    if model.noise_variance <= 0:
        raise DegenerateInputError("AIC undefined for zero prediction-error variance")
    return math.log(model.noise_variance) + 2.0 * model.order / n_samples


def select_ar_order(segment: TimeSeriesSegment, orders) -> int:
    """Order minimising AIC over ``orders``; ties go to the smaller order."""
    orders = sorted(set(int(p) for p in orders))
    if not orders:
        raise ConfigError("empty order range")
    n = len(segment)
    if orders[0] < 0 or orders[-1] >= n:
        raise ConfigError(f"orders must lie in [0, {n - 1}]")
    best, best_val = orders[0], math.inf
    for p in orders:
        val = aic(burg_fit(segment, p), n)
        if val < best_val:
            best, best_val = p, val
    return best


def autocorr_matrix(segment: TimeSeriesSegment, corr_dim: int) -> AutocorrEstimate:
    """Biased lag estimates ``r[k] = (1/N) sum x(n) x(n+k)`` and their Toeplitz matrix."""
    x = segment.samples
    n = x.size
    if not 1 <= corr_dim <= n:
        raise ConfigError(f"correlation dimension must be in [1, {n}], got {corr_dim}")
    lags = np.array([np.dot(x[: n - k], x[k:]) for k in range(corr_dim)]) / n
    return AutocorrEstimate(lags, toeplitz(lags))


def noise_subspace(r: np.ndarray, signal_dim: int) -> np.ndarray:
    """Eigenvectors of ``r`` beyond the ``signal_dim`` largest eigenvalues (as columns)."""
    try:
        vals, vecs = np.linalg.eigh(r)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    return vecs[:, order[signal_dim:]]


def _subspace_pseudospectrum(noise_vecs, freqs, fs, floor):
    # rows of _steering are p(f)^H for p(f) = [1, e^{j2 pi f/fs}, ...]
    proj = _steering(freqs, noise_vecs.shape[0], fs) @ noise_vecs
    den = (proj.real**2 + proj.imag**2).sum(axis=1)
    return 1.0 / np.maximum(den, floor)


def music_psd(
    segment: TimeSeriesSegment,
    cfg: MusicConfig | None = None,
    grid: FrequencyGrid | None = None,
) -> PsdEstimate:
    cfg = cfg or MusicConfig()
    grid = grid or canonical_grid()
    fs = segment.sample_rate_hz
    _check_grid(grid, fs)
    est = autocorr_matrix(segment, cfg.corr_dim)
    vn = noise_subspace(est.matrix, cfg.signal_dim)
    return PsdEstimate(
        grid, _subspace_pseudospectrum(vn, grid.frequencies, fs, cfg.floor_epsilon), "music", True
    )


def pisarenko_psd(
    segment: TimeSeriesSegment,
    cfg: MusicConfig,
    grid: FrequencyGrid | None = None,
) -> PsdEstimate:
    """Pisarenko pseudospectrum from the single smallest-eigenvalue eigenvector."""
    if cfg.corr_dim != cfg.signal_dim + 1:
        raise ConfigError(
            f"Pisarenko needs corr_dim == signal_dim + 1, got {cfg.corr_dim} and {cfg.signal_dim}"
        )
    grid = grid or canonical_grid()
    fs = segment.sample_rate_hz
    _check_grid(grid, fs)
    est = autocorr_matrix(segment, cfg.corr_dim)
    vn = noise_subspace(est.matrix, cfg.signal_dim)
    return PsdEstimate(
        grid, _subspace_pseudospectrum(vn, grid.frequencies, fs, cfg.floor_epsilon), "pisarenko", True
    )


def band_power(psd: PsdEstimate, f_lo: float, f_hi: float) -> float:
    """Trapezoidal integral of the PSD over ``[f_lo, f_hi]`` (linear interpolation at the edges)."""
    f, p = psd.frequencies, psd.power
    if f_lo > f_hi:
        raise ConfigError(f"f_lo ({f_lo}) exceeds f_hi ({f_hi})")
    if f_lo < f[0] or f_hi > f[-1]:
        raise ConfigError(f"band [{f_lo}, {f_hi}] Hz lies outside the grid span [{f[0]}, {f[-1]}] Hz")
    if f_lo == f_hi:
        return 0.0
    inner = (f > f_lo) & (f < f_hi)
    xs = np.concatenate(([f_lo], f[inner], [f_hi]))
    ys = np.concatenate(([np.interp(f_lo, f, p)], p[inner], [np.interp(f_hi, f, p)]))
    return float(np.trapezoid(ys, xs))


# -- feature assembly ----------------------------------------------------

EXTRACTION_METHODS = ("welch", "burg", "music")


@dataclass(frozen=True)
class ExtractionConfig:
    """Per-method estimator settings used by :func:`extract_features`."""

    welch: WelchConfig = field(default_factory=WelchConfig)
    burg_order: int = 6
    music: MusicConfig = field(default_factory=MusicConfig)

    def to_dict(self) -> dict:
        return {
            "welch": {
                "sub_segment_len": self.welch.sub_segment_len,
                "hop": self.welch.hop,
                "window": self.welch.window.kind,
            },
            "burg_order": self.burg_order,
            "music": {
                "signal_dim": self.music.signal_dim,
                "corr_dim": self.music.corr_dim,
                "floor_epsilon": self.music.floor_epsilon,
            },
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExtractionConfig":
        d = d or {}
        return cls(
            welch=WelchConfig(**d["welch"]) if "welch" in d else WelchConfig(),
            burg_order=int(d.get("burg_order", 6)),
            music=MusicConfig(**d["music"]) if "music" in d else MusicConfig(),
        )


def estimate_psd(
    segment: TimeSeriesSegment,
    method: str,
    config: ExtractionConfig | None = None,
    grid: FrequencyGrid | None = None,
) -> PsdEstimate:
    config = config or ExtractionConfig()
    if method == "welch":
        return welch_psd(segment, config.welch, grid)
    if method == "burg":
        return ar_psd(burg_fit(segment, config.burg_order), grid)
    if method == "music":
        return music_psd(segment, config.music, grid)
    raise ConfigError(f"unknown extraction method {method!r}; expected one of {EXTRACTION_METHODS}")


def extract_features(
    sample: SegmentedSample,
    method: str,
    config: ExtractionConfig | None = None,
    grid: FrequencyGrid | None = None,
) -> np.ndarray:
    """Channel-major concatenation of per-channel PSD values."""
    grid = grid or canonical_grid()
    blocks = []
    for ch, seg in enumerate(sample.per_channel):
        try:
            blocks.append(estimate_psd(seg, method, config, grid).power)
        except (DataError, ConfigError, DegenerateInputError, NumericError) as exc:
            raise type(exc)(f"channel {ch}: {exc}") from exc
    return np.concatenate(blocks)
