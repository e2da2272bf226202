"""Trials, segments, dataset I/O and a synthetic EEG-like generator.

A dataset on disk is a JSON manifest plus one headerless CSV per trial::

    {
      "sample_rate_hz": 250.0,
      "channel_names": ["C3", "C4", "P3", "P4", "O1", "O2"],
      "trials": [
        {"subject": "1", "task": "B", "trial_index": 0, "file": "s1_B_0.csv"},
        ...
      ]
    }

Each CSV row holds one sample, one column per channel. Trial file paths
are resolved relative to the manifest.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataError, ParseError

TASKS = ("B", "L", "M", "C", "R")
TASK_NAMES = {
    "B": "baseline",
    "L": "letter composing",
    "M": "mathematical",
    "C": "counting",
    "R": "rotation",
}
CANONICAL_CHANNELS = ("C3", "C4", "P3", "P4", "O1", "O2")


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeriesSegment:
    """A fixed-rate window of real samples; the unit of PSD estimation."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = _frozen_array(self.samples, 1)
        if samples.size == 0:
            raise DataError("segment has no samples")
        if not np.all(np.isfinite(samples)):
            raise DataError("segment contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


@dataclass(frozen=True)
class Trial:
    """One recorded trial: ``channels`` is (n_channels, n_samples)."""

    channels: np.ndarray
    task_label: str
    subject_id: str
    trial_index: int

    def __post_init__(self):
        channels = _frozen_array(self.channels, 2)
        if self.task_label not in TASKS:
            raise DataError(f"unknown task label {self.task_label!r}; expected one of {TASKS}")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "subject_id", str(self.subject_id))
        object.__setattr__(self, "trial_index", int(self.trial_index))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class Dataset:
    trials: tuple
    sample_rate_hz: float
    channel_names: tuple

    def __post_init__(self):
        trials = tuple(self.trials)
        names = tuple(str(n) for n in self.channel_names)
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        for t in trials:
            if t.n_channels != len(names):
                raise DataError(
                    f"trial (subject {t.subject_id}, task {t.task_label}, index {t.trial_index}) "
                    f"has {t.n_channels} channels, manifest declares {len(names)}"
                )
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def subjects(self) -> list[str]:
        return sorted({t.subject_id for t in self.trials})

    @property
    def tasks(self) -> list[str]:
        present = {t.task_label for t in self.trials}
        return [t for t in TASKS if t in present]

    def select(self, subject: str | None = None, task: str | None = None) -> list[Trial]:
        return [
            t
            for t in self.trials
            if (subject is None or t.subject_id == subject) and (task is None or t.task_label == task)
        ]


@dataclass(frozen=True)
class SegmentedSample:
    """Per-channel segments cut from the same time window of one trial."""

    per_channel: tuple
    label: int
    origin: tuple  # (subject, trial_index, segment_index)

    def __post_init__(self):
        per_channel = tuple(self.per_channel)
        if not per_channel:
            raise DataError("sample has no channels")
        n, fs = len(per_channel[0]), per_channel[0].sample_rate_hz
        if any(len(s) != n or s.sample_rate_hz != fs for s in per_channel):
            raise DataError("all channel segments must share length and sample rate")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "per_channel", per_channel)
        object.__setattr__(self, "origin", tuple(self.origin))

    @property
    def sample_rate_hz(self) -> float:
        return self.per_channel[0].sample_rate_hz


def segment_length(segment_seconds: float, sample_rate_hz: float) -> int:
    """Samples per segment; the product must be (close to) an integer >= 2."""
    if not segment_seconds > 0:
        raise ConfigError(f"segment length must be positive, got {segment_seconds}")
    exact = segment_seconds * sample_rate_hz
    n = int(round(exact))
    if abs(exact - n) > 1e-6 * max(1.0, exact) or n < 2:
        raise ConfigError(
            f"{segment_seconds} s at {sample_rate_hz} Hz is {exact} samples; need an integer >= 2"
        )
    return n


def segment_trial(
    trial: Trial,
    segment_seconds: float,
    sample_rate_hz: float,
    label: int = 0,
) -> list[SegmentedSample]:
    """Cut a trial into contiguous, non-overlapping segments.

    Trailing samples that do not fill a whole segment are dropped.
    """
    n = segment_length(segment_seconds, sample_rate_hz)
    if not np.all(np.isfinite(trial.channels)):
        raise DataError(
            f"trial (subject {trial.subject_id}, index {trial.trial_index}) has non-finite samples"
        )
    count = trial.n_samples // n
    if count == 0:
        raise DataError(
            f"segment of {n} samples is longer than the trial ({trial.n_samples} samples)"
        )
    out = []
    for k in range(count):
        block = trial.channels[:, k * n : (k + 1) * n]
        out.append(
            SegmentedSample(
                per_channel=tuple(TimeSeriesSegment(row, sample_rate_hz) for row in block),
                label=label,
                origin=(trial.subject_id, trial.trial_index, k),
            )
        )
    return out


# -- dataset I/O ---------------------------------------------------------


def _read_trial_csv(path: Path, n_channels: int) -> np.ndarray:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open trial file ({exc.strerror})", path) from exc
    rows = []
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != n_channels:
                raise ParseError(
                    f"channel length mismatch: expected {n_channels} columns, found {len(row)}",
                    path,
                    lineno,
                )
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"not a number: {exc}", path, lineno) from exc
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite sample", path, lineno)
            rows.append(values)
    if not rows:
        return np.zeros((n_channels, 0))
    return np.asarray(rows, dtype=float).T


def _manifest_line(text: str, needle: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_dataset(manifest_path) -> Dataset:
    """Read a manifest and its trial CSV files, validating every invariant."""
    manifest_path = Path(manifest_path)
    try:
        text = manifest_path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read manifest ({exc.strerror})", manifest_path) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, manifest_path, exc.lineno) from exc

    for key in ("sample_rate_hz", "channel_names", "trials"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}", manifest_path)
    names = doc["channel_names"]
    base = manifest_path.parent
    trials = []
    expected_len = None
    for entry in doc["trials"]:
        task = entry.get("task")
        if task not in TASKS:
            raise ParseError(
                f"unknown task label {task!r}",
                manifest_path,
                _manifest_line(text, f'"{task}"') if task is not None else None,
            )
        file_path = base / entry["file"]
        channels = _read_trial_csv(file_path, len(names))
        if expected_len is None:
            expected_len = channels.shape[1]
        elif channels.shape[1] != expected_len:
            raise ParseError(
                f"channel length mismatch: {channels.shape[1]} samples, other trials have {expected_len}",
                file_path,
                channels.shape[1] + 1,
            )
        trials.append(Trial(channels, task, str(entry["subject"]), int(entry["trial_index"])))
    try:
        return Dataset(trials, float(doc["sample_rate_hz"]), names)
    except DataError as exc:
        raise ParseError(str(exc), manifest_path) from exc


def _atomic_write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_dataset(dataset: Dataset, manifest_path) -> Path:
    """Write ``dataset`` as a manifest plus per-trial CSV files next to it.

    Samples are printed with 9 significant digits.
    """
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    stem = manifest_path.stem
    entries = []
    for t in dataset.trials:
        fname = f"{stem}_s{t.subject_id}_{t.task_label}_{t.trial_index}.csv"
        lines = [",".join(f"{v:.9g}" for v in row) for row in t.channels.T]
        _atomic_write_text(manifest_path.parent / fname, "\n".join(lines) + ("\n" if lines else ""))
        entries.append(
            {"subject": t.subject_id, "task": t.task_label, "trial_index": t.trial_index, "file": fname}
        )
    doc = {
        "sample_rate_hz": dataset.sample_rate_hz,
        "channel_names": list(dataset.channel_names),
        "trials": entries,
    }
    _atomic_write_text(manifest_path, json.dumps(doc, indent=2) + "\n")
    return manifest_path


# -- synthetic generator -------------------------------------------------


@dataclass(frozen=True)
class BandComponent:
    """A narrow-band sinusoid injected into some channels.

    Each trial draws its frequency uniformly from
    ``center_hz +/- bandwidth_hz / 2`` and its phase uniformly per channel.
    """

    center_hz: float
    bandwidth_hz: float
    amplitude: tuple  # one entry per channel

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["center_hz"]), float(d.get("bandwidth_hz", 0.0)), tuple(d["amplitude"]))

    def to_dict(self):
        return {"center_hz": self.center_hz, "bandwidth_hz": self.bandwidth_hz, "amplitude": list(self.amplitude)}


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for :func:`synth_generate`.

    ``tasks`` maps a task label to the band components added on top of the
    shared background. The background is white noise of ``noise_variance``,
    optionally coloured by the AR(2) recursion
    ``y[n] = ar2[0] * y[n-1] + ar2[1] * y[n-2] + e[n]``.
    """

    tasks: dict
    sample_rate_hz: float = 250.0
    trial_seconds: float = 10.0
    channel_names: tuple = CANONICAL_CHANNELS
    subjects: tuple = ("1",)
    trials_per_task: int = 5
    noise_variance: float = 1.0
    background_ar2: tuple | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "tasks", {str(k): tuple(v) for k, v in self.tasks.items()}
        )
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "subjects", tuple(str(s) for s in self.subjects))
        if self.background_ar2 is not None:
            object.__setattr__(self, "background_ar2", tuple(float(a) for a in self.background_ar2))
        self.validate()

    def validate(self):
        nyq = self.sample_rate_hz / 2.0
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.noise_variance < 0:
            raise ConfigError("noise_variance must be >= 0")
        if self.trials_per_task < 0:
            raise ConfigError("trials_per_task must be >= 0")
        n = self.trial_seconds * self.sample_rate_hz
        if n < 1 or abs(n - round(n)) > 1e-6 * n:
            raise ConfigError(f"trial length {n} samples is not a positive integer")
        for task, comps in self.tasks.items():
            if task not in TASKS:
                raise ConfigError(f"unknown task label {task!r}")
            for c in comps:
                if c.center_hz >= nyq or c.center_hz < 0:
                    raise ConfigError(
                        f"band centre {c.center_hz} Hz for task {task} is outside [0, Nyquist={nyq})"
                    )
                if len(c.amplitude) != len(self.channel_names):
                    raise ConfigError(
                        f"band at {c.center_hz} Hz for task {task} has {len(c.amplitude)} amplitudes "
                        f"for {len(self.channel_names)} channels"
                    )
        if self.background_ar2 is not None:
            a1, a2 = self.background_ar2
            # stationarity triangle of the AR(2) recursion
            if not (abs(a2) < 1 and a2 + a1 < 1 and a2 - a1 < 1):
                raise ConfigError(f"background AR(2) coefficients {self.background_ar2} are not stationary")

    @property
    def n_samples(self) -> int:
        return int(round(self.trial_seconds * self.sample_rate_hz))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        tasks = {k: tuple(BandComponent.from_dict(c) for c in v) for k, v in d["tasks"].items()}
        kwargs = {k: d[k] for k in (
            "sample_rate_hz", "trial_seconds", "channel_names", "subjects",
            "trials_per_task", "noise_variance", "background_ar2",
        ) if k in d}
        return cls(tasks=tasks, **kwargs)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: malformed synthetic spec ({exc})") from exc

    def to_dict(self) -> dict:
        return {
            "tasks": {k: [c.to_dict() for c in v] for k, v in self.tasks.items()},
            "sample_rate_hz": self.sample_rate_hz,
            "trial_seconds": self.trial_seconds,
            "channel_names": list(self.channel_names),
            "subjects": list(self.subjects),
            "trials_per_task": self.trials_per_task,
            "noise_variance": self.noise_variance,
            "background_ar2": None if self.background_ar2 is None else list(self.background_ar2),
        }


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Generate a dataset deterministically from ``(spec, seed)``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    n = spec.n_samples
    n_ch = len(spec.channel_names)
    t = np.arange(n) / spec.sample_rate_hz
    sd = math.sqrt(spec.noise_variance)
    trials = []
    for subject in spec.subjects:
        for task in sorted(spec.tasks, key=TASKS.index):
            for idx in range(spec.trials_per_task):
                x = sd * rng.standard_normal((n_ch, n))
                if spec.background_ar2 is not None:
                    a1, a2 = spec.background_ar2
                    x = lfilter([1.0], [1.0, -a1, -a2], x, axis=1)
                for comp in spec.tasks[task]:
                    f = comp.center_hz + comp.bandwidth_hz * (rng.random() - 0.5)
                    phases = rng.uniform(0.0, 2 * np.pi, size=n_ch)
                    amp = np.asarray(comp.amplitude, dtype=float)
                    x = x + amp[:, None] * np.cos(2 * np.pi * f * t[None, :] + phases[:, None])
                trials.append(Trial(x, task, subject, idx))
    return Dataset(trials, spec.sample_rate_hz, spec.channel_names)
