"""Rolling windows over synced series and the subject-level split."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from hr_sentinel.domain import SyncedSeries, Window

DATASET_MAGIC = b"HRWIN1\0\0"
DATASET_VERSION = 1
_HEADER = np.dtype([("magic", "S8"), ("version", "<u2"), ("k", "<u2"), ("count", "<u4")])
TRAIN, TEST = "train", "test"


class GapError(ValueError):
    """A requested window would span a timestamp discontinuity."""


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class WindowConfig:
    k: int = 10
    stride: int = 1

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not 1 <= self.stride <= self.k:
            raise ValueError("stride must satisfy 1 <= stride <= k")


def gap_free_runs(timestamps: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges of maximal runs with 1 s spacing."""
    ts = np.asarray(timestamps)
    if ts.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(ts) != 1) + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [ts.size]))
    return list(zip(starts.tolist(), stops.tolist()))


def window_end_indices(timestamps: np.ndarray, cfg: WindowConfig) -> np.ndarray:
    ends = []
    for start, stop in gap_free_runs(timestamps):
        n = stop - start
        if n >= cfg.k:
            ends.append(np.arange(start + cfg.k - 1, stop, cfg.stride))
    return np.concatenate(ends) if ends else np.zeros(0, dtype=np.int64)


def window_at(series: SyncedSeries, end_index: int, k: int) -> Window:
    """The single window of length ``k`` ending at ``end_index``; fails on gaps."""
    if end_index < k - 1 or end_index >= len(series):
        raise IndexError(f"no room for a {k}-sample window ending at index {end_index}")
    ts = series.timestamps[end_index - k + 1 : end_index + 1]
    if int(ts[-1] - ts[0]) != k - 1:
        raise GapError(f"window ending at {int(ts[-1])} spans a gap")
    return Window(
        int(ts[-1]),
        tuple(series.hr_ppg[end_index - k + 1 : end_index + 1].tolist()),
        float(series.diff_true[end_index]),
        series.subject_id,
    )


def window_arrays(series: SyncedSeries, cfg: WindowConfig = WindowConfig()):
    """Columnar windows: ``(end_timestamps, ppg_values[n, k], labels)``."""
    ends = window_end_indices(series.timestamps, cfg)
    if ends.size == 0:
        return (np.zeros(0, np.int64), np.zeros((0, cfg.k)), np.zeros(0))
    idx = ends[:, None] + np.arange(-cfg.k + 1, 1)[None, :]
    return series.timestamps[ends], series.hr_ppg[idx], series.diff_true[ends]


def make_windows(series: SyncedSeries, cfg: WindowConfig = WindowConfig()) -> list[Window]:
    ends, values, labels = window_arrays(series, cfg)
    return [
        Window(int(t), tuple(v), float(y), series.subject_id)
        for t, v, y in zip(ends.tolist(), values.tolist(), labels.tolist())
    ]


@dataclass(eq=False)
class Dataset:
    """Windows from many subjects plus the subject -> split manifest.

    Stored column-wise; ``windows`` materialises :class:`Window` objects.
    ``subject_index`` points into ``subjects``.
    """

    k: int
    subjects: list[str]
    split_manifest: dict[str, str]
    end_timestamps: np.ndarray
    ppg_values: np.ndarray
    labels: np.ndarray
    subject_index: np.ndarray
    _order: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.end_timestamps = np.asarray(self.end_timestamps, dtype=np.int64)
        self.ppg_values = np.asarray(self.ppg_values, dtype=np.float64).reshape(-1, self.k)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        self.subject_index = np.asarray(self.subject_index, dtype=np.int64)
        n = self.end_timestamps.size
        if not (self.ppg_values.shape[0] == self.labels.size == self.subject_index.size == n):
            raise ValueError("dataset columns differ in length")
        if set(self.subjects) != set(self.split_manifest):
            raise ValueError("every subject needs a manifest entry")
        if n and (self.subject_index.min() < 0 or self.subject_index.max() >= len(self.subjects)):
            raise ValueError("subject index out of range")
        self._order = {s: i for i, s in enumerate(self.subjects)}

    def __len__(self) -> int:
        return int(self.end_timestamps.size)

    @property
    def windows(self) -> list[Window]:
        return [self.window(i) for i in range(len(self))]

    def window(self, i: int) -> Window:
        return Window(
            int(self.end_timestamps[i]),
            tuple(self.ppg_values[i].tolist()),
            float(self.labels[i]),
            self.subjects[int(self.subject_index[i])],
        )

    def subjects_in(self, split: str) -> list[str]:
        return [s for s in self.subjects if self.split_manifest[s] == split]

    def mask_for(self, subjects: Iterable[str]) -> np.ndarray:
        wanted = [self._order[s] for s in subjects]
        return np.isin(self.subject_index, wanted)

    def subset(self, subjects: Iterable[str]) -> Dataset:
        m = self.mask_for(subjects)
        return Dataset(
            self.k,
            list(self.subjects),
            dict(self.split_manifest),
            self.end_timestamps[m],
            self.ppg_values[m],
            self.labels[m],
            self.subject_index[m],
        )

    def split(self, name: str) -> Dataset:
        return self.subset(self.subjects_in(name))

    def counts_by_subject(self) -> dict[str, int]:
        counts = np.bincount(self.subject_index, minlength=len(self.subjects))
        return {s: int(c) for s, c in zip(self.subjects, counts)}


def n_train_subjects(n_subjects: int, train_fraction: float) -> int:
    # guard against 0.7 * 10 == 7.000000000000001 style round-up
    return math.ceil(train_fraction * n_subjects - 1e-9)


def split_by_subject(
    all_series: Sequence[SyncedSeries], train_fraction: float, cfg: WindowConfig = WindowConfig()
) -> Dataset:
    """Window every series; the first ceil(fraction * S) sorted subjects train."""
    subjects = sorted({s.subject_id for s in all_series})
    if len(subjects) < 2:
        raise ValueError("need at least 2 subjects to split")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    n_train = n_train_subjects(len(subjects), train_fraction)
    if n_train < 1 or n_train >= len(subjects):
        raise ValueError(
            f"train_fraction={train_fraction} over {len(subjects)} subjects leaves an empty split"
        )
    manifest = {s: (TRAIN if i < n_train else TEST) for i, s in enumerate(subjects)}
    order = {s: i for i, s in enumerate(subjects)}
    cols = ([], [], [], [])
    for series in sorted(all_series, key=lambda s: (order[s.subject_id], int(s.timestamps[0]) if len(s) else 0)):
        ends, values, labels = window_arrays(series, cfg)
        cols[0].append(ends)
        cols[1].append(values)
        cols[2].append(labels)
        cols[3].append(np.full(ends.size, order[series.subject_id], dtype=np.int64))
    return Dataset(
        cfg.k,
        subjects,
        manifest,
        np.concatenate(cols[0]),
        np.concatenate(cols[1]).reshape(-1, cfg.k),
        np.concatenate(cols[2]),
        np.concatenate(cols[3]),
    )


def _record_dtype(k: int) -> np.dtype:
    return np.dtype(
        [("end", "<i8"), ("k", "<u2"), ("ppg", "<f4", (k,)), ("label", "<f4"), ("subject", "<u2")]
    )


def manifest_path(path: str | os.PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def save_dataset(ds: Dataset, path: str | os.PathLike) -> None:
    """Binary window records plus a ``<name>.manifest`` text file.

    Values are stored as float32, so a reload returns float32-rounded bpm.
    """
    if len(ds.subjects) > 0xFFFF:
        raise ValueError("too many subjects for a 2-byte index")
    header = np.zeros(1, _HEADER)
    header[0] = (DATASET_MAGIC, DATASET_VERSION, ds.k, len(ds))
    rec = np.zeros(len(ds), _record_dtype(ds.k))
    rec["end"] = ds.end_timestamps
    rec["k"] = ds.k
    rec["ppg"] = ds.ppg_values
    rec["label"] = ds.labels
    rec["subject"] = ds.subject_index
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(rec.tobytes())
    lines = ["# subject_index,subject_id,split"]
    lines += [f"{i},{s},{ds.split_manifest[s]}" for i, s in enumerate(ds.subjects)]
    manifest_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | os.PathLike) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise DatasetFormatError(f"{path}: truncated header")
    header = np.frombuffer(raw[: _HEADER.itemsize], _HEADER)[0]
    if bytes(header["magic"]).ljust(8, b"\0") != DATASET_MAGIC:
        raise DatasetFormatError(f"{path}: not a window dataset (bad magic)")
    if int(header["version"]) != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {int(header['version'])}")
    k, count = int(header["k"]), int(header["count"])
    dt = _record_dtype(k)
    body = raw[_HEADER.itemsize :]
    if len(body) != count * dt.itemsize:
        raise DatasetFormatError(
            f"{path}: expected {count} records ({count * dt.itemsize} bytes), found {len(body)} bytes"
        )
    rec = np.frombuffer(body, dt)
    if count and np.any(rec["k"] != k):
        raise DatasetFormatError(f"{path}: record window length disagrees with header")

    subjects, manifest = [], {}
    for line in manifest_path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        idx, subject, split = line.strip().split(",")
        if int(idx) != len(subjects) or split not in (TRAIN, TEST):
            raise DatasetFormatError(f"{path}: malformed manifest line {line!r}")
        subjects.append(subject)
        manifest[subject] = split
    try:
        return Dataset(
            k,
            subjects,
            manifest,
            rec["end"].astype(np.int64),
            rec["ppg"].astype(np.float64),
            rec["label"].astype(np.float64),
            rec["subject"].astype(np.int64),
        )
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None
