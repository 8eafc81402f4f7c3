"""Shared value types for heart-rate series and accuracy labels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def _check_hr(value: float, what: str = "hr_bpm") -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{what} must be finite and > 0, got {value!r}")
    return value


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_increasing(ts: np.ndarray) -> None:
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 1
        raise ValueError(
            f"timestamps must be strictly increasing (index {bad}: "
            f"{int(ts[bad - 1])} -> {int(ts[bad])})"
        )


@dataclass(frozen=True, slots=True)
class HrSample:
    timestamp: int
    hr_bpm: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "hr_bpm", _check_hr(self.hr_bpm))


@dataclass(frozen=True, eq=False)
class HrSeries:
    """1 Hz heart-rate readings from one sensor, stored column-wise.

    Missing readings are simply absent timestamps; the series never holds
    sentinel values.
    """

    sensor_id: str
    subject_id: str
    timestamps: np.ndarray
    hr_bpm: np.ndarray

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64).reshape(-1)
        hr = np.asarray(self.hr_bpm, dtype=np.float64).reshape(-1)
        if ts.shape != hr.shape:
            raise ValueError("timestamps and hr_bpm must have equal length")
        if hr.size and not (np.all(np.isfinite(hr)) and np.all(hr > 0)):
            raise ValueError("hr_bpm values must be finite and > 0")
        _check_increasing(ts)
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "hr_bpm", _frozen(hr))

    @classmethod
    def from_samples(
        cls, sensor_id: str, subject_id: str, samples: Iterable[HrSample]
    ) -> HrSeries:
        samples = list(samples)
        return cls(
            sensor_id,
            subject_id,
            np.array([s.timestamp for s in samples], dtype=np.int64),
            np.array([s.hr_bpm for s in samples], dtype=np.float64),
        )

    @property
    def samples(self) -> list[HrSample]:
        return [HrSample(int(t), float(v)) for t, v in zip(self.timestamps, self.hr_bpm)]

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HrSeries):
            return NotImplemented
        return (
            self.sensor_id == other.sensor_id
            and self.subject_id == other.subject_id
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.hr_bpm, other.hr_bpm)
        )

    def select(self, mask: np.ndarray) -> HrSeries:
        return HrSeries(self.sensor_id, self.subject_id, self.timestamps[mask], self.hr_bpm[mask])

    def shifted(self, seconds: int) -> HrSeries:
        return HrSeries(self.sensor_id, self.subject_id, self.timestamps + int(seconds), self.hr_bpm)


@dataclass(frozen=True, slots=True)
class SyncedSample:
    timestamp: int
    hr_ppg: float
    hr_ecg: float
    diff_true: float

    def __post_init__(self) -> None:
        if self.diff_true != abs(self.hr_ppg - self.hr_ecg):
            raise ValueError("diff_true must equal |hr_ppg - hr_ecg|")


def make_synced_sample(ts: int, hr_ppg: float, hr_ecg: float) -> SyncedSample:
    hr_ppg = _check_hr(hr_ppg, "hr_ppg")
    hr_ecg = _check_hr(hr_ecg, "hr_ecg")
    return SyncedSample(int(ts), hr_ppg, hr_ecg, abs(hr_ppg - hr_ecg))


@dataclass(frozen=True, eq=False)
class SyncedSeries:
    """Time-aligned PPG/ECG readings of one subject after lag correction."""

    subject_id: str
    applied_lag_s: int
    timestamps: np.ndarray
    hr_ppg: np.ndarray
    hr_ecg: np.ndarray
    diff_true: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64).reshape(-1)
        ppg = np.asarray(self.hr_ppg, dtype=np.float64).reshape(-1)
        ecg = np.asarray(self.hr_ecg, dtype=np.float64).reshape(-1)
        if not (ts.shape == ppg.shape == ecg.shape):
            raise ValueError("column lengths differ")
        for name, col in (("hr_ppg", ppg), ("hr_ecg", ecg)):
            if col.size and not (np.all(np.isfinite(col)) and np.all(col > 0)):
                raise ValueError(f"{name} values must be finite and > 0")
        _check_increasing(ts)
        object.__setattr__(self, "applied_lag_s", int(self.applied_lag_s))
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "hr_ppg", _frozen(ppg))
        object.__setattr__(self, "hr_ecg", _frozen(ecg))
        object.__setattr__(self, "diff_true", _frozen(np.abs(ppg - ecg)))

    @classmethod
    def from_samples(
        cls, subject_id: str, applied_lag_s: int, samples: Sequence[SyncedSample]
    ) -> SyncedSeries:
        return cls(
            subject_id,
            applied_lag_s,
            np.array([s.timestamp for s in samples], dtype=np.int64),
            np.array([s.hr_ppg for s in samples], dtype=np.float64),
            np.array([s.hr_ecg for s in samples], dtype=np.float64),
        )

    @property
    def samples(self) -> list[SyncedSample]:
        return [
            SyncedSample(int(t), float(p), float(e), float(d))
            for t, p, e, d in zip(self.timestamps, self.hr_ppg, self.hr_ecg, self.diff_true)
        ]

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SyncedSeries):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.applied_lag_s == other.applied_lag_s
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.hr_ppg, other.hr_ppg)
            and np.array_equal(self.hr_ecg, other.hr_ecg)
        )


@dataclass(frozen=True, slots=True)
class Window:
    """The last k PPG readings (oldest first) ending at ``end_timestamp``.

    ``label_diff_true`` is the true error at the final sample.
    """

    end_timestamp: int
    ppg_values: tuple[float, ...]
    label_diff_true: float
    subject_id: str

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.ppg_values)
        if len(vals) < 2:
            raise ValueError("a window needs at least 2 values")
        object.__setattr__(self, "ppg_values", vals)
        object.__setattr__(self, "end_timestamp", int(self.end_timestamp))
        object.__setattr__(self, "label_diff_true", float(self.label_diff_true))

    @property
    def k(self) -> int:
        return len(self.ppg_values)


class AccuracyLabel(enum.Enum):
    ACCEPTABLE = "acceptable"
    MARGINAL = "marginal"
    UNACCEPTABLE = "unacceptable"
    WARMING_UP = "warming_up"

    @property
    def display_color(self) -> str:
        return _COLORS[self]

    @property
    def severity(self) -> int:
        """Rank for ordering the three judged labels; WARMING_UP is -1."""
        return _SEVERITY[self]


_COLORS = {
    AccuracyLabel.ACCEPTABLE: "green",
    AccuracyLabel.MARGINAL: "yellow",
    AccuracyLabel.UNACCEPTABLE: "orange",
    AccuracyLabel.WARMING_UP: "gray",
}
_SEVERITY = {
    AccuracyLabel.WARMING_UP: -1,
    AccuracyLabel.ACCEPTABLE: 0,
    AccuracyLabel.MARGINAL: 1,
    AccuracyLabel.UNACCEPTABLE: 2,
}


@dataclass(frozen=True, slots=True)
class FilterThresholds:
    tau_a: float = 20.0
    tau_b: float = 34.0

    def __post_init__(self) -> None:
        a, b = float(self.tau_a), float(self.tau_b)
        if not (math.isfinite(a) and math.isfinite(b) and 0 < a < b):
            raise ValueError(f"thresholds must satisfy 0 < tau_a < tau_b, got {a}, {b}")
        object.__setattr__(self, "tau_a", a)
        object.__setattr__(self, "tau_b", b)
