"""Deterministic paired PPG/ECG heart-rate generator.

The ECG channel is a clamped mean-reverting HR path; the PPG channel adds
bounded jitter and additive artifact bursts, loses a fraction of samples and
carries a constant clock offset.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hr_sentinel.domain import HrSeries
from hr_sentinel.ingest import write_series

logger = logging.getLogger(__name__)

START_TIMESTAMP = 1_700_000_000
RAMP_S = 2
# artifact signs are chosen so the PPG channel stays inside these bounds
PPG_FLOOR_BPM = 30.0
PPG_CEIL_BPM = 225.0
JITTER_CAP_SD = 6.0


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 12
    duration_s: int = 7200
    seed: int = 0
    hr_base_range: tuple[float, float] = (50.0, 90.0)
    reversion_rate: float = 0.01
    volatility: float = 0.5
    hr_clamp: tuple[float, float] = (40.0, 180.0)
    artifact_rate_per_h: float = 12.0
    artifact_duration_s: tuple[int, int] = (5, 120)
    artifact_magnitude_bpm: tuple[float, float] = (10.0, 60.0)
    ppg_jitter_sd: float = 1.0
    dropout_rate: float = 0.01
    # None draws a per-subject lag uniformly from clock_lag_range_s
    clock_lag_s: int | None = None
    clock_lag_range_s: tuple[int, int] = (-30, 30)
    k: int = 10

    def __post_init__(self) -> None:
        for name in ("hr_base_range", "hr_clamp", "artifact_duration_s", "artifact_magnitude_bpm", "clock_lag_range_s"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a non-degenerate range, got {(lo, hi)}")
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if self.duration_s < 10 * self.k:
            raise ValueError(f"duration_s must be >= 10*k = {10 * self.k}")
        if self.artifact_duration_s[0] < 2 * RAMP_S + 1:
            raise ValueError(f"artifacts must last at least {2 * RAMP_S + 1} s")
        if self.artifact_magnitude_bpm[0] <= 0:
            raise ValueError("artifact magnitudes must be > 0")
        if not 0 < self.reversion_rate < 1 or self.volatility < 0:
            raise ValueError("invalid mean-reversion parameters")
        if self.hr_clamp[0] <= 0:
            raise ValueError("hr_clamp must be positive")
        if self.artifact_rate_per_h < 0 or self.ppg_jitter_sd < 0:
            raise ValueError("artifact_rate_per_h and ppg_jitter_sd must be >= 0")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class Burst:
    """An artifact interval in ECG (true) time, inclusive at both ends."""

    start_ts: int
    end_ts: int
    magnitude_bpm: float  # signed offset added to PPG


@dataclass
class SubjectData:
    subject_id: str
    ppg: HrSeries
    ecg: HrSeries
    bursts: list[Burst] = field(default_factory=list)
    lag_s: int = 0


def subject_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"S{i + 1:0{width}d}" for i in range(n)]


def _hr_path(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.hr_clamp
    base = rng.uniform(*cfg.hr_base_range)
    shocks = rng.standard_normal(cfg.duration_s) * cfg.volatility
    hr = np.empty(cfg.duration_s)
    x = base
    for i in range(cfg.duration_s):
        if i:
            x = x + cfg.reversion_rate * (base - x) + shocks[i]
            x = min(max(x, lo), hi)
        hr[i] = x
    return hr


def _bursts(cfg: SynthConfig, rng: np.random.Generator, ecg: np.ndarray) -> tuple[list[tuple[int, int, float]], np.ndarray]:
    """Non-overlapping bursts as (start index, length, signed magnitude) plus the offset trace."""
    offset = np.zeros(cfg.duration_s)
    bursts = []
    if cfg.artifact_rate_per_h == 0:
        return bursts, offset
    mean_gap = 3600.0 / cfg.artifact_rate_per_h
    cap = JITTER_CAP_SD * cfg.ppg_jitter_sd
    t = rng.exponential(mean_gap)
    while True:
        start = int(t)
        length = int(rng.integers(cfg.artifact_duration_s[0], cfg.artifact_duration_s[1] + 1))
        mag = float(rng.uniform(*cfg.artifact_magnitude_bpm))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if start + length > cfg.duration_s:
            break
        seg = ecg[start : start + length]
        up_ok = seg.max() + mag + cap <= PPG_CEIL_BPM
        down_ok = seg.min() - mag - cap >= PPG_FLOOR_BPM
        if sign < 0 and not down_ok:
            sign = 1.0
        elif sign > 0 and not up_ok:
            sign = -1.0
        if not (up_ok if sign > 0 else down_ok):
            mag = max(cfg.artifact_magnitude_bpm[0], PPG_CEIL_BPM - cap - seg.max())
            sign = 1.0
        j = np.arange(length)
        shape = np.minimum(1.0, np.minimum(j + 1, length - j) / (RAMP_S + 1))
        offset[start : start + length] = sign * mag * shape
        bursts.append((start, length, sign * mag))
        t = start + length + rng.exponential(mean_gap)
    return bursts, offset


def generate_subject(cfg: SynthConfig, index: int) -> SubjectData:
    sid = subject_ids(cfg.n_subjects)[index]
    rng = np.random.default_rng(cfg.seed + index)
    ecg = _hr_path(cfg, rng)
    bursts, offset = _bursts(cfg, rng, ecg)
    cap = JITTER_CAP_SD * cfg.ppg_jitter_sd
    jitter = np.clip(rng.standard_normal(cfg.duration_s) * cfg.ppg_jitter_sd, -cap, cap)
    ppg = ecg + offset + jitter
    keep = rng.random(cfg.duration_s) >= cfg.dropout_rate
    lo, hi = cfg.clock_lag_range_s
    lag = int(rng.integers(lo, hi + 1)) if cfg.clock_lag_s is None else int(cfg.clock_lag_s)

    ts = START_TIMESTAMP + np.arange(cfg.duration_s, dtype=np.int64)
    return SubjectData(
        sid,
        HrSeries("ppg", sid, ts[keep] + lag, ppg[keep]),
        HrSeries("ecg", sid, ts, ecg),
        [Burst(int(ts[s]), int(ts[s + n - 1]), m) for s, n, m in bursts],
        lag,
    )


def generate(cfg: SynthConfig, out_dir: str | os.PathLike | None = None) -> list[SubjectData]:
    """Generate every subject; with ``out_dir`` also write ingest-format files.

    Files: ``<sid>_ppg.csv``, ``<sid>_ecg.csv``, ``truth_bursts.csv`` and
    ``truth_lags.csv``. A fixed seed gives byte-identical files.
    """
    subjects = [generate_subject(cfg, i) for i in range(cfg.n_subjects)]
    if out_dir is not None:
        write_subjects(subjects, out_dir)
    return subjects


def write_subjects(subjects: list[SubjectData], out_dir: str | os.PathLike) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    bursts = ["subject_id,start_ts,end_ts,magnitude_bpm"]
    lags = ["subject_id,lag_s"]
    for s in subjects:
        for series in (s.ppg, s.ecg):
            path = out / f"{s.subject_id}_{series.sensor_id}.csv"
            write_series(series, path)
            written.append(path)
        bursts += [f"{s.subject_id},{b.start_ts},{b.end_ts},{b.magnitude_bpm!r}" for b in s.bursts]
        lags.append(f"{s.subject_id},{s.lag_s}")
    for name, rows in (("truth_bursts.csv", bursts), ("truth_lags.csv", lags)):
        path = out / name
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(path)
    logger.info("wrote %d subjects to %s", len(subjects), out)
    return written
