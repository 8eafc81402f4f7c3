"""Sensor CSV input and PPG/ECG alignment."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from hr_sentinel.domain import HrSample, HrSeries, SyncedSeries

logger = logging.getLogger(__name__)

CSV_HEADER = "timestamp_utc,hr_bpm"
SYNCED_HEADER = "timestamp_utc,hr_ppg,hr_ecg,diff_true"


class IngestError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, path: str | os.PathLike | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where += self.path
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class LagSearchError(ValueError):
    """No candidate lag leaves enough overlapping samples."""


@dataclass(frozen=True)
class IngestConfig:
    max_lag_search_s: int = 120
    hr_min_bpm: float = 25.0
    hr_max_bpm: float = 230.0
    max_step_bpm_per_s: float = 40.0
    # minimum overlap for a lag candidate to count; matches the default window length
    min_overlap: int = 10
    robust_lag: bool = True
    lag_keep_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.max_lag_search_s < 0:
            raise ValueError("max_lag_search_s must be >= 0")
        if not self.hr_min_bpm < self.hr_max_bpm:
            raise ValueError("hr_min_bpm must be < hr_max_bpm")
        if self.max_step_bpm_per_s <= 0:
            raise ValueError("max_step_bpm_per_s must be > 0")
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")
        if not 0 < self.lag_keep_fraction <= 1:
            raise ValueError("lag_keep_fraction must be in (0, 1]")


def iter_csv_samples(fh: IO[str], source: str | None = None) -> Iterator[tuple[int, HrSample]]:
    """Yield ``(line_number, sample)`` from an ingest-format CSV stream.

    The header is required. Blank lines are skipped. Values are validated
    row by row so a live pipe can be consumed incrementally.
    """
    header = fh.readline()
    if not header:
        raise IngestError("empty file", source, 1)
    if header.strip().lstrip("﻿") != CSV_HEADER:
        raise IngestError(f"expected header {CSV_HEADER!r}, got {header.strip()!r}", source, 1)
    for lineno, raw in enumerate(fh, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise IngestError(f"expected 2 fields, got {len(parts)}", source, lineno)
        try:
            ts = int(parts[0])
            hr = float(parts[1])
        except ValueError:
            raise IngestError(f"cannot parse row {line!r}", source, lineno) from None
        if not math.isfinite(hr) or hr <= 0:
            raise IngestError(f"hr_bpm must be finite and > 0, got {parts[1]!r}", source, lineno)
        yield lineno, HrSample(ts, hr)


def parse_series(path: str | os.PathLike, sensor_id: str, subject_id: str) -> HrSeries:
    ts: list[int] = []
    hr: list[float] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, sample in iter_csv_samples(fh, str(path)):
            if ts and sample.timestamp <= ts[-1]:
                kind = "duplicate" if sample.timestamp == ts[-1] else "non-monotonic"
                raise IngestError(f"{kind} timestamp {sample.timestamp}", path, lineno)
            ts.append(sample.timestamp)
            hr.append(sample.hr_bpm)
    if not ts:
        raise IngestError("file contains no samples", path)
    return HrSeries(sensor_id, subject_id, np.array(ts, dtype=np.int64), np.array(hr))


def write_series(series: HrSeries, path: str | os.PathLike) -> None:
    lines = [CSV_HEADER]
    lines += [f"{int(t)},{float(v)!r}" for t, v in zip(series.timestamps, series.hr_bpm)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def plausibility_filter(
    series: HrSeries, cfg: IngestConfig = IngestConfig(), step_cap: bool = True
) -> HrSeries:
    """Drop physiologically implausible readings, leaving gaps.

    A reading is dropped if it falls outside ``[hr_min_bpm, hr_max_bpm]`` or,
    with ``step_cap``, if it moved more than ``max_step_bpm_per_s`` per
    elapsed second away from the last reading that was kept.
    """
    ts, hr = series.timestamps, series.hr_bpm
    keep = (hr >= cfg.hr_min_bpm) & (hr <= cfg.hr_max_bpm)
    if step_cap:
        last_t = last_v = None
        for i in np.flatnonzero(keep):
            t, v = int(ts[i]), float(hr[i])
            if last_t is not None and abs(v - last_v) > cfg.max_step_bpm_per_s * (t - last_t):
                keep[i] = False
                continue
            last_t, last_v = t, v
    return series.select(keep)


def _dense(series: HrSeries) -> tuple[int, np.ndarray]:
    lo = int(series.timestamps[0])
    out = np.full(int(series.timestamps[-1]) - lo + 1, np.nan)
    out[series.timestamps - lo] = series.hr_bpm
    return lo, out


def lag_rmse_profile(
    ppg: HrSeries, ecg: HrSeries, cfg: IngestConfig = IngestConfig(), keep_fraction: float = 1.0
) -> dict[int, tuple[float, int]]:
    """RMSE and overlap count for every admissible lag.

    A lag ``L`` is the correction added to PPG timestamps: the PPG reading at
    ``u`` is compared against the ECG reading at ``u + L``. With
    ``keep_fraction < 1`` only that fraction of the smallest absolute
    residuals enters the RMSE.
    """
    if len(ppg) == 0 or len(ecg) == 0:
        raise LagSearchError("both series must be non-empty")
    e_lo, e = _dense(ecg)
    p_lo, p = _dense(ppg)
    e_hi, p_hi = e_lo + e.size - 1, p_lo + p.size - 1
    out = {}
    for lag in range(-cfg.max_lag_search_s, cfg.max_lag_search_s + 1):
        start = max(e_lo, p_lo + lag)
        stop = min(e_hi, p_hi + lag)
        if stop - start + 1 < cfg.min_overlap:
            continue
        d = e[start - e_lo : stop - e_lo + 1] - p[start - lag - p_lo : stop - lag - p_lo + 1]
        d = d[~np.isnan(d)]
        if d.size < cfg.min_overlap:
            continue
        sq = d * d
        if keep_fraction < 1.0:
            n_keep = max(1, int(math.ceil(keep_fraction * sq.size)))
            sq = np.partition(sq, n_keep - 1)[:n_keep]
        out[lag] = (float(np.sqrt(np.mean(sq))), int(d.size))
    return out


def find_lag(ppg: HrSeries, ecg: HrSeries, cfg: IngestConfig = IngestConfig()) -> int:
    """Integer lag (added to PPG timestamps) that minimises the PPG/ECG RMSE.

    Ties go to the smallest ``|L|``, then to the negative lag. With
    ``cfg.robust_lag`` each candidate's RMSE is trimmed to the
    ``lag_keep_fraction`` best-agreeing pairs, so artifact stretches in the
    PPG channel do not swamp the alignment signal.
    """
    keep = cfg.lag_keep_fraction if cfg.robust_lag else 1.0
    profile = lag_rmse_profile(ppg, ecg, cfg, keep)
    if not profile:
        raise LagSearchError(
            f"no lag in +/-{cfg.max_lag_search_s} s leaves {cfg.min_overlap} overlapping samples"
        )
    return min(profile, key=lambda lag: (profile[lag][0], abs(lag), lag))


@dataclass(frozen=True)
class SyncCounts:
    ppg_raw: int
    ecg_raw: int
    ppg_kept: int
    ecg_kept: int
    synced: int


def synchronize_with_counts(
    ppg: HrSeries, ecg: HrSeries, cfg: IngestConfig = IngestConfig()
) -> tuple[SyncedSeries, SyncCounts]:
    # PPG only gets the bounds check: the estimator has to see noisy PPG.
    ppg_f = plausibility_filter(ppg, cfg, step_cap=False)
    ecg_f = plausibility_filter(ecg, cfg, step_cap=True)
    lag = find_lag(ppg_f, ecg_f, cfg)
    ppg_ts = ppg_f.timestamps + lag
    common, ip, ie = np.intersect1d(ppg_ts, ecg_f.timestamps, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise LagSearchError("PPG and ECG share no timestamps after lag correction")
    synced = SyncedSeries(ecg.subject_id, lag, common, ppg_f.hr_bpm[ip], ecg_f.hr_bpm[ie])
    counts = SyncCounts(len(ppg), len(ecg), len(ppg_f), len(ecg_f), len(synced))
    logger.debug("synchronized %s: lag=%d %s", ecg.subject_id, lag, counts)
    return synced, counts


def synchronize(ppg: HrSeries, ecg: HrSeries, cfg: IngestConfig = IngestConfig()) -> SyncedSeries:
    return synchronize_with_counts(ppg, ecg, cfg)[0]


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def write_synced(
    series: SyncedSeries, path: str | os.PathLike, counts: SyncCounts | None = None
) -> None:
    """Write a synced series CSV plus a ``<name>.meta`` key=value sidecar."""
    path = Path(path)
    lines = [SYNCED_HEADER]
    for t, p, e, d in zip(series.timestamps, series.hr_ppg, series.hr_ecg, series.diff_true):
        lines.append(f"{int(t)},{float(p)!r},{float(e)!r},{float(d)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"subject_id": series.subject_id, "applied_lag_s": series.applied_lag_s, "n_synced": len(series)}
    if counts is not None:
        meta.update(
            n_ppg_raw=counts.ppg_raw,
            n_ecg_raw=counts.ecg_raw,
            n_ppg_kept=counts.ppg_kept,
            n_ecg_kept=counts.ecg_kept,
        )
    _meta_path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")


def read_synced(path: str | os.PathLike) -> SyncedSeries:
    path = Path(path)
    meta = read_key_values(_meta_path(path))
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path, encoding="utf-8") as fh:
        if fh.readline().strip() != SYNCED_HEADER:
            raise IngestError(f"expected header {SYNCED_HEADER!r}", path, 1)
    return SyncedSeries(
        meta["subject_id"],
        int(meta["applied_lag_s"]),
        rows[:, 0].astype(np.int64),
        rows[:, 1],
        rows[:, 2],
    )


def read_key_values(path: str | os.PathLike) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise IngestError("expected key=value", path, lineno)
        out[key.strip()] = value.strip()
    return out
