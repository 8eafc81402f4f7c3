"""Per-sample inference over a live 1 Hz heart-rate stream."""

from __future__ import annotations

import logging
import sys
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Iterator

import numpy as np

from hr_sentinel.domain import AccuracyLabel, FilterThresholds, HrSample
from hr_sentinel.estimator.network import EstimatorModel
from hr_sentinel.filtering import DEFAULT_THRESHOLDS, classify
from hr_sentinel.ingest import CSV_HEADER, IngestError

logger = logging.getLogger(__name__)

STRICT, SKIP = "strict", "skip"

_ANSI = {
    AccuracyLabel.ACCEPTABLE: "\033[32m",
    AccuracyLabel.MARGINAL: "\033[33m",
    AccuracyLabel.UNACCEPTABLE: "\033[38;5;208m",
    AccuracyLabel.WARMING_UP: "\033[90m",
}
_RESET = "\033[0m"


class StreamError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledReading:
    timestamp: int
    hr_bpm: float
    diff_pred: float | None
    label: AccuracyLabel
    latency_us: int = 0

    def __post_init__(self) -> None:
        if (self.diff_pred is None) != (self.label is AccuracyLabel.WARMING_UP):
            raise ValueError("diff_pred must be absent exactly when warming up")


class StreamState:
    """Single-owner state for one sensor stream.

    Holds the most recent readings; any step of ``gap_reset_s`` or more
    between consecutive timestamps empties the buffer, so with the default of
    2 s the buffer only ever holds consecutive 1 s samples.
    """

    def __init__(
        self,
        model: EstimatorModel,
        thresholds: FilterThresholds = DEFAULT_THRESHOLDS,
        gap_reset_s: int = 2,
    ) -> None:
        if gap_reset_s < 2:
            raise ValueError("gap_reset_s must be >= 2")
        self.model = model
        self.thresholds = thresholds
        self.gap_reset_s = int(gap_reset_s)
        self.k = model.config.k
        self.buffer: deque[float] = deque(maxlen=self.k)
        self.last_timestamp: int | None = None

    def reset(self) -> None:
        self.buffer.clear()

    def push(self, sample: HrSample) -> LabeledReading:
        start = time.perf_counter_ns()
        if self.last_timestamp is not None:
            if sample.timestamp <= self.last_timestamp:
                raise StreamError(
                    f"timestamp {sample.timestamp} does not advance past {self.last_timestamp}"
                )
            if sample.timestamp - self.last_timestamp >= self.gap_reset_s:
                self.buffer.clear()
        self.last_timestamp = sample.timestamp
        self.buffer.append(sample.hr_bpm)
        if len(self.buffer) < self.k:
            diff_pred, label = None, AccuracyLabel.WARMING_UP
        else:
            diff_pred = float(self.model.predict(np.fromiter(self.buffer, np.float64, self.k))[0])
            label = classify(diff_pred, self.thresholds)
        latency = (time.perf_counter_ns() - start) // 1000
        return LabeledReading(sample.timestamp, sample.hr_bpm, diff_pred, label, int(latency))


def push_sample(state: StreamState, sample: HrSample) -> LabeledReading:
    return state.push(sample)


@dataclass
class StreamSummary:
    counts: Counter = field(default_factory=Counter)
    processed: int = 0
    skipped: int = 0
    max_latency_us: int = 0

    def as_dict(self) -> dict:
        return {
            "processed": self.processed,
            "skipped": self.skipped,
            "max_latency_us": self.max_latency_us,
            **{label.value: self.counts.get(label, 0) for label in AccuracyLabel},
        }


def parse_stream_lines(lines: Iterable[str], source: str = "<stream>") -> Iterator[HrSample | IngestError]:
    """Parse ingest-format CSV lines lazily; bad rows come back as errors."""
    it = iter(lines)
    header = next(it, None)
    if header is None:
        return
    if header.strip().lstrip("﻿") != CSV_HEADER:
        yield IngestError(f"expected header {CSV_HEADER!r}", source, 1)
        return
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            yield HrSample(int(parts[0]), float(parts[1]))
        except ValueError:
            yield IngestError(f"bad row {line!r}", source, lineno)


def run_stream(
    source: Iterable[HrSample | Exception] | IO[str],
    sink: Callable[[LabeledReading], None] | None,
    model: EstimatorModel,
    thresholds: FilterThresholds = DEFAULT_THRESHOLDS,
    policy: str = STRICT,
    gap_reset_s: int = 2,
) -> StreamSummary:
    """Feed every sample through :func:`push_sample`, in order.

    ``source`` is either an iterable of samples or a text stream in the ingest
    CSV format. Under ``policy="skip"`` bad rows and non-advancing timestamps
    are counted and dropped; under ``"strict"`` they raise.
    """
    if policy not in (STRICT, SKIP):
        raise ValueError(f"policy must be {STRICT!r} or {SKIP!r}")
    if hasattr(source, "readline"):
        source = parse_stream_lines(source, getattr(source, "name", "<stream>"))
    state = StreamState(model, thresholds, gap_reset_s)
    summary = StreamSummary()
    for item in source:
        try:
            if isinstance(item, Exception):
                raise item
            reading = state.push(item)
        except (StreamError, IngestError) as exc:
            if policy == STRICT:
                raise
            summary.skipped += 1
            logger.warning("skipped sample: %s", exc)
            continue
        summary.processed += 1
        summary.counts[reading.label] += 1
        summary.max_latency_us = max(summary.max_latency_us, reading.latency_us)
        if sink is not None:
            sink(reading)
    return summary


def format_machine(r: LabeledReading) -> str:
    pred = "" if r.diff_pred is None else f"{r.diff_pred:.4f}"
    return f"{r.timestamp},{r.hr_bpm:g},{pred},{r.label.value}"


def format_human(r: LabeledReading, color: bool) -> str:
    pred = "   --  " if r.diff_pred is None else f"{r.diff_pred:7.2f}"
    text = f"{r.timestamp}  HR {r.hr_bpm:6.1f} bpm  err {pred}  {r.label.value:<12} [{r.label.display_color}]"
    return f"{_ANSI[r.label]}{text}{_RESET}" if color else text


def line_sink(out: IO[str] = sys.stdout, human: bool = False) -> Callable[[LabeledReading], None]:
    color = human and hasattr(out, "isatty") and out.isatty()

    def write(r: LabeledReading) -> None:
        out.write((format_human(r, color) if human else format_machine(r)) + "\n")
        out.flush()

    return write
