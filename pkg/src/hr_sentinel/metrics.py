"""Threshold-sweep and tolerance-grid evaluation of predicted errors.

"Detection accuracy" here is TP / (TP + FP) * 100 over the unacceptable
class, i.e. precision. Cells whose denominator is zero are ``None`` and are
rendered as ``n/a``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from hr_sentinel.estimator.network import EstimatorModel
from hr_sentinel.windowing import Dataset

DEFAULT_TAUS = (10.0, 20.0, 25.0, 30.0, 31.0, 32.0, 33.0, 34.0, 35.0, 40.0)
GT_THRESHOLDS = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 25.0, 30.0)
TOLERANCES = (3.0, 5.0, 7.0)
TOLERANCE_NOTE = (
    "Tolerance grid: a window is a ground-truth positive when diff_true >= g and "
    "a predicted positive when diff_pred >= g - tol; cells with tol >= g are n/a."
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class SweepRow:
    tau: float
    detection_accuracy_pct: float | None
    counts: ConfusionCounts


@dataclass(frozen=True)
class ToleranceCell:
    gt_threshold: float
    tolerance: float
    f1: float | None
    accuracy: float | None
    counts: ConfusionCounts | None


class OraclePredictor:
    """Stands in for a model by returning the true errors."""


def confusion(truth_pos: np.ndarray, pred_pos: np.ndarray) -> ConfusionCounts:
    truth_pos = np.asarray(truth_pos, dtype=bool)
    pred_pos = np.asarray(pred_pos, dtype=bool)
    return ConfusionCounts(
        int(np.count_nonzero(truth_pos & pred_pos)),
        int(np.count_nonzero(~truth_pos & pred_pos)),
        int(np.count_nonzero(~truth_pos & ~pred_pos)),
        int(np.count_nonzero(truth_pos & ~pred_pos)),
    )


def detection_accuracy(counts: ConfusionCounts) -> float | None:
    denom = counts.tp + counts.fp
    return None if denom == 0 else 100.0 * counts.tp / denom


def f1_score(counts: ConfusionCounts) -> float | None:
    if counts.tp + counts.fn == 0:
        return None
    return 100.0 * 2 * counts.tp / (2 * counts.tp + counts.fp + counts.fn)


def accuracy(counts: ConfusionCounts) -> float | None:
    return None if counts.total == 0 else 100.0 * (counts.tp + counts.tn) / counts.total


def sweep_errors(diff_true, diff_pred, taus: Sequence[float] = DEFAULT_TAUS) -> list[SweepRow]:
    t = np.asarray(diff_true, dtype=np.float64)
    p = np.asarray(diff_pred, dtype=np.float64)
    if t.shape != p.shape:
        raise ValueError("diff_true and diff_pred must have equal shape")
    if t.size == 0:
        raise ValueError("nothing to evaluate")
    rows = []
    for tau in taus:
        counts = confusion(t >= tau, p >= tau)
        rows.append(SweepRow(float(tau), detection_accuracy(counts), counts))
    return rows


def tolerance_errors(
    diff_true,
    diff_pred,
    gt_thresholds: Sequence[float] = GT_THRESHOLDS,
    tolerances: Sequence[float] = TOLERANCES,
) -> list[list[ToleranceCell]]:
    t = np.asarray(diff_true, dtype=np.float64)
    p = np.asarray(diff_pred, dtype=np.float64)
    if t.shape != p.shape:
        raise ValueError("diff_true and diff_pred must have equal shape")
    if t.size == 0:
        raise ValueError("nothing to evaluate")
    grid = []
    for g in gt_thresholds:
        row = []
        for tol in tolerances:
            if tol >= g:
                row.append(ToleranceCell(float(g), float(tol), None, None, None))
                continue
            counts = confusion(t >= g, p >= g - tol)
            row.append(ToleranceCell(float(g), float(tol), f1_score(counts), accuracy(counts), counts))
        grid.append(row)
    return grid


def predict_errors(model: EstimatorModel | OraclePredictor, data: Dataset) -> np.ndarray:
    if isinstance(model, OraclePredictor):
        return data.labels.copy()
    return model.predict(data.ppg_values).astype(np.float64)


def threshold_sweep(
    model: EstimatorModel | OraclePredictor, data: Dataset, taus: Sequence[float] = DEFAULT_TAUS
) -> list[SweepRow]:
    return sweep_errors(data.labels, predict_errors(model, data), taus)


def tolerance_table(
    model: EstimatorModel | OraclePredictor,
    data: Dataset,
    gt_thresholds: Sequence[float] = GT_THRESHOLDS,
    tolerances: Sequence[float] = TOLERANCES,
) -> list[list[ToleranceCell]]:
    return tolerance_errors(data.labels, predict_errors(model, data), gt_thresholds, tolerances)


def _num(v: float | None, fmt: str = "{:.2f}") -> str:
    return "n/a" if v is None else fmt.format(v)


def _tau(v: float) -> str:
    return f"{v:g}"


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "detection_accuracy_pct", "tp", "fp", "tn", "fn"])
    for r in rows:
        c = r.counts
        w.writerow([_tau(r.tau), _num(r.detection_accuracy_pct, "{!r}"), c.tp, c.fp, c.tn, c.fn])
    return buf.getvalue()


def sweep_text(rows: list[SweepRow]) -> str:
    lines = [
        f"{'tau':>5} | {'detection accuracy TP/(TP+FP) %':>38} | {'TP':>7} {'FP':>7} {'FN':>7} {'TN':>8}",
        "-" * 82,
    ]
    for r in rows:
        c = r.counts
        lines.append(
            f"{_tau(r.tau):>5} | {_num(r.detection_accuracy_pct):>38} | {c.tp:>7} {c.fp:>7} {c.fn:>7} {c.tn:>8}"
        )
    lines.append("detection accuracy = TP / (TP + FP) * 100 over windows with error >= tau")
    return "\n".join(lines) + "\n"


def tolerance_csv(grid: list[list[ToleranceCell]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gt_threshold", "tolerance", "f1", "accuracy", "tp", "fp", "tn", "fn"])
    for row in grid:
        for cell in row:
            c = cell.counts
            counts = [c.tp, c.fp, c.tn, c.fn] if c else ["", "", "", ""]
            w.writerow([_tau(cell.gt_threshold), _tau(cell.tolerance), _num(cell.f1, "{!r}"), _num(cell.accuracy, "{!r}"), *counts])
    return buf.getvalue()


def tolerance_text(grid: list[list[ToleranceCell]]) -> str:
    if not grid:
        return TOLERANCE_NOTE + "\n"
    tols = [c.tolerance for c in grid[0]]
    head = f"{'GT thr':>6} |" + "|".join(f"{'tol = ' + _tau(t):^15}" for t in tols)
    sub = f"{'':>6} |" + "|".join(f"{'F1':>7} {'Acc':>7}" for _ in tols)
    lines = [head, sub, "-" * len(head)]
    for row in grid:
        cells = "|".join(f"{_num(c.f1, '{:.1f}'):>7} {_num(c.accuracy, '{:.1f}'):>7}" for c in row)
        lines.append(f"{_tau(row[0].gt_threshold):>6} |{cells}")
    lines.append(TOLERANCE_NOTE)
    return "\n".join(lines) + "\n"


def report_json(rows: list[SweepRow], grid: list[list[ToleranceCell]], extra: dict[str, Any] | None = None) -> str:
    doc = {
        "threshold_sweep": [
            {"tau": r.tau, "detection_accuracy_pct": r.detection_accuracy_pct, **asdict(r.counts)} for r in rows
        ],
        "tolerance_table": [
            {
                "gt_threshold": c.gt_threshold,
                "tolerance": c.tolerance,
                "f1": c.f1,
                "accuracy": c.accuracy,
                "counts": None if c.counts is None else asdict(c.counts),
            }
            for row in grid
            for c in row
        ],
        "notes": {
            "detection_accuracy": "TP / (TP + FP) * 100, i.e. precision on the unacceptable class",
            "tolerance_table": TOLERANCE_NOTE,
        },
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
