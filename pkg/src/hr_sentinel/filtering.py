"""Measurement error filter: predicted error -> traffic-light label."""

from __future__ import annotations

import math

import numpy as np

from hr_sentinel.domain import AccuracyLabel, FilterThresholds

DEFAULT_THRESHOLDS = FilterThresholds(20.0, 34.0)


def classify(diff_pred: float, th: FilterThresholds = DEFAULT_THRESHOLDS) -> AccuracyLabel:
    """Map a predicted error (bpm) to an accuracy label.

    Thresholds belong to the more severe class: ``diff_pred == tau_a`` is
    Marginal and ``diff_pred == tau_b`` is Unacceptable.
    """
    if not isinstance(th, FilterThresholds):
        raise TypeError("th must be FilterThresholds")
    diff_pred = float(diff_pred)
    if not math.isfinite(diff_pred) or diff_pred < 0:
        raise ValueError(f"diff_pred must be finite and >= 0, got {diff_pred!r}")
    if diff_pred < th.tau_a:
        return AccuracyLabel.ACCEPTABLE
    if diff_pred < th.tau_b:
        return AccuracyLabel.MARGINAL
    return AccuracyLabel.UNACCEPTABLE


def classify_many(diff_pred: np.ndarray, th: FilterThresholds = DEFAULT_THRESHOLDS) -> list[AccuracyLabel]:
    return [classify(v, th) for v in np.asarray(diff_pred, dtype=np.float64).ravel()]
