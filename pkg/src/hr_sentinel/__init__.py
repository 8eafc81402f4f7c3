"""Real-time accuracy warnings for PPG-derived heart rate.

A small 1-D CNN estimates the absolute HR measurement error from the last k
PPG heart-rate readings; a two-threshold filter turns that estimate into a
traffic-light label.
"""

from hr_sentinel.domain import (
    AccuracyLabel,
    FilterThresholds,
    HrSample,
    HrSeries,
    SyncedSample,
    SyncedSeries,
    Window,
    make_synced_sample,
)
from hr_sentinel.filtering import classify

__all__ = [
    "AccuracyLabel",
    "FilterThresholds",
    "HrSample",
    "HrSeries",
    "SyncedSample",
    "SyncedSeries",
    "Window",
    "classify",
    "make_synced_sample",
]

__version__ = "0.1.0"
