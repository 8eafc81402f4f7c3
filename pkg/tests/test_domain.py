import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hr_sentinel.domain import (
    AccuracyLabel,
    FilterThresholds,
    HrSample,
    HrSeries,
    SyncedSeries,
    Window,
    make_synced_sample,
)

hr_values = st.floats(min_value=1e-3, max_value=400, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("ppg, ecg, expected", [(70, 70, 0), (82, 70, 12), (60, 95, 35)])
def test_make_synced_sample(ppg, ecg, expected):
    s = make_synced_sample(1000, ppg, ecg)
    assert s.diff_true == expected
    assert s.timestamp == 1000


@pytest.mark.parametrize("bad", [0.0, -5.0, math.nan, math.inf])
def test_make_synced_sample_rejects_bad_hr(bad):
    with pytest.raises(ValueError):
        make_synced_sample(1, bad, 70)
    with pytest.raises(ValueError):
        make_synced_sample(1, 70, bad)


@given(hr_values, hr_values)
def test_diff_true_symmetric(a, b):
    assert make_synced_sample(5, a, b).diff_true == make_synced_sample(5, b, a).diff_true
    assert make_synced_sample(5, a, b).diff_true >= 0


def test_hr_sample_rejects_sentinels():
    with pytest.raises(ValueError):
        HrSample(1, 0)
    with pytest.raises(ValueError):
        HrSample(1, float("nan"))


def test_series_requires_increasing_timestamps():
    with pytest.raises(ValueError, match="strictly increasing"):
        HrSeries("ppg", "S1", [1, 2, 2], [70, 71, 72])
    s = HrSeries("ppg", "S1", [1, 2, 5], [70, 71, 72])  # gaps are fine
    assert len(s) == 3
    assert [x.timestamp for x in s.samples] == [1, 2, 5]


def test_series_is_read_only():
    s = HrSeries("ppg", "S1", [1, 2], [70, 71])
    with pytest.raises(ValueError):
        s.hr_bpm[0] = 5


def test_synced_series_diff_true_column():
    s = SyncedSeries("S1", -3, [10, 11], [80.0, 60.0], [70.0, 95.0])
    assert s.diff_true.tolist() == [10.0, 35.0]
    assert s.samples[1].diff_true == 35.0
    assert SyncedSeries.from_samples("S1", -3, s.samples) == s


def test_window_normalises_values():
    w = Window(100, [70, 71, 72], 3, "S1")
    assert w.ppg_values == (70.0, 71.0, 72.0)
    assert w.k == 3


def test_label_colors():
    assert AccuracyLabel.ACCEPTABLE.display_color == "green"
    assert AccuracyLabel.MARGINAL.display_color == "yellow"
    assert AccuracyLabel.UNACCEPTABLE.display_color == "orange"
    assert AccuracyLabel.WARMING_UP.display_color == "gray"


@pytest.mark.parametrize("a, b", [(0, 5), (5, 5), (6, 5), (-1, 3), (1, math.inf)])
def test_thresholds_validated(a, b):
    with pytest.raises(ValueError):
        FilterThresholds(a, b)


def test_default_thresholds():
    th = FilterThresholds()
    assert (th.tau_a, th.tau_b) == (20.0, 34.0)
