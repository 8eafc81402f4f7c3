"""
Labelling a live heart-rate feed
================================

Replays one synthetic PPG stream through the streaming engine, one sample
per call, then reports which artifact bursts were flagged and shows the
colour-coded readings around the first Unacceptable one.
Pass a checkpoint (for example the one demo 03 writes) or a quick model is
trained on a separate synthetic cohort first.
"""

import sys
from collections import Counter

from hr_sentinel.estimator import EstimatorConfig, load_model, train
from hr_sentinel.ingest import synchronize
from hr_sentinel.stream import StreamState, format_human
from hr_sentinel.synth import SynthConfig, generate, generate_subject
from hr_sentinel.windowing import split_by_subject

if len(sys.argv) > 1:
    model = load_model(sys.argv[1])
else:
    cohort = generate(SynthConfig(n_subjects=10, duration_s=7200, seed=100))
    ds = split_by_subject([synchronize(s.ppg, s.ecg) for s in cohort], 0.8)
    model, log = train(ds, EstimatorConfig())
    print(f"quick model: {len(log.epochs)} epochs, validation MAE {min(log.val_loss):.2f} bpm")
subject = generate_subject(SynthConfig(n_subjects=1, duration_s=1800, seed=8, clock_lag_s=0), 0)
state = StreamState(model)
readings = [state.push(sample) for sample in subject.ppg.samples]
counts = Counter(r.label.value for r in readings)
print("label counts:", dict(counts))
print(f"slowest sample: {max(r.latency_us for r in readings)} us\n")

# Which artifact bursts raised a flag? A burst on a subject with a low
# resting rate can look like an ordinary elevated heart rate to a window
# of 10 readings, so some are missed.
flagged = {r.timestamp for r in readings if r.label.severity >= 1}
for b in subject.bursts:
    hit = any(b.start_ts <= t <= b.end_ts for t in flagged)
    print(f"burst {b.start_ts}..{b.end_ts} {b.magnitude_bpm:+6.1f} bpm  {'flagged' if hit else 'missed'}")

# The neighbourhood of the first Unacceptable reading, as a watch face would show it.
first = next((i for i, r in enumerate(readings) if r.label.value == "unacceptable"), None)
if first is not None:
    print()
    color = sys.stdout.isatty()
    for r in readings[max(0, first - 8) : first + 8]:
        print(format_human(r, color))
