"""
Training on synthetic subjects and reading the threshold sweep
==============================================================

Trains the estimator on a reduced synthetic cohort and prints the
evaluation tables for the held-out subjects. Pass a
directory argument to keep the artifacts; otherwise a temporary one is used.
"""

import sys
import tempfile
from pathlib import Path

from hr_sentinel import metrics
from hr_sentinel.estimator import EstimatorConfig, save_model, train
from hr_sentinel.ingest import synchronize
from hr_sentinel.synth import SynthConfig, generate
from hr_sentinel.windowing import TEST, TRAIN, save_dataset, split_by_subject

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="hr-demo-"))

subjects = generate(SynthConfig(n_subjects=8, duration_s=3600, seed=3), out / "raw")
synced = [synchronize(s.ppg, s.ecg) for s in subjects]
for s, sy in zip(subjects, synced):
    print(f"{s.subject_id}: injected lag {s.lag_s:+3d} s, recovered correction {sy.applied_lag_s:+3d} s")

ds = split_by_subject(synced, train_fraction=0.75)
save_dataset(ds, out / "dataset.bin")
print(f"\ntrain subjects {ds.subjects_in(TRAIN)}")
print(f"test subjects  {ds.subjects_in(TEST)}")

model, log = train(ds, EstimatorConfig(seed=3))
save_model(model, out / "model.bin")
print(f"\ntrained {len(log.epochs)} epochs, best validation MAE {min(log.val_loss):.2f} bpm at epoch {log.best_epoch}")

test = ds.split(TEST)
rows = metrics.threshold_sweep(model, test)
print()
print(metrics.sweep_text(rows))
print(metrics.tolerance_text(metrics.tolerance_table(model, test)))
print(f"artifacts written to {out}")
