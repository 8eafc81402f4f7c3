"""Minibatch training with early stopping, and the hyperparameter grid search."""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from hr_sentinel.estimator.adam import AdamState, adam_update
from hr_sentinel.estimator.network import (
    EstimatorConfig,
    EstimatorModel,
    backward,
    batch_loss,
    init_model,
)
from hr_sentinel.windowing import TRAIN, Dataset

logger = logging.getLogger(__name__)

THREADS_ENV = "HR_SENTINEL_THREADS"


@dataclass
class TrainingLog:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    diverged: bool = False

    def append(self, epoch: int, train: float, val: float) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(train)
        self.val_loss.append(val)

    def to_csv(self) -> str:
        rows = ["epoch,train_loss,val_loss"]
        rows += [f"{e},{t!r},{v!r}" for e, t, v in zip(self.epochs, self.train_loss, self.val_loss)]
        return "\n".join(rows) + "\n"

    def write_csv(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def split_fit_validation(train_subjects: Sequence[str], fraction: float) -> tuple[list[str], list[str]]:
    """Hold out the last ceil(fraction * S) sorted training subjects."""
    subjects = sorted(train_subjects)
    n_val = math.ceil(fraction * len(subjects) - 1e-9)
    if n_val < 1 or n_val >= len(subjects):
        raise ValueError(
            f"cannot carve a validation split from {len(subjects)} training subject(s) "
            f"with fraction {fraction}"
        )
    return subjects[:-n_val], subjects[-n_val:]


def fit(
    x_fit: np.ndarray,
    y_fit: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: EstimatorConfig,
    model: EstimatorModel | None = None,
) -> tuple[EstimatorModel, TrainingLog]:
    """Train on explicit arrays; returns the best-validation snapshot."""
    x_fit = np.asarray(x_fit, dtype=np.float32)
    y_fit = np.asarray(y_fit, dtype=np.float32)
    x_val = np.asarray(x_val, dtype=np.float32)
    y_val = np.asarray(y_val, dtype=np.float32)
    if len(x_fit) == 0:
        raise ValueError("training split is empty")
    if len(x_val) == 0:
        raise ValueError("validation split is empty")

    model = init_model(cfg) if model is None else model.copy()
    state = AdamState.for_model(model)
    rng = np.random.default_rng([cfg.seed, 1])
    log = TrainingLog()
    best_loss = math.inf
    best_params = {n: p.copy() for n, p in model.params.items()}
    stale = 0
    n = len(x_fit)

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch, grads = backward(model, x_fit[idx], y_fit[idx])
            adam_update(model.params, grads, state, cfg.learning_rate)
            total += batch * idx.size
        train_loss = total / n
        finite = all(np.all(np.isfinite(p)) for p in model.params.values())
        val_loss = batch_loss(y_val, model.predict_raw(x_val)) if finite else math.nan
        log.append(epoch, train_loss, val_loss)

        if not math.isfinite(val_loss):
            log.diverged = True
            logger.info("epoch %d: diverged", epoch)
            break
        if val_loss < best_loss - cfg.min_improvement:
            best_loss = val_loss
            best_params = {n_: p.copy() for n_, p in model.params.items()}
            log.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        logger.debug("epoch %d: train %.4f val %.4f", epoch, train_loss, val_loss)
        if stale >= cfg.early_stop_patience:
            log.stopped_early = True
            break

    best = EstimatorModel(
        cfg,
        best_params,
        {"epochs_run": len(log.epochs), "best_validation_loss": best_loss},
    )
    return best, log


def train(dataset: Dataset, cfg: EstimatorConfig) -> tuple[EstimatorModel, TrainingLog]:
    """Fit on the dataset's training subjects with a subject-level validation hold-out."""
    if dataset.k != cfg.k:
        raise ValueError(f"dataset window length {dataset.k} != config k {cfg.k}")
    train_subjects = dataset.subjects_in(TRAIN)
    if not train_subjects:
        raise ValueError("training split is empty")
    fit_subj, val_subj = split_fit_validation(train_subjects, cfg.validation_fraction_of_train_subjects)
    m_fit, m_val = dataset.mask_for(fit_subj), dataset.mask_for(val_subj)
    if not m_val.any():
        raise ValueError("validation split has no windows")
    return fit(
        dataset.ppg_values[m_fit],
        dataset.labels[m_fit],
        dataset.ppg_values[m_val],
        dataset.labels[m_val],
        cfg,
    )


@dataclass
class GridCell:
    index: int
    overrides: dict[str, Any]
    config: EstimatorConfig | None = None
    validation_loss: float = math.nan
    n_params: int = 0
    status: str = "pending"
    error: str = ""
    log: TrainingLog | None = None
    model: EstimatorModel | None = field(default=None, repr=False)


@dataclass
class GridSearchResult:
    best_config: EstimatorConfig
    best_model: EstimatorModel
    cells: list[GridCell]

    def to_csv(self) -> str:
        keys = sorted({k for c in self.cells for k in c.overrides})
        rows = [",".join(["cell", *keys, "status", "val_loss", "n_params", "error"])]
        for c in self.cells:
            vals = [_fmt_value(c.overrides.get(k, "")) for k in keys]
            rows.append(
                ",".join([str(c.index), *vals, c.status, repr(c.validation_loss), str(c.n_params), c.error.replace(",", ";")])
            )
        return "\n".join(rows) + "\n"


def _fmt_value(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return "/".join(str(x) for x in v)
    return str(v)


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return 1


def grid_search(
    dataset: Dataset,
    base_cfg: EstimatorConfig,
    grid: Mapping[str, Sequence[Any]],
    max_cells: int = 64,
    max_epochs: int | None = None,
    workers: int | None = None,
) -> GridSearchResult:
    """Train one model per grid cell and keep the lowest validation loss.

    Cell ``i`` trains with seed ``base_cfg.seed + i``. Ties go to the smaller
    model, then to the earlier cell.
    """
    if not grid:
        raise ValueError("grid is empty")
    fields = {f.name for f in base_cfg.__dataclass_fields__.values()}
    unknown = set(grid) - fields
    if unknown:
        raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
    keys = list(grid)
    combos = list(itertools.product(*(list(grid[k]) for k in keys)))
    if not combos:
        raise ValueError("grid has an empty value list")
    if len(combos) > max_cells:
        raise ValueError(f"grid has {len(combos)} cells, cap is {max_cells}")
    cells = [GridCell(i, dict(zip(keys, combo))) for i, combo in enumerate(combos)]

    def run(cell: GridCell) -> GridCell:
        changes = dict(cell.overrides)
        changes["seed"] = base_cfg.seed + cell.index
        if max_epochs is not None:
            changes["max_epochs"] = max_epochs
        try:
            cfg = base_cfg.replace(**changes)
            model, log = train(dataset, cfg)
        except ValueError as exc:
            cell.status, cell.error = "failed", str(exc)
            return cell
        cell.config, cell.log, cell.model = cfg, log, model
        cell.n_params = cfg.n_params()
        cell.validation_loss = float(model.metadata["best_validation_loss"])
        if math.isfinite(cell.validation_loss):
            cell.status = "ok"
        else:
            cell.status, cell.error = "failed", "diverged"
        return cell

    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1:
        cells = [run(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run, cells))

    ok = [c for c in cells if c.status == "ok"]
    if not ok:
        raise ValueError("every grid cell failed: " + "; ".join(f"#{c.index}: {c.error}" for c in cells))
    best = min(ok, key=lambda c: (c.validation_loss, c.n_params, c.index))
    logger.info("grid search: best cell #%d %s (val %.4f)", best.index, best.overrides, best.validation_loss)
    return GridSearchResult(best.config, best.model, cells)
