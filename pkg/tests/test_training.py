import numpy as np
import pytest

from hr_sentinel.estimator import (
    EstimatorConfig,
    fit,
    grid_search,
    train,
)
from hr_sentinel.estimator.train import default_workers, split_fit_validation
from conftest import make_dataset


def test_overfit_learnable_labels():
    rng = np.random.default_rng(0)
    x = rng.uniform(50, 130, (100, 10))
    y = np.abs(x[:, -1] - 60) / 5  # depends only on the last reading
    cfg = EstimatorConfig(max_epochs=500, early_stop_patience=500, batch_size=100, learning_rate=0.01)
    _, log = fit(x, y, x, y, cfg)
    assert min(log.train_loss) < 1.0
    # the best constant predictor is far worse, so the network really learned
    assert np.mean(np.abs(y - np.median(y))) > 3.0


def test_constant_label_converges():
    rng = np.random.default_rng(1)
    x = rng.uniform(50, 130, (100, 10))
    y = np.full(100, 7.0)
    model, _ = fit(x, y, x, y, EstimatorConfig(learning_rate=0.01, max_epochs=300, batch_size=32))
    pred = model.predict(x)
    assert abs(np.median(pred) - 7.0) < 0.1
    assert np.mean(np.abs(pred - 7.0)) < 0.25


def test_training_is_deterministic():
    ds = make_dataset()
    cfg = EstimatorConfig(max_epochs=5, seed=3)
    m1, log1 = train(ds, cfg)
    m2, log2 = train(ds, cfg)
    assert log1.to_csv() == log2.to_csv()
    for n in m1.params:
        assert m1.params[n].tobytes() == m2.params[n].tobytes()
    assert log1.to_csv().splitlines()[0] == "epoch,train_loss,val_loss"


def test_returns_best_snapshot():
    ds = make_dataset()
    model, log = train(ds, EstimatorConfig(max_epochs=15))
    assert model.metadata["best_validation_loss"] == min(log.val_loss)
    assert log.val_loss[log.best_epoch - 1] == min(log.val_loss)


def test_early_stopping():
    rng = np.random.default_rng(2)
    x = rng.uniform(50, 130, (50, 10))
    y = np.full(50, 3.0)
    # an unreachable improvement margin means only the first epoch counts
    cfg = EstimatorConfig(max_epochs=100, early_stop_patience=4, min_improvement=1e6)
    _, log = fit(x, y, x, y, cfg)
    assert log.stopped_early
    assert len(log.epochs) == 5


def test_validation_split_by_subject():
    fit_s, val_s = split_fit_validation(["S03", "S01", "S02", "S05", "S04", "S06"], 0.15)
    assert val_s == ["S06"]
    assert fit_s == ["S01", "S02", "S03", "S04", "S05"]
    assert split_fit_validation([f"S{i}" for i in range(1, 8)], 0.15)[1] == ["S6", "S7"]
    with pytest.raises(ValueError):
        split_fit_validation(["S01"], 0.15)


def test_train_rejects_empty_validation():
    with pytest.raises(ValueError):
        fit(np.zeros((3, 10)), np.zeros(3), np.zeros((0, 10)), np.zeros(0), EstimatorConfig())


def test_train_rejects_k_mismatch():
    with pytest.raises(ValueError, match="window length"):
        train(make_dataset(), EstimatorConfig(k=12))


# -- grid search -----------------------------------------------------------------


def test_grid_singleton_equals_train():
    ds = make_dataset()
    base = EstimatorConfig(max_epochs=4)
    result = grid_search(ds, base, {"learning_rate": [0.001]})
    assert result.best_config == base
    model, _ = train(ds, base)
    for n in model.params:
        assert result.best_model.params[n].tobytes() == model.params[n].tobytes()


def test_grid_picks_stable_learning_rate():
    ds = make_dataset()
    result = grid_search(ds, EstimatorConfig(), {"learning_rate": [0.1, 0.001]}, max_epochs=40)
    assert result.best_config.learning_rate == 0.001
    bad, good = result.cells
    assert bad.validation_loss > good.validation_loss
    assert result.best_config.seed == 1  # cell index 1 trains with seed base + 1


def test_grid_reports_failed_shape_cell():
    result = grid_search(make_dataset(), EstimatorConfig(), {"kernel_size": [3, 7]}, max_epochs=3)
    assert result.best_config.kernel_size == 3
    assert result.cells[1].status == "failed"
    assert "kernel" in result.cells[1].error
    csv = result.to_csv()
    assert csv.splitlines()[0] == "cell,kernel_size,status,val_loss,n_params,error"
    assert ",failed," in csv


def test_grid_all_failed():
    with pytest.raises(ValueError, match="every grid cell failed"):
        grid_search(make_dataset(), EstimatorConfig(), {"kernel_size": [6, 7]}, max_epochs=2)


def test_grid_cap_and_unknown_key():
    ds = make_dataset()
    with pytest.raises(ValueError, match="cap"):
        grid_search(ds, EstimatorConfig(), {"seed": list(range(5))}, max_cells=4)
    with pytest.raises(ValueError, match="unknown"):
        grid_search(ds, EstimatorConfig(), {"nonsense": [1]})


def test_grid_threads_do_not_change_result(monkeypatch):
    ds = make_dataset()
    grid = {"learning_rate": [0.001, 0.003], "dense_units": [(16, 1), (8, 1)]}
    serial = grid_search(ds, EstimatorConfig(), grid, max_epochs=3, workers=1)
    parallel = grid_search(ds, EstimatorConfig(), grid, max_epochs=3, workers=3)
    assert serial.to_csv() == parallel.to_csv()
    monkeypatch.setenv("HR_SENTINEL_THREADS", "3")
    assert default_workers() == 3


def test_grid_tie_breaks_on_parameter_count():
    ds = make_dataset()
    # all-zero inputs and labels: every model predicts exactly 0 and never moves
    ds.labels[:] = 0.0
    ds.ppg_values[:] = 0.0
    result = grid_search(
        ds, EstimatorConfig(), {"dense_units": [(16, 1), (4, 1)]}, max_epochs=2
    )
    a, b = result.cells
    assert a.validation_loss == b.validation_loss == 0.0
    assert result.best_config.dense_units == (4, 1)
