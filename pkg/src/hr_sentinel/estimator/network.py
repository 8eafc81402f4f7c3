"""1-D CNN error regressor with hand-written forward and backward passes.

Layout per sample: input ``(L, 1)`` -> conv blocks ``(L_i, C_i)`` -> global
average pool ``(C_last,)`` -> dense layers -> scalar. Conv kernels are stored
as ``[kernel_size, in_channels, out_channels]`` and dense weights as
``[in, out]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ACTIVATIONS = ("relu", "identity")
PADDINGS = ("valid", "same")


@dataclass(frozen=True)
class EstimatorConfig:
    k: int = 10
    conv_filters: tuple[int, ...] = (8, 8, 16, 16)
    kernel_size: int = 3
    dense_units: tuple[int, ...] = (16, 1)
    activation: str = "relu"
    padding: str = "valid"
    # raw bpm are divided by this fixed constant inside forward()
    input_scale: float = 200.0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 200
    batch_size: int = 256
    early_stop_patience: int = 10
    min_improvement: float = 1e-4
    validation_fraction_of_train_subjects: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_filters", tuple(int(c) for c in self.conv_filters))
        object.__setattr__(self, "dense_units", tuple(int(u) for u in self.dense_units))
        self.validate()

    def validate(self) -> None:
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not self.conv_filters or min(self.conv_filters) < 1:
            raise ValueError("conv_filters must be a non-empty list of sizes >= 1")
        if not self.dense_units or min(self.dense_units) < 1:
            raise ValueError("dense_units must be a non-empty list of sizes >= 1")
        if self.dense_units[-1] != 1:
            raise ValueError("the last dense layer must have exactly 1 unit")
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.padding not in PADDINGS:
            raise ValueError(f"padding must be one of {PADDINGS}")
        if self.padding == "valid" and self.temporal_lengths()[-1] < 1:
            raise ValueError(
                f"k={self.k} is too short for {len(self.conv_filters)} valid convolutions "
                f"with kernel_size={self.kernel_size}"
            )
        if not self.input_scale > 0:
            raise ValueError("input_scale must be > 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ValueError("invalid Adam constants")
        if self.max_epochs < 1 or self.batch_size < 1 or self.early_stop_patience < 1:
            raise ValueError("max_epochs, batch_size and early_stop_patience must be >= 1")
        if not 0 < self.validation_fraction_of_train_subjects < 1:
            raise ValueError("validation_fraction_of_train_subjects must be in (0, 1)")

    def temporal_lengths(self) -> list[int]:
        """Sequence length entering the first conv layer and after each one."""
        lengths = [self.k]
        for _ in self.conv_filters:
            shrink = self.kernel_size - 1 if self.padding == "valid" else 0
            lengths.append(lengths[-1] - shrink)
        return lengths

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        c_in = 1
        for i, c_out in enumerate(self.conv_filters):
            shapes[f"conv{i}.kernel"] = (self.kernel_size, c_in, c_out)
            shapes[f"conv{i}.bias"] = (c_out,)
            c_in = c_out
        for i, units in enumerate(self.dense_units):
            shapes[f"dense{i}.weight"] = (c_in, units)
            shapes[f"dense{i}.bias"] = (units,)
            c_in = units
        return shapes

    def n_params(self) -> int:
        return int(sum(np.prod(s) for s in self.param_shapes().values()))

    def replace(self, **changes: Any) -> EstimatorConfig:
        return dataclasses.replace(self, **changes)


@dataclass
class EstimatorModel:
    config: EstimatorConfig
    params: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shapes = self.config.param_shapes()
        if list(self.params) != list(shapes):
            raise ValueError("parameter names do not match the config")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {self.params[name].shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"{name}: non-finite weights")

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    def astype(self, dtype) -> EstimatorModel:
        return EstimatorModel(
            self.config,
            {n: p.astype(dtype, copy=True) for n, p in self.params.items()},
            dict(self.metadata),
        )

    def copy(self) -> EstimatorModel:
        return self.astype(self.dtype)

    def predict_raw(self, windows: np.ndarray) -> np.ndarray:
        """Unclamped network outputs for an ``(n, k)`` batch.

        Accumulates in float64 and rounds to the model dtype, so a window's
        prediction does not depend on the batch it is evaluated in.
        """
        x = _as_batch(windows, self.config, self.dtype)
        out, _ = _forward(self._wide_params(), self.config, x, keep=False)
        return out.astype(self.dtype)

    def _wide_params(self) -> dict[str, np.ndarray]:
        if self.dtype == np.float64:
            return self.params
        return {n: p.astype(np.float64) for n, p in self.params.items()}

    def predict(self, windows: np.ndarray) -> np.ndarray:
        """Predicted errors in bpm, clamped at 0 for reporting."""
        return np.maximum(self.predict_raw(windows), 0)


def init_model(cfg: EstimatorConfig, dtype=np.float32) -> EstimatorModel:
    """Fan-in scaled uniform weights (He-uniform bound), zero biases."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in cfg.param_shapes().items():
        if name.endswith("bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        fan_in = int(np.prod(shape[:-1]))
        bound = np.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return EstimatorModel(cfg, params, {"epochs_run": 0, "best_validation_loss": float("inf")})


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0) if activation == "relu" else z


def _as_batch(windows: np.ndarray, cfg: EstimatorConfig, dtype) -> np.ndarray:
    x = np.asarray(windows, dtype=dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != cfg.k:
        raise ValueError(f"expected windows of length k={cfg.k}, got shape {np.shape(windows)}")
    return x


def _pad_amounts(cfg: EstimatorConfig) -> tuple[int, int]:
    if cfg.padding == "valid":
        return 0, 0
    left = (cfg.kernel_size - 1) // 2
    return left, cfg.kernel_size - 1 - left


def _forward(params, cfg: EstimatorConfig, windows, keep: bool):
    dtype = next(iter(params.values())).dtype
    x = _as_batch(windows, cfg, dtype)
    h = (x / dtype.type(cfg.input_scale))[:, :, None]
    K = cfg.kernel_size
    left, right = _pad_amounts(cfg)
    cache: list[tuple] = []
    for i in range(len(cfg.conv_filters)):
        w, b = params[f"conv{i}.kernel"], params[f"conv{i}.bias"]
        if left or right:
            h = np.pad(h, ((0, 0), (left, right), (0, 0)))
        B, L, C = h.shape
        L_out = L - K + 1
        # (B, L_out, C, K) -> (B * L_out, K * C) matching the kernel's (K, C) flattening
        cols = sliding_window_view(h, K, axis=1).transpose(0, 1, 3, 2).reshape(B * L_out, K * C)
        z = (cols @ w.reshape(K * C, -1)).reshape(B, L_out, -1) + b
        a = _act(z, cfg.activation)
        if keep:
            cache.append((cols, z, (B, L, C)))
        h = a
    pooled = h.mean(axis=1)
    if keep:
        cache.append(h.shape)
    a = pooled
    n_dense = len(cfg.dense_units)
    for i in range(n_dense):
        w, b = params[f"dense{i}.weight"], params[f"dense{i}.bias"]
        z = a @ w + b
        if keep:
            cache.append((a, z))
        a = _act(z, cfg.activation) if i < n_dense - 1 else z
    return a[:, 0], cache


def forward(model: EstimatorModel, window) -> float:
    """Predicted error (bpm, clamped at 0) for one window of ``k`` readings."""
    w = np.asarray(window)
    if w.ndim != 1:
        raise ValueError("forward() takes a single window; use model.predict for batches")
    return float(model.predict(w)[0])


def loss(diff_true: float, diff_pred: float) -> float:
    return abs(float(diff_true) - float(diff_pred))


def batch_loss(diff_true: np.ndarray, diff_pred: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(diff_true) - np.asarray(diff_pred))))


def backward(model: EstimatorModel, windows: np.ndarray, labels: np.ndarray):
    """Mean absolute error over the batch and its gradient for every parameter.

    The subgradient of ``|x|`` at 0 is taken as 0.
    """
    cfg, params = model.config, model.params
    out, cache = _forward(params, cfg, windows, keep=True)
    y = np.asarray(labels, dtype=out.dtype).reshape(-1)
    if y.size != out.size or y.size == 0:
        raise ValueError("labels must match a non-empty batch")
    n = out.size
    resid = out - y
    batch = float(np.mean(np.abs(resid)))
    grads: dict[str, np.ndarray] = {}

    g = (np.sign(resid) / out.dtype.type(n))[:, None]
    n_dense = len(cfg.dense_units)
    for i in reversed(range(n_dense)):
        a_in, z = cache.pop()
        if i < n_dense - 1 and cfg.activation == "relu":
            g = g * (z > 0)
        grads[f"dense{i}.weight"] = a_in.T @ g
        grads[f"dense{i}.bias"] = g.sum(axis=0)
        g = g @ params[f"dense{i}.weight"].T

    B, L_last, C_last = cache.pop()
    g = np.broadcast_to(g[:, None, :] / out.dtype.type(L_last), (B, L_last, C_last))

    K = cfg.kernel_size
    left, right = _pad_amounts(cfg)
    for i in reversed(range(len(cfg.conv_filters))):
        cols, z, (Bi, L_in, C_in) = cache.pop()
        if cfg.activation == "relu":
            g = g * (z > 0)
        L_out = L_in - K + 1
        g2 = g.reshape(Bi * L_out, -1)
        w = params[f"conv{i}.kernel"]
        grads[f"conv{i}.kernel"] = (cols.T @ g2).reshape(w.shape)
        grads[f"conv{i}.bias"] = g2.sum(axis=0)
        if i == 0:
            break
        dcols = (g2 @ w.reshape(K * C_in, -1).T).reshape(Bi, L_out, K, C_in)
        dh = np.zeros((Bi, L_in, C_in), dtype=out.dtype)
        for j in range(K):
            dh[:, j : j + L_out, :] += dcols[:, :, j, :]
        if left or right:
            dh = dh[:, left : L_in - right, :]
        g = dh

    return batch, {name: np.ascontiguousarray(grads[name]) for name in params}
