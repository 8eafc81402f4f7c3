"""
The error estimator, layer by layer
===================================

A small 1-D CNN written directly in numpy: four valid convolutions, global
average pooling and two dense layers. This demo checks the hand-written
backward pass against finite differences, then fits a toy target.
"""

import numpy as np

from hr_sentinel.estimator import EstimatorConfig, backward, batch_loss, fit, init_model

cfg = EstimatorConfig()
print("temporal length per stage:", cfg.temporal_lengths())
for name, shape in cfg.param_shapes().items():
    print(f"  {name:<14} {shape}")
print("trainable parameters:", cfg.n_params())

# Gradient check on a float64 copy. Random biases keep ReLU inputs off zero.
model = init_model(cfg.replace(seed=1), dtype=np.float64)
rng = np.random.default_rng(1)
for name, p in model.params.items():
    if name.endswith("bias"):
        p[...] = rng.uniform(0.05, 0.3, p.shape)
x = rng.uniform(45, 170, (32, 10))
y = rng.uniform(0, 40, 32)
_, grads = backward(model, x, y)

worst = 0.0
h = 1e-5
for name in ("conv0.kernel", "conv2.bias", "dense0.weight", "dense1.bias"):
    p = model.params[name]
    for idx in list(np.ndindex(p.shape))[:8]:
        keep = p[idx]
        p[idx] = keep + h
        up = batch_loss(y, model.predict_raw(x))
        p[idx] = keep - h
        down = batch_loss(y, model.predict_raw(x))
        p[idx] = keep
        num = (up - down) / (2 * h)
        worst = max(worst, abs(grads[name][idx] - num) / max(abs(num), abs(grads[name][idx]), 1e-7))
print(f"\nworst relative gradient error on sampled entries: {worst:.2e}")

# A toy target: how far the newest reading sits from 60 bpm, scaled down.
x = rng.uniform(50, 130, (200, 10))
y = np.abs(x[:, -1] - 60) / 5
model, log = fit(x, y, x, y, EstimatorConfig(learning_rate=0.01, batch_size=200, max_epochs=300))
print(f"\ntoy fit: {len(log.epochs)} epochs, loss {log.train_loss[0]:.2f} -> {min(log.train_loss):.2f} bpm")
print(f"predicting the median instead would cost {np.mean(np.abs(y - np.median(y))):.2f} bpm")
