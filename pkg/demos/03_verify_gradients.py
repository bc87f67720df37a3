"""
Checking backpropagation-through-time against finite differences
================================================================

The entire training loop rests on hand-derived gradients. This demo
perturbs every parameter of a small recurrent model and compares the
resulting loss slopes against the analytic backward pass.
"""

import numpy as np

import flownids as fn
from flownids.network import (DENSE_FIELDS, LSTM_FIELDS, ModelConfig,
                              init_params, model_backward, model_forward)

cfg = ModelConfig(input_dim=5, hidden_dim=4, num_classes=3, seq_len=3,
                  dropout_rate=0.0)
params, dense = init_params(cfg, seed=7)

rng = np.random.default_rng(11)
batch = rng.normal(size=(2, cfg.seq_len, cfg.input_dim))
targets = fn.one_hot(rng.integers(0, cfg.num_classes, size=2),
                     cfg.num_classes)
focal = fn.FocalConfig.uniform(cfg.num_classes, gamma=2.0)


def loss_now():
    probs, _ = model_forward(params, dense, cfg, batch)
    return fn.focal_loss(probs, targets, focal)


# analytic gradients via one training-mode forward and the backward pass
probs, trace = model_forward(params, dense, cfg, batch, training=True)
d_logits = fn.focal_loss_grad_logits(probs, targets, focal)
grads = model_backward(params, dense, cfg, trace, d_logits)

# numeric gradients: central differences with a 1e-5 step
step = 1e-5
print(f"{'tensor':<14} {'max rel err':>12}")
worst = 0.0
for holder, fields, prefix in ((params, LSTM_FIELDS, ""),
                               (dense, DENSE_FIELDS, "dense.")):
    for name in fields:
        arr = getattr(holder, name)
        numeric = np.zeros_like(arr)
        flat, nflat = arr.ravel(), numeric.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            hi = loss_now()
            flat[idx] = keep - step
            lo = loss_now()
            flat[idx] = keep
            nflat[idx] = (hi - lo) / (2 * step)
        analytic = getattr(grads, name)
        rel = np.max(np.abs(analytic - numeric) /
                     np.maximum(np.abs(numeric), 1e-8))
        worst = max(worst, float(rel))
        print(f"{prefix + name:<14} {rel:>12.3e}")

print(f"\nworst relative error: {worst:.3e}  (tolerance 1e-4)")
assert worst <= 1e-4
print("backward pass verified")
