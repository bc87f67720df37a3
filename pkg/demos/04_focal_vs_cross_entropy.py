"""
How the focal modulator reweights easy and hard examples
========================================================

Cross-entropy treats every example alike; the focal factor (1 - p)^gamma
shrinks the contribution of confidently-correct rows so the remaining
gradient concentrates on the ones the model still gets wrong.
"""

import numpy as np

import flownids as fn


def two_class_probs(p_true):
    return np.array([[p_true, 1.0 - p_true]])


target = np.array([[1.0, 0.0]])

print(f"{'p(correct)':>10} {'ce':>10} {'g=1':>10} {'g=2':>10} {'g=5':>10}")
for p in (0.10, 0.50, 0.90, 0.99):
    row = [p]
    for gamma in (0.0, 1.0, 2.0, 5.0):
        focal = fn.FocalConfig.uniform(2, gamma=gamma)
        row.append(fn.focal_loss(two_class_probs(p), target, focal))
    print("{:>10.2f} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f}".format(*row))

# at gamma=0 the family IS cross-entropy, to machine precision
rng = np.random.default_rng(3)
gap = 0.0
for _ in range(200):
    logits = rng.normal(size=(6, 4)) * 3
    probs = fn.softmax(logits)
    targets = fn.one_hot(rng.integers(0, 4, size=6), 4)
    plain = fn.categorical_ce(probs, targets)
    fam = fn.focal_loss(probs, targets, fn.FocalConfig.uniform(4, gamma=0.0))
    gap = max(gap, abs(plain - fam))
print(f"\nmax |ce - focal(gamma=0)| over 200 batches: {gap:.2e}")

# class weights from inverse frequency: rare classes count for more
hist = np.array([900, 90, 10])
fc = fn.FocalConfig.inverse_frequency(hist, gamma=2.0)
print("\nclass counts:        ", hist.tolist())
print("alpha weights:       ", np.round(fc.alpha, 4).tolist())
print("mean alpha (kept = 1):", float(fc.alpha.mean()))

# gradient magnitude per example: an easy batch barely moves the model
easy = two_class_probs(0.99)
hard = two_class_probs(0.40)
fc2 = fn.FocalConfig.uniform(2, gamma=2.0)
g_easy = np.abs(fn.focal_loss_grad_logits(easy, target, fc2)).max()
g_hard = np.abs(fn.focal_loss_grad_logits(hard, target, fc2)).max()
print(f"\nmax |dL/dz| on an easy example:   {g_easy:.6f}")
print(f"max |dL/dz| on a hard example:    {g_hard:.6f}")
print(f"hard / easy gradient ratio:       {g_hard / g_easy:,.0f}x")
