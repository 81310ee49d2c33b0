"""
Fuzzy pooling of a single window, step by step
================================================

Follows one 2x2 window through fuzzification, set scoring, selection and
centre-of-gravity defuzzification, then compares the result with the
baseline operators and checks the backward pass numerically.
"""

import numpy as np

from fuzzypool import PoolWindowSpec, default_bank, pool_backward, pool_forward
from fuzzypool.membership import memberships

bank = default_bank(6.0)
print("membership bank:", bank.to_dict())

# %%
# A window of capped-ReLU activations. Values live in [0, r_max].
window = np.array([[0.0, 1.0], [2.0, 3.0]])

degrees = memberships(window, bank)  # (3, 2, 2): small, medium, large
for name, d in zip(("small", "medium", "large"), degrees):
    print(f"{name:>6}: degrees {d.ravel()} score {d.sum():.3f}")

# %%
# The set with the largest summed degree wins (here "small"), and its degrees
# weight the window values.
best = degrees.sum(axis=(1, 2)).argmax()
weights = degrees[best]
print("centre of gravity:", (weights * window).sum() / weights.sum())

# %%
# The library does the same thing on whole volumes.
spec = PoolWindowSpec.square(2, 2)
volume = window[None]
for op in ("fuzzy", "max", "avg", "regp"):
    print(f"{op:>5} pooling -> {pool_forward(volume, op, spec).pooled.item():.4f}")

# %%
# Backward pass: the winning set is frozen and the centre of gravity is
# differentiated through the membership slopes. The window above sits on the
# kinks at 1 and 3, where one-sided slopes differ, so the comparison with
# central differences uses values away from every breakpoint.
volume = np.array([[[0.4, 1.6], [2.2, 2.7]]])
out = pool_forward(volume, "fuzzy", spec)
analytic = pool_backward(out.cache, np.ones_like(out.pooled))
h = 1e-4
numeric = np.zeros_like(volume)
for idx in np.ndindex(volume.shape):
    up, down = volume.copy(), volume.copy()
    up[idx] += h
    down[idx] -= h
    numeric[idx] = (pool_forward(up, "fuzzy", spec).pooled - pool_forward(down, "fuzzy", spec).pooled).item() / (2 * h)
print("analytic gradient:", analytic.ravel())
print("numeric gradient: ", numeric.ravel())
