"""
Training LeNet with swappable pooling
=====================================

Trains the same LeNet on a small MNIST subset once per pooling operator and
prints test accuracy after each epoch. Expects the IDX files under
``$FUZZYPOOL_DATA/mnist`` (see ``tools/prepare_data.py``).
"""

from fuzzypool.data import load_mnist
from fuzzypool.nn import build_lenet, train

train_set = load_mnist(train=True).subset(2000)
test_set = load_mnist(train=False).subset(500)

# %%
# Same seed for every operator, so the initial weights are identical and
# only the pooling layers differ.
for op in ("max", "avg", "regp", "fuzzy"):
    cfg = build_lenet(op, epochs=2, lr=0.01, batch_size=32, seed=0)
    report = train(cfg, train_set, test_set)
    curve = " ".join(f"{a:.3f}" for a in report.test_accuracy)
    print(f"{op:>5}: initial {report.initial_test_accuracy:.3f} -> {curve} ({sum(report.seconds):.1f} s)")
