"""
Pooling throughput
==================

Median forward-pass time per operator, reported as windows per second. A
window is one (patch, channel) pair.
"""

from fuzzypool.bench import bench_pooling

for r in bench_pooling(["max", "avg", "regp", "fuzzy"], shapes=[(16, 64, 64), (6, 24, 24)], trials=7):
    print(f"{r.operator:>5} {'x'.join(map(str, r.shape)):>9}: {r.windows_per_second / 1e6:7.2f} M windows/s")
