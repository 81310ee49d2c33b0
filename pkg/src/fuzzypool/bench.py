"""Throughput benchmark for the pooling operators."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .core import PoolWindowSpec, output_dims
from .errors import InputError
from .pooling import OPERATORS, pool_forward


@dataclass(frozen=True)
class BenchResult:
    operator: str
    shape: tuple  # (z, h, w)
    windows: int
    median_seconds: float

    @property
    def windows_per_second(self) -> float:
        return self.windows / self.median_seconds


def bench_pooling(
    operators,
    shapes=((16, 64, 64),),
    spec: PoolWindowSpec = PoolWindowSpec(),
    trials: int = 5,
    warmup: int = 1,
    seed: int = 0,
):
    """Median wall time of ``trials`` forward passes per operator and volume shape.

    A window here is one ``(patch, channel)`` pair, so throughput is
    ``z * out_h * out_w / median_seconds``.
    """
    operators = list(operators)
    if not operators:
        raise InputError("no operators to benchmark")
    for op in operators:
        if op not in OPERATORS:
            raise InputError(f"unknown operator {op!r}")
    trials = max(int(trials), 5)
    rng = np.random.default_rng(seed)
    results = []
    for shape in shapes:
        z, h, w = shape
        grid = output_dims(spec, w, h)
        x = rng.uniform(0.0, 6.0, size=shape)
        for op in operators:
            for _ in range(warmup):
                pool_forward(x, op, spec)
            times = []
            for _ in range(trials):
                start = time.perf_counter()
                pool_forward(x, op, spec)
                times.append(time.perf_counter() - start)
            results.append(BenchResult(op, tuple(shape), z * grid.patch_count, statistics.median(times)))
    return results
