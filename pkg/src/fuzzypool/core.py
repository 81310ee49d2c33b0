"""Volumes, pooling-window geometry and patch extraction.

A *volume* is a ``(z, h, w)`` float array (channel, row, col). Batched code
paths use ``(n, z, h, w)``; every function here accepts either and returns
arrays with the same leading layout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ShapeError


@dataclass(frozen=True)
class PoolWindowSpec:
    """Square pooling window of side ``k`` moved with ``stride``; zero padding per side."""

    k: int = 2
    stride: int = 2
    pad_w: int = 0
    pad_h: int = 0

    def __post_init__(self):
        if int(self.k) < 1 or int(self.stride) < 1:
            raise DimensionError(f"k and stride must be >= 1, got k={self.k}, stride={self.stride}")
        if int(self.pad_w) < 0 or int(self.pad_h) < 0:
            raise DimensionError(f"padding must be >= 0, got ({self.pad_w}, {self.pad_h})")

    @classmethod
    def square(cls, k: int, stride: int, pad: int = 0) -> "PoolWindowSpec":
        return cls(k=k, stride=stride, pad_w=pad, pad_h=pad)


class OutputGrid(NamedTuple):
    out_w: int
    out_h: int

    @property
    def patch_count(self) -> int:
        return self.out_w * self.out_h


def as_volume(x, dtype=np.float64) -> np.ndarray:
    """Validate and convert to a ``(z, h, w)`` array.

    A 2-D array is treated as a single feature map.
    """
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"a volume must be 2-D or 3-D, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"volume dimensions must be >= 1, got {arr.shape}")
    return arr


def output_dims(spec: PoolWindowSpec, w: int, h: int) -> OutputGrid:
    padded_w = w + 2 * spec.pad_w
    padded_h = h + 2 * spec.pad_h
    if padded_w < spec.k or padded_h < spec.k:
        raise DimensionError(
            f"window k={spec.k} larger than padded input {padded_h}x{padded_w}"
        )
    return OutputGrid(
        out_w=(padded_w - spec.k) // spec.stride + 1,
        out_h=(padded_h - spec.k) // spec.stride + 1,
    )


def _pad(x: np.ndarray, spec: PoolWindowSpec) -> np.ndarray:
    if spec.pad_w == 0 and spec.pad_h == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(spec.pad_h, spec.pad_h), (spec.pad_w, spec.pad_w)]
    return np.pad(x, widths, mode="constant", constant_values=0.0)


def window_view(x: np.ndarray, spec: PoolWindowSpec) -> tuple[np.ndarray, OutputGrid]:
    """All pooling windows of ``x`` as a ``(..., out_h, out_w, k*k)`` array.

    Window elements are flattened row-major. The result is a copy (safe to
    mutate) because the strided view is not contiguous once reshaped.
    """
    x = np.asarray(x)
    h, w = x.shape[-2:]
    grid = output_dims(spec, w, h)
    padded = _pad(x, spec)
    view = sliding_window_view(padded, (spec.k, spec.k), axis=(-2, -1))
    view = view[..., :: spec.stride, :: spec.stride, :, :]
    view = view[..., : grid.out_h, : grid.out_w, :, :]
    return view.reshape(view.shape[:-2] + (spec.k * spec.k,)), grid


def fold_windows(
    grad_windows: np.ndarray, input_shape: tuple[int, ...], spec: PoolWindowSpec
) -> np.ndarray:
    """Adjoint of :func:`window_view`: scatter-add per-window values back to the input.

    Overlapping windows (``stride < k``) accumulate additively; contributions
    landing in the zero padding are dropped.
    """
    h, w = input_shape[-2:]
    grid = output_dims(spec, w, h)
    k, s = spec.k, spec.stride
    lead = input_shape[:-2]
    g = grad_windows.reshape(lead + (grid.out_h, grid.out_w, k, k))
    padded = np.zeros(lead + (h + 2 * spec.pad_h, w + 2 * spec.pad_w), dtype=np.float64)
    row_span = s * (grid.out_h - 1) + 1
    col_span = s * (grid.out_w - 1) + 1
    for i in range(k):
        for j in range(k):
            padded[..., i : i + row_span : s, j : j + col_span : s] += g[..., i, j]
    return padded[..., spec.pad_h : spec.pad_h + h, spec.pad_w : spec.pad_w + w]


@dataclass(frozen=True)
class VolumePatch:
    """One ``k x k x z`` window; ``origin`` is its top-left corner in padded coordinates."""

    values: np.ndarray  # (z, k, k)
    origin: tuple[int, int]

    @property
    def k(self) -> int:
        return self.values.shape[-1]

    @property
    def depth(self) -> int:
        return self.values.shape[0]


def extract_patches(volume, spec: PoolWindowSpec) -> tuple[list[VolumePatch], OutputGrid]:
    """Enumerate the volume patches row-major over the output grid."""
    vol = as_volume(volume)
    windows, grid = window_view(vol, spec)  # (z, oh, ow, k*k)
    z = vol.shape[0]
    patches = []
    for r in range(grid.out_h):
        for c in range(grid.out_w):
            values = windows[:, r, c, :].reshape(z, spec.k, spec.k).copy()
            patches.append(VolumePatch(values, (r * spec.stride, c * spec.stride)))
    return patches, grid


def scatter_to_volume(values, grid: OutputGrid, z: int) -> np.ndarray:
    """Assemble per-patch scalars into an ``(z, out_h, out_w)`` volume.

    ``values`` is indexed ``[patch, channel]`` with patches in the row-major
    order produced by :func:`extract_patches`; a flat sequence is read the
    same way.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != grid.patch_count * z:
        raise ShapeError(
            f"expected {grid.patch_count} patches x {z} channels = "
            f"{grid.patch_count * z} values, got {arr.size}"
        )
    arr = arr.reshape(grid.out_h, grid.out_w, z)
    return np.ascontiguousarray(arr.transpose(2, 0, 1))
