"""Fuzzy, max, average and RegP pooling with forward and backward passes.

Every forward function takes a volume ``(z, h, w)`` or a batch
``(n, z, h, w)`` and returns a :class:`PoolOutput` whose cache is all that the
matching backward function needs. Arithmetic is float64 throughout.

Fuzzy pooling, per window and channel:

1. fuzzify every element against the small / medium / large sets,
2. score each set by summing its degrees over the window,
3. keep the degrees of the best-scoring set (ties go to the smaller set),
4. defuzzify by centre of gravity: ``sum(pi * p) / sum(pi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import OutputGrid, PoolWindowSpec, fold_windows, window_view
from .errors import ConfigError, ShapeError, SelectionError
from .membership import MembershipBank, default_bank, memberships, mu_derivatives

OPERATORS = ("fuzzy", "max", "avg", "regp")


@dataclass
class PoolCache:
    operator: str
    spec: PoolWindowSpec
    grid: OutputGrid
    input_shape: tuple
    windows: np.ndarray  # (..., out_h, out_w, k*k)
    # fuzzy
    selected: Optional[np.ndarray] = None  # chosen set index per window
    degrees: Optional[np.ndarray] = None  # memberships of the chosen set
    denom: Optional[np.ndarray] = None
    pooled: Optional[np.ndarray] = None
    bank: Optional[MembershipBank] = None
    stop_membership_grad: bool = False
    # max / regp; -1 marks an averaging RegP window
    position: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


@dataclass
class PoolOutput:
    pooled: np.ndarray
    cache: PoolCache


def _windows(x, spec):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (3, 4):
        raise ShapeError(f"expected (z, h, w) or (n, z, h, w), got shape {x.shape}")
    win, grid = window_view(x, spec)
    return x, win, grid


def _check_grad(cache: PoolCache, grad_out) -> np.ndarray:
    g = np.asarray(grad_out, dtype=np.float64)
    expected = cache.windows.shape[:-1]
    if g.shape != expected:
        raise ShapeError(f"grad_out shape {g.shape} does not match pooled shape {expected}")
    return g


# -- per-patch building blocks ------------------------------------------------


def fuzzify_patch(patch, bank: MembershipBank) -> np.ndarray:
    """Membership degrees of a ``k x k`` patch in each set, shape ``(3, k, k)``."""
    return memberships(np.asarray(patch, dtype=np.float64), bank)


def score_patch(degrees) -> float:
    return float(np.sum(degrees))


def select_fuzzy(scores) -> int:
    """Index of the highest score; the smallest index wins ties."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.any(scores > 0):
        raise SelectionError("all fuzzy-set scores are zero; the bank does not cover the window")
    return int(np.argmax(scores))


def defuzzify_cog(patch, degrees) -> float:
    patch = np.asarray(patch, dtype=np.float64)
    degrees = np.asarray(degrees, dtype=np.float64)
    total = degrees.sum()
    if not total > 0:
        raise SelectionError("centre of gravity undefined: membership degrees sum to zero")
    return float((degrees * patch).sum() / total)


# -- fuzzy --------------------------------------------------------------------


def fuzzy_pool_forward(
    x,
    spec: PoolWindowSpec = PoolWindowSpec(),
    bank: Optional[MembershipBank] = None,
    stop_membership_grad: bool = False,
) -> PoolOutput:
    bank = bank or default_bank()
    x, win, grid = _windows(x, spec)
    mu = memberships(win, bank)  # (3, ..., kk)
    scores = mu.sum(axis=-1)
    selected = scores.argmax(axis=0)
    degrees = np.take_along_axis(mu, selected[None, ..., None], axis=0)[0]
    denom = degrees.sum(axis=-1)
    if not np.all(denom > 0):
        raise SelectionError(
            f"{np.count_nonzero(denom <= 0)} windows have zero membership in every set"
        )
    pooled = (degrees * win).sum(axis=-1) / denom
    cache = PoolCache(
        "fuzzy", spec, grid, x.shape, win,
        selected=selected, degrees=degrees, denom=denom, pooled=pooled,
        bank=bank, stop_membership_grad=stop_membership_grad,
    )
    return PoolOutput(pooled, cache)


def fuzzy_pool_backward(cache: PoolCache, grad_out) -> np.ndarray:
    """Gradient through the centre of gravity with the chosen set held fixed.

    For window values ``p``, chosen degrees ``pi`` with sum ``S`` and output
    ``y``: ``dy/dp = (pi + mu'(p) * (p - y)) / S``. With
    ``stop_membership_grad`` the degrees are treated as constants.
    """
    g = _check_grad(cache, grad_out)
    win, pi, S = cache.windows, cache.degrees, cache.denom[..., None]
    if cache.stop_membership_grad:
        local = pi / S
    else:
        slopes = mu_derivatives(win, cache.bank)
        slope = np.take_along_axis(slopes, cache.selected[None, ..., None], axis=0)[0]
        local = (pi + slope * (win - cache.pooled[..., None])) / S
    return fold_windows(g[..., None] * local, cache.input_shape, cache.spec)


# -- max / average ------------------------------------------------------------


def max_pool_forward(x, spec: PoolWindowSpec = PoolWindowSpec()) -> PoolOutput:
    x, win, grid = _windows(x, spec)
    position = win.argmax(axis=-1)  # first maximum in row-major order
    pooled = np.take_along_axis(win, position[..., None], axis=-1)[..., 0]
    return PoolOutput(pooled, PoolCache("max", spec, grid, x.shape, win, position=position))


def _route(cache: PoolCache, g: np.ndarray, position: np.ndarray) -> np.ndarray:
    kk = cache.windows.shape[-1]
    gwin = (np.arange(kk) == position[..., None]) * g[..., None]
    return fold_windows(gwin, cache.input_shape, cache.spec)


def max_pool_backward(cache: PoolCache, grad_out) -> np.ndarray:
    return _route(cache, _check_grad(cache, grad_out), cache.position)


def avg_pool_forward(x, spec: PoolWindowSpec = PoolWindowSpec()) -> PoolOutput:
    x, win, grid = _windows(x, spec)
    return PoolOutput(win.mean(axis=-1), PoolCache("avg", spec, grid, x.shape, win))


def avg_pool_backward(cache: PoolCache, grad_out) -> np.ndarray:
    g = _check_grad(cache, grad_out)
    kk = cache.windows.shape[-1]
    gwin = np.broadcast_to(g[..., None] / kk, cache.windows.shape)
    return fold_windows(gwin, cache.input_shape, cache.spec)


# -- RegP ---------------------------------------------------------------------


def regp_pool_forward(x, spec: PoolWindowSpec = PoolWindowSpec(), tau: float = 0.0) -> PoolOutput:
    """Pick the window element with the most neighbours within ``tau`` of it.

    An element's score counts the *other* window elements whose absolute
    difference to it is at most ``tau``. If every top-scoring element holds
    the same value that value is emitted (gradient goes to the first such
    element); otherwise the window average is emitted.
    """
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau}")
    x, win, grid = _windows(x, spec)
    close = np.abs(win[..., :, None] - win[..., None, :]) <= tau
    score = close.sum(axis=-1) - 1
    best = score.max(axis=-1, keepdims=True)
    winners = score == best
    hi = np.where(winners, win, -np.inf).max(axis=-1)
    lo = np.where(winners, win, np.inf).min(axis=-1)
    unique = hi == lo
    first = winners.argmax(axis=-1)
    pooled = np.where(unique, hi, win.mean(axis=-1))
    position = np.where(unique, first, -1)
    cache = PoolCache("regp", spec, grid, x.shape, win, position=position, extra={"tau": tau})
    return PoolOutput(pooled, cache)


def regp_pool_backward(cache: PoolCache, grad_out) -> np.ndarray:
    g = _check_grad(cache, grad_out)
    kk = cache.windows.shape[-1]
    routed = (np.arange(kk) == cache.position[..., None]) * g[..., None]
    averaged = np.broadcast_to(g[..., None] / kk, cache.windows.shape)
    gwin = np.where((cache.position < 0)[..., None], averaged, routed)
    return fold_windows(gwin, cache.input_shape, cache.spec)


# -- dispatch -----------------------------------------------------------------


def pool_forward(
    x,
    operator: str,
    spec: PoolWindowSpec = PoolWindowSpec(),
    bank: Optional[MembershipBank] = None,
    tau: float = 0.0,
    stop_membership_grad: bool = False,
) -> PoolOutput:
    """Run the pooling operator named ``operator`` (one of :data:`OPERATORS`)."""
    if operator == "fuzzy":
        return fuzzy_pool_forward(x, spec, bank, stop_membership_grad)
    if operator == "max":
        return max_pool_forward(x, spec)
    if operator == "avg":
        return avg_pool_forward(x, spec)
    if operator == "regp":
        return regp_pool_forward(x, spec, tau)
    raise ConfigError(f"unknown pooling operator {operator!r}; choose from {OPERATORS}")


_BACKWARD = {
    "fuzzy": fuzzy_pool_backward,
    "max": max_pool_backward,
    "avg": avg_pool_backward,
    "regp": regp_pool_backward,
}


def pool_backward(cache: PoolCache, grad_out) -> np.ndarray:
    return _BACKWARD[cache.operator](cache, grad_out)


def pool(x, operator: str, spec: PoolWindowSpec = PoolWindowSpec(), **kwargs) -> np.ndarray:
    """Forward pass only; returns the pooled array."""
    return pool_forward(x, operator, spec, **kwargs).pooled
