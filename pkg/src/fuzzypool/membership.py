"""Capped ReLU and the small / medium / large membership functions.

All functions are vectorized over numpy arrays and defined on the whole real
line: the shoulders saturate outside ``[0, r_max]``.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .errors import ParameterError

SMALL, MEDIUM, LARGE = 0, 1, 2
SET_NAMES = ("small", "medium", "large")


@dataclass(frozen=True)
class MembershipBank:
    """Parameters of the three membership functions over ``E = [0, r_max]``.

    ``small`` is a left shoulder falling from 1 at ``c`` to 0 at ``d``;
    ``medium`` a triangle ``(a, m, b)``; ``large`` a right shoulder rising
    from 0 at ``r`` to 1 at ``q``.
    """

    r_max: float
    c: float
    d: float
    a: float
    m: float
    b: float
    r: float
    q: float

    def __post_init__(self):
        if not self.r_max > 0:
            raise ParameterError(f"r_max must be positive, got {self.r_max}")
        if not 0 < self.c < self.d:
            raise ParameterError(f"need 0 < c < d, got c={self.c}, d={self.d}")
        if not self.a < self.m < self.b:
            raise ParameterError(f"need a < m < b, got ({self.a}, {self.m}, {self.b})")
        if not self.r < self.q:
            raise ParameterError(f"need r < q, got r={self.r}, q={self.q}")

    @property
    def n_sets(self) -> int:
        return 3

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(astuple(self)[1:])))

    def to_dict(self) -> dict[str, float]:
        return {
            "r_max": self.r_max, "c": self.c, "d": self.d, "a": self.a,
            "m": self.m, "b": self.b, "r": self.r, "q": self.q,
        }


def default_bank(r_max: float = 6.0) -> MembershipBank:
    """Bank scaled linearly with ``r_max``; ``r_max=6`` gives c=1, d=3, a=1.5, m=3, b=4.5, r=3, q=4.5."""
    if not r_max > 0:
        raise ParameterError(f"r_max must be positive, got {r_max}")
    r_max = float(r_max)
    return MembershipBank(
        r_max=r_max,
        c=r_max / 6,
        d=r_max / 2,
        a=r_max / 4,
        m=r_max / 2,
        b=3 * r_max / 4,
        r=r_max / 2,
        q=3 * r_max / 4,
    )


def capped_relu(x, r_max: float = 6.0):
    return np.minimum(np.maximum(x, 0.0), r_max)


def mu_small(x, bank: MembershipBank):
    x = np.asarray(x, dtype=np.float64)
    ramp = (bank.d - x) / (bank.d - bank.c)
    return np.where(x < bank.c, 1.0, np.where(x > bank.d, 0.0, ramp))


def mu_medium(x, bank: MembershipBank):
    x = np.asarray(x, dtype=np.float64)
    rise = (x - bank.a) / (bank.m - bank.a)
    fall = (bank.b - x) / (bank.b - bank.m)
    inside = (x > bank.a) & (x < bank.b)
    return np.where(inside, np.where(x <= bank.m, rise, fall), 0.0)


def mu_large(x, bank: MembershipBank):
    x = np.asarray(x, dtype=np.float64)
    ramp = (x - bank.r) / (bank.q - bank.r)
    return np.where(x < bank.r, 0.0, np.where(x > bank.q, 1.0, ramp))


_MU = (mu_small, mu_medium, mu_large)


def membership(v: int, x, bank: MembershipBank):
    """Degree of ``x`` in fuzzy set ``v`` (0 = small, 1 = medium, 2 = large)."""
    return _MU[v](x, bank)


def memberships(x, bank: MembershipBank) -> np.ndarray:
    """Stack of all three degrees, shape ``(3,) + x.shape``."""
    return np.stack([mu(x, bank) for mu in _MU])


def mu_derivative(v: int, x, bank: MembershipBank):
    """Slope of membership ``v`` at ``x``; right-hand slope at breakpoints."""
    x = np.asarray(x, dtype=np.float64)
    if v == SMALL:
        return np.where((x >= bank.c) & (x < bank.d), -1.0 / (bank.d - bank.c), 0.0)
    if v == MEDIUM:
        up = 1.0 / (bank.m - bank.a)
        down = -1.0 / (bank.b - bank.m)
        return np.where(
            (x >= bank.a) & (x < bank.m), up, np.where((x >= bank.m) & (x < bank.b), down, 0.0)
        )
    if v == LARGE:
        return np.where((x >= bank.r) & (x < bank.q), 1.0 / (bank.q - bank.r), 0.0)
    raise ParameterError(f"fuzzy set index must be 0, 1 or 2, got {v}")


def mu_derivatives(x, bank: MembershipBank) -> np.ndarray:
    return np.stack([mu_derivative(v, x, bank) for v in range(3)])
