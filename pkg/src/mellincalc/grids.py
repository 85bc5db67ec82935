"""Discretisation grids and the quadrature rules built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LogGrid:
    """Log-equispaced nodes on [s_min, s_max]."""

    s_min: float = 1e-8
    s_max: float = 1e8
    points_per_decade: int = 256

    def __post_init__(self):
        if not 0 < self.s_min < self.s_max:
            raise ValueError(f"need 0 < s_min < s_max, got [{self.s_min}, {self.s_max}]")
        if self.points_per_decade < 1:
            raise ValueError("points_per_decade must be >= 1")

    @property
    def decades(self) -> float:
        return math.log10(self.s_max / self.s_min)

    @property
    def size(self) -> int:
        return int(round(self.points_per_decade * self.decades)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.logspace(math.log10(self.s_min), math.log10(self.s_max), self.size)

    def as_dict(self) -> dict:
        return {"s_min": self.s_min, "s_max": self.s_max,
                "points_per_decade": self.points_per_decade}


@dataclass(frozen=True)
class UGrid:
    """Symmetric equispaced grid on [-u_max, u_max]; always contains 0."""

    u_max: float = 2048.0
    du: float = 1.0 / 64.0

    def __post_init__(self):
        if self.u_max <= 0 or self.du <= 0 or self.du > self.u_max:
            raise ValueError(f"invalid u-grid u_max={self.u_max}, du={self.du}")

    @property
    def half_count(self) -> int:
        return int(round(self.u_max / self.du))

    @property
    def nodes(self) -> np.ndarray:
        k = np.arange(-self.half_count, self.half_count + 1)
        return k * self.du

    def refined(self) -> "UGrid":
        return UGrid(self.u_max, self.du / 2)

    def doubled(self) -> "UGrid":
        return UGrid(2 * self.u_max, self.du)

    def as_dict(self) -> dict:
        return {"u_max": self.u_max, "du": self.du}


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    if n > 1:
        w[0] = w[-1] = h / 2
    return w


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_panels(func: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 width: float = 0.0625, order: int = 16) -> float:
    """Composite Gauss-Legendre quadrature of ``func`` on [a, b]."""
    if b <= a:
        return 0.0
    npan = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, npan + 1)
    t, w = _gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    fx = func(x).reshape(npan, order)
    return float(np.sum(fx @ w * half))


def integrate_log_tail(func: Callable[[np.ndarray], np.ndarray], rel_tol: float = 1e-10,
                       x_stop: float = 128.0, breakpoints=()) -> tuple[float, dict]:
    """Integrate ``func(x)`` over [0, inf) with doubling upper limits.

    ``func`` is the integrand already expressed in x = log s.  Returns the
    value and a diagnostic dict; the value is ``inf`` when the increments do
    not fall below ``rel_tol`` before ``x_stop``.
    """
    cuts = sorted(b for b in breakpoints if b > 0)
    total = 0.0
    lo, hi = 0.0, 1.0
    last_inc = 0.0
    while True:
        pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
        inc = sum(gauss_panels(func, p, q) for p, q in zip(pts[:-1], pts[1:]))
        total += inc
        last_inc = inc
        if hi >= 2.0 and abs(inc) <= rel_tol * abs(total):
            return total, {"x_upper": hi, "last_increment": last_inc, "converged": True}
        if hi >= 2.0 and total == 0.0 and inc == 0.0:
            return 0.0, {"x_upper": hi, "last_increment": 0.0, "converged": True}
        if hi >= x_stop:
            return math.inf, {"x_upper": hi, "last_increment": last_inc, "converged": False,
                              "diagnostic": "tail increments do not decay; integral diverges"}
        lo, hi = hi, 2.0 * hi
