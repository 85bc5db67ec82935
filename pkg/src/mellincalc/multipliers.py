"""Scalar multiplier functions m: [0, inf) -> C with closed-form derivatives.

Every family in the catalog carries its derivatives up to ``max_order`` in
closed form.  Arbitrary callables can be wrapped with :func:`from_callable`,
which differentiates numerically in the logarithmic variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

ArrayFn = Callable[[np.ndarray], np.ndarray]
DerivFn = Callable[[int, np.ndarray], np.ndarray]

CATALOG_NAMES = ("heat", "sheat", "bochner_riesz", "br_psi", "bump", "window",
                 "zero", "one", "power_iu")


@dataclass(frozen=True)
class MultiplierSpec:
    """A multiplier together with its derivatives.

    ``deriv(beta, s)`` returns the ``beta``-th derivative.  At kink points
    (listed in ``kinks``) the value is the one-sided limit from the left.
    """

    name: str
    eval: ArrayFn
    deriv: DerivFn
    max_order: int
    value_at_zero: complex
    support_bound: Optional[float] = None
    is_real: bool = True
    kinks: tuple = ()
    # m(s) - m(0) evaluated without cancellation, when a family can do so.
    minus_zero: Optional[ArrayFn] = None
    meta: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=float))

    def derivative(self, beta: int, s) -> np.ndarray:
        if beta < 0 or beta > self.max_order:
            raise ValueError(
                f"{self.name}: derivative of order {beta} requested, "
                f"max_order is {self.max_order}")
        return self.deriv(beta, np.asarray(s, dtype=float))

    def shifted(self, s) -> np.ndarray:
        """m(s) - m(0)."""
        s = np.asarray(s, dtype=float)
        if self.minus_zero is not None:
            return self.minus_zero(s)
        return self.eval(s) - self.value_at_zero

    def dilated(self, c: float) -> "MultiplierSpec":
        """The multiplier s -> m(c s)."""
        if c <= 0:
            raise ValueError("dilation factor must be positive")
        base = self
        minus_zero = None
        if base.minus_zero is not None:
            minus_zero = lambda s: base.minus_zero(c * s)  # noqa: E731
        return MultiplierSpec(
            name=f"{base.name}@{c:g}",
            eval=lambda s: base.eval(c * s),
            deriv=lambda b, s: c**b * base.deriv(b, c * s),
            max_order=base.max_order,
            value_at_zero=base.value_at_zero,
            support_bound=None if base.support_bound is None else base.support_bound / c,
            is_real=base.is_real,
            kinks=tuple(k / c for k in base.kinks),
            minus_zero=minus_zero,
            meta=dict(base.meta),
        )


# ---------------------------------------------------------------------------
# smooth transition tau(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})


@lru_cache(maxsize=None)
def _edge_poly(n: int) -> np.ndarray:
    # d^n/dx^n e^{-1/x} = P_n(1/x) e^{-1/x},  P_{n+1}(y) = y^2 (P_n(y) - P_n'(y))
    if n == 0:
        return np.array([1.0])
    prev = _edge_poly(n - 1)
    inner = P.polysub(prev, P.polyder(prev))
    return P.polymul([0.0, 0.0, 1.0], inner)


def _edge(n: int, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    ok = x > 1.0 / 700.0
    y = 1.0 / x[ok]
    out[ok] = P.polyval(y, _edge_poly(n)) * np.exp(-y)
    return out


def transition(x, order: int = 0) -> np.ndarray:
    """Derivative of the C-infinity step tau: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    return transition_derivatives(x, order)[order]


def transition_derivatives(x, order: int) -> list[np.ndarray]:
    """[tau, tau', ..., tau^(order)] evaluated at ``x``."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    f = [_edge(n, xi) for n in range(order + 1)]
    g = [(-1) ** n * _edge(n, 1.0 - xi) for n in range(order + 1)]
    S = [f[n] + g[n] for n in range(order + 1)]
    tau: list[np.ndarray] = []
    for n in range(order + 1):
        acc = f[n].copy()
        for k in range(n):
            acc -= math.comb(n, k) * tau[k] * S[n - k]
        tau.append(acc / S[0])
    out = []
    for n in range(order + 1):
        full = np.zeros_like(x)
        if n == 0:
            full[x >= 1.0] = 1.0
        full[inside] = tau[n]
        out.append(full)
    return out


@lru_cache(maxsize=None)
def stirling1(n: int) -> tuple:
    """Signed Stirling numbers of the first kind s(n, k), k = 0..n.

    They convert log-variable derivatives into ordinary ones:
    s^n d^n/ds^n = sum_k s(n, k) (s d/ds)^k.
    """
    row = [1]
    for m in range(n):
        nxt = [0] * (m + 2)
        for k in range(m + 2):
            a = row[k - 1] if k >= 1 else 0
            b = row[k] if k <= m else 0
            nxt[k] = a - m * b
        row = nxt
    return tuple(row)


def falling(a: float, n: int) -> float:
    out = 1.0
    for k in range(n):
        out *= a - k
    return out


# ---------------------------------------------------------------------------
# catalog families


def _heat(max_order: int) -> MultiplierSpec:
    return MultiplierSpec(
        name="heat",
        eval=lambda s: np.exp(-s),
        deriv=lambda b, s: (-1.0) ** b * np.exp(-s),
        max_order=max_order,
        value_at_zero=1.0,
        minus_zero=lambda s: np.expm1(-s),
    )


def _sheat(max_order: int) -> MultiplierSpec:
    # d^b (s e^{-s}) = (-1)^b (s - b) e^{-s}
    return MultiplierSpec(
        name="sheat",
        eval=lambda s: s * np.exp(-s),
        deriv=lambda b, s: (-1.0) ** b * (s - b) * np.exp(-s),
        max_order=max_order,
        value_at_zero=0.0,
    )


def _br_power(delta: float, b: int, s: np.ndarray) -> np.ndarray:
    """d^b/ds^b (1 - s)^delta on s < 1, left limit at s = 1, zero beyond."""
    coef = (-1.0) ** b * falling(delta, b)
    out = np.zeros_like(s)
    if coef == 0.0:
        return out
    lt = s < 1.0
    out[lt] = coef * (1.0 - s[lt]) ** (delta - b)
    at = s == 1.0
    if np.any(at):
        e = delta - b
        out[at] = 0.0 if e > 0 else (coef if e == 0 else np.inf)
    return out


def _check_delta(family: str, delta: float, max_order: Optional[int]) -> int:
    if delta < 0:
        raise ValueError(f"{family}: delta must be >= 0, got {delta}")
    cap = int(math.floor(delta)) + 1
    if max_order is None:
        return cap
    if max_order > cap:
        raise ValueError(
            f"{family}({delta:g}) supplies derivatives up to order {cap}; "
            f"max_order={max_order} requested")
    return max_order


def _jumps(deriv: DerivFn, max_order: int) -> dict:
    one = np.array([1.0])
    return {b: float(deriv(b, one)[0]) for b in range(max_order + 1)
            if float(deriv(b, one)[0]) != 0.0}


def _bochner_riesz(delta: float, max_order: Optional[int]) -> MultiplierSpec:
    order = _check_delta("bochner_riesz", delta, max_order)

    def minus_zero(s):
        out = np.full_like(s, -1.0)
        lt = s < 1.0
        out[lt] = np.expm1(delta * np.log1p(-s[lt]))
        return out

    deriv = lambda b, s: _br_power(delta, b, s)  # noqa: E731
    return MultiplierSpec(
        name=f"bochner_riesz:{delta:g}",
        eval=lambda s: _br_power(delta, 0, s),
        deriv=deriv,
        max_order=order,
        value_at_zero=1.0,
        support_bound=1.0,
        kinks=(1.0,),
        minus_zero=minus_zero,
        meta={"delta": delta, "jump_at_1": _jumps(deriv, order),
              "one_sided_top": delta - order <= 0},
    )


def _br_psi(delta: float, max_order: Optional[int]) -> MultiplierSpec:
    order = _check_delta("br_psi", delta, max_order)

    def deriv(b, s):
        # Leibniz on s * (1-s)^delta
        out = s * _br_power(delta, b, s)
        if b >= 1:
            out = out + b * _br_power(delta, b - 1, s)
        return out

    return MultiplierSpec(
        name=f"br_psi:{delta:g}",
        eval=lambda s: deriv(0, s),
        deriv=deriv,
        max_order=order,
        value_at_zero=0.0,
        support_bound=1.0,
        kinks=(1.0,),
        meta={"delta": delta, "jump_at_1": _jumps(deriv, order),
              "one_sided_top": delta - order <= 0},
    )


def _bump(a: float, b: float, max_order: int) -> MultiplierSpec:
    if not 0.0 <= a < b:
        raise ValueError(f"bump needs 0 <= a < b, got a={a}, b={b}")
    w = 0.5 * (b - a)

    def deriv(n, s):
        p = transition_derivatives((s - a) / w, n)
        q = transition_derivatives((b - s) / w, n)
        out = np.zeros_like(s)
        for k in range(n + 1):
            out += (math.comb(n, k) * p[k] * q[n - k]
                    * (1.0 / w) ** k * (-1.0 / w) ** (n - k))
        return out

    return MultiplierSpec(
        name=f"bump:{a:g},{b:g}",
        eval=lambda s: deriv(0, s),
        deriv=deriv,
        max_order=max_order,
        value_at_zero=float(deriv(0, np.array([0.0]))[0]),
        support_bound=b,
    )


def _log_profile_spec(name: str, profile: Callable[[int, np.ndarray], np.ndarray],
                      max_order: int, value_at_zero: complex,
                      support_bound: Optional[float], is_real: bool = True,
                      meta: Optional[dict] = None) -> MultiplierSpec:
    """Multiplier given as n(log s); s-derivatives via Stirling numbers."""

    def deriv(beta, s):
        out = np.zeros(s.shape, dtype=complex if not is_real else float)
        pos = s > 0
        x = np.log(s[pos])
        acc = np.zeros(x.shape, dtype=out.dtype)
        for k, c in enumerate(stirling1(beta)):
            if c:
                acc = acc + c * profile(k, x)
        out[pos] = acc * s[pos] ** (-float(beta))
        if beta == 0:
            out[~pos] = value_at_zero
        return out

    return MultiplierSpec(
        name=name,
        eval=lambda s: deriv(0, s),
        deriv=deriv,
        max_order=max_order,
        value_at_zero=value_at_zero,
        support_bound=support_bound,
        is_real=is_real,
        meta=meta or {},
    )


def _window(a: float, b: float, r: float, max_order: int) -> MultiplierSpec:
    """Smoothed indicator of [a, b] with ramps of width r in log s.

    The ramps are centred at log a and log b, so the integral against ds/s
    equals log(b/a) exactly.
    """
    xa, xb = math.log(a), math.log(b)
    if not (0 < a < b) or r <= 0 or xb - xa < r:
        raise ValueError("window needs 0 < a < b and 0 < r <= log(b/a)")

    def profile(k, x):
        p = transition_derivatives((x - xa) / r + 0.5, k)
        q = transition_derivatives((xb - x) / r + 0.5, k)
        out = np.zeros_like(x)
        for i in range(k + 1):
            out += math.comb(k, i) * p[i] * q[k - i] * (1 / r) ** i * (-1 / r) ** (k - i)
        return out

    return _log_profile_spec(f"window:{a:g},{b:g},{r:g}", profile, max_order,
                             0.0, b * math.exp(r / 2))


def _power_iu(u0: float, max_order: int) -> MultiplierSpec:
    def deriv(b, s):
        coef = 1.0 + 0j
        for k in range(b):
            coef *= 1j * u0 - k
        out = np.zeros(s.shape, dtype=complex)
        pos = s > 0
        out[pos] = coef * np.exp((1j * u0 - b) * np.log(s[pos]))
        if b == 0:
            out[~pos] = 1.0
        return out

    return MultiplierSpec(
        name=f"power_iu:{u0:g}",
        eval=lambda s: deriv(0, s),
        deriv=deriv,
        max_order=max_order,
        value_at_zero=1.0,
        is_real=False,
        meta={"value_at_zero_convention": "s^{iu} has no limit at 0; 1 is stored"},
    )


def _constant(c: float, max_order: int) -> MultiplierSpec:
    name = "zero" if c == 0 else "one"
    return MultiplierSpec(
        name=name,
        eval=lambda s: np.full(np.shape(s), c, dtype=float),
        deriv=lambda b, s: np.full(np.shape(s), c if b == 0 else 0.0, dtype=float),
        max_order=max_order,
        value_at_zero=c,
        support_bound=0.0 if c == 0 else None,
        minus_zero=lambda s: np.zeros(np.shape(s)),
    )


def builtin_catalog(name: str, params: Sequence[float] = (),
                    max_order: Optional[int] = None) -> MultiplierSpec:
    """Build a catalog multiplier.

    ========================  ======================================
    ``heat``                  e^{-s}
    ``sheat``                 s e^{-s}
    ``bochner_riesz`` delta   (1 - s)^delta on s < 1
    ``br_psi`` delta          s (1 - s)^delta on s < 1
    ``bump`` [a, b]           C-infinity bump supported in [a, b]
    ``window`` [a, b, r]      smoothed indicator of [a, b]
    ``zero`` / ``one``        constants
    ``power_iu`` u0           s^{i u0}
    ========================  ======================================
    """
    params = [float(p) for p in params]
    analytic_order = 8 if max_order is None else max_order

    def need(n_min, n_max, default=None):
        if not n_min <= len(params) <= n_max:
            raise ValueError(f"{name}: expected {n_min}..{n_max} parameters, got {len(params)}")
        out = list(params)
        if default is not None:
            out += list(default[len(out):])
        return out

    if name == "heat":
        need(0, 0)
        return _heat(analytic_order)
    if name == "sheat":
        need(0, 0)
        return _sheat(analytic_order)
    if name == "bochner_riesz":
        (delta,) = need(1, 1)
        return _bochner_riesz(delta, max_order)
    if name == "br_psi":
        (delta,) = need(1, 1)
        return _br_psi(delta, max_order)
    if name == "bump":
        a, b = need(0, 2, default=(0.5, 2.0))
        return _bump(a, b, analytic_order)
    if name == "window":
        a, b, r = need(0, 3, default=(1.0, math.e, 0.5))
        return _window(a, b, r, analytic_order)
    if name == "zero":
        need(0, 0)
        return _constant(0.0, analytic_order)
    if name == "one":
        need(0, 0)
        return _constant(1.0, analytic_order)
    if name == "power_iu":
        (u0,) = need(1, 1)
        return _power_iu(u0, analytic_order)
    raise ValueError(f"unknown multiplier family {name!r}; known: {', '.join(CATALOG_NAMES)}")


def parse_multiplier(text: str, max_order: Optional[int] = None) -> MultiplierSpec:
    """Parse the ``family:p1,p2`` form used on the command line."""
    text = text.strip()
    family, _, rest = text.partition(":")
    params = [float(p) for p in rest.split(",") if p.strip()] if rest else []
    return builtin_catalog(family.strip(), params, max_order=max_order)


# ---------------------------------------------------------------------------
# numerical fallback


def _theta_derivative(func: ArrayFn, x: np.ndarray, k: int, h: float) -> np.ndarray:
    """k-th derivative of func(e^x) by central differences with step h."""
    if k == 0:
        return func(np.exp(x))
    # k-th central difference: sum_i (-1)^i C(k,i) f(x + (k/2 - i) h)
    acc = 0.0
    for i in range(k + 1):
        acc = acc + (-1) ** i * math.comb(k, i) * func(np.exp(x + (k / 2 - i) * h))
    return acc / h**k


def from_callable(name: str, func: ArrayFn, max_order: int = 4,
                  value_at_zero: Optional[complex] = None,
                  support_bound: Optional[float] = None,
                  is_real: bool = True, step_decades: float = 1e-4) -> MultiplierSpec:
    """Wrap a vectorised callable; derivatives by finite differences in log s.

    Differences are taken in x = log s and Richardson-extrapolated, then
    converted to s-derivatives through Stirling numbers.  The base step is
    ``step_decades`` for first order; higher orders use a step balancing
    truncation against round-off.
    """
    h0 = step_decades * math.log(10.0)
    eps = np.finfo(float).eps

    def theta(k, x):
        h = max(h0, eps ** (1.0 / (k + 2))) if k > 1 else h0
        d1 = _theta_derivative(func, x, k, h)
        d2 = _theta_derivative(func, x, k, h / 2)
        return (4.0 * d2 - d1) / 3.0

    def deriv(beta, s):
        s = np.asarray(s, dtype=float)
        if beta == 0:
            return func(s)
        out = np.zeros(s.shape, dtype=float if is_real else complex)
        pos = s > 0
        x = np.log(s[pos])
        acc = 0.0
        for k, c in enumerate(stirling1(beta)):
            if c:
                acc = acc + c * theta(k, x)
        out[pos] = acc * s[pos] ** (-float(beta))
        return out

    v0 = value_at_zero if value_at_zero is not None else complex(func(np.array([0.0]))[0])
    if is_real:
        v0 = float(np.real(v0))
    return MultiplierSpec(name=name, eval=func, deriv=deriv, max_order=max_order,
                          value_at_zero=v0, support_bound=support_bound,
                          is_real=is_real, meta={"derivatives": "finite-difference"})
