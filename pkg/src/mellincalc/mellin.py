"""Numerical Mellin transform, inversion, Plancherel check and decay reports.

All integrals over (0, inf) against ds/s are computed in x = log s, where
the measure becomes dx.  The forward transform is a trapezoid sum on an
x-grid whose step is a power of two; with a dyadic u-step the phases
u * x are then exact in floating point, which keeps the round-off floor
near machine epsilon even for |u| in the thousands.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import LogGrid, UGrid, trapezoid_weights
from .multipliers import MultiplierSpec
from .reports import VerificationReport, table_to_csv

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
DEFAULT_SGRID = LogGrid(1e-8, 1e8, 256)
DEFAULT_UGRID = UGrid(2048.0, 1.0 / 64.0)
# The trapezoid alias period 2*pi/h is kept at least this many times u_max.
ALIAS_MARGIN = 3.0


class TruncationError(RuntimeError):
    """Raised when a truncated u-integral has too large a tail."""

    def __init__(self, message: str, required_u_max: Optional[float] = None):
        super().__init__(message)
        self.required_u_max = required_u_max


@dataclass
class MellinSamples:
    """Samples of a Mellin transform on a symmetric u-grid.

    ``d1`` and ``d2`` hold d/du and d^2/du^2 when requested.  ``noise_floor``
    estimates the round-off level of each array.
    """

    u: np.ndarray
    values: np.ndarray
    source: str
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    grid_meta: dict = field(default_factory=dict)
    noise_floor: dict = field(default_factory=dict)
    ugrid: Optional[UGrid] = None

    @property
    def du(self) -> float:
        return float(self.u[1] - self.u[0])

    @property
    def u_max(self) -> float:
        return float(self.u[-1])

    def array(self, which: str = "values") -> np.ndarray:
        arr = getattr(self, which)
        if arr is None:
            raise ValueError(f"{self.source}: derivative samples {which!r} were not computed")
        return arr

    def restricted(self, u_max: float) -> "MellinSamples":
        """The same samples on the sub-grid |u| <= u_max."""
        keep = np.abs(self.u) <= u_max + 1e-12
        sub = lambda a: None if a is None else a[keep]  # noqa: E731
        return MellinSamples(self.u[keep], self.values[keep], self.source, sub(self.d1),
                             sub(self.d2), dict(self.grid_meta), dict(self.noise_floor),
                             UGrid(u_max, self.du))

    def to_csv(self) -> str:
        cols = {"u": self.u, "re": self.values.real, "im": self.values.imag}
        zeros = np.zeros_like(self.u)
        for name, arr in (("du", self.d1), ("d2u", self.d2)):
            a = zeros if arr is None else arr
            cols[f"re_{name}"] = np.real(a)
            cols[f"im_{name}"] = np.imag(a)
        return table_to_csv(cols)


# ---------------------------------------------------------------------------
# quadrature engine


def quadrature_step(sgrid: LogGrid, ugrid: UGrid) -> float:
    """Dyadic x-step fine enough for the s-grid density and for u_max."""
    target = min(math.log(10.0) / sgrid.points_per_decade,
                 2.0 * math.pi / (ALIAS_MARGIN * ugrid.u_max))
    return 2.0 ** math.floor(math.log2(target))


def _x_nodes(sgrid: LogGrid, h: float, support: Optional[float]) -> np.ndarray:
    x_hi = math.log(sgrid.s_max)
    if support is not None and support > 0:
        x_hi = min(x_hi, math.log(support))
    i_lo = math.floor(math.log(sgrid.s_min) / h)
    i_hi = math.ceil(x_hi / h)
    return h * np.arange(i_lo, i_hi + 1, dtype=float)


def _trim(x: np.ndarray, F: np.ndarray):
    nz = np.flatnonzero(np.any(F != 0, axis=1) if F.ndim == 2 else F != 0)
    if nz.size == 0:
        return x[:1], F[:1] * 0
    lo = max(nz[0] - 1, 0)
    hi = min(nz[-1] + 2, x.size)
    return x[lo:hi], F[lo:hi]


def fourier_sums(x: np.ndarray, V: np.ndarray, du: float, count: int) -> np.ndarray:
    """sum_j V[j, r] exp(-i u_k x_j) for u_k = k du, k = 0..count-1.

    Blocked so that the bulk of the work is a single complex matrix
    product; every phase is computed directly from an exact product.
    """
    V = np.asarray(V, dtype=complex)
    if V.ndim == 1:
        V = V[:, None]
    n, r = V.shape
    block = int(min(512, max(16, 2**22 // max(n, 1))))
    Z = np.exp(-1j * np.outer(np.arange(block) * du, x))          # block x n
    nblocks = -(-count // block)
    out = np.empty((nblocks * block, r), dtype=complex)
    chunk = max(1, int(2**23 // max(n * r, 1)))
    for b0 in range(0, nblocks, chunk):
        bs = np.arange(b0, min(nblocks, b0 + chunk))
        base = np.exp(-1j * np.outer(x, bs * block * du))             # n x nb
        W = (V[:, :, None] * base[:, None, :]).reshape(n, r * bs.size)
        R = (Z @ W).reshape(block, r, bs.size)
        for i, b in enumerate(bs):
            out[b * block:(b + 1) * block] = R[:, :, i]
    return out[:count]


def _transform_arrays(x: np.ndarray, F: np.ndarray, ugrid: UGrid, orders: int) -> tuple:
    """Mellin samples of F(x) and of (-i x)^k F(x), k <= orders, on ugrid."""
    h = x[1] - x[0] if x.size > 1 else 1.0
    w = trapezoid_weights(x.size, h)
    cols = [w * F * (-1j * x) ** k for k in range(orders + 1)]
    V = np.stack(cols, axis=1)
    K = ugrid.half_count
    pos = fourier_sums(x, V, ugrid.du, K + 1)
    if np.isrealobj(F) or np.all(np.imag(F) == 0):
        # F real: the k-th column is (-i)^k times real, negative u by symmetry
        neg = np.conj(pos[1:][::-1]) * np.array([(-1) ** k for k in range(orders + 1)])
    else:
        negV = np.conj(V)
        neg = np.conj(fourier_sums(x, negV, ugrid.du, K + 1)[1:][::-1])
    full = np.concatenate([neg, pos], axis=0)
    floors = [4.0 * EPS * float(np.sqrt(np.sum(np.abs(c) ** 2))) for c in cols]
    return full, floors


def _integrand_grid(func, sgrid: LogGrid, ugrid: UGrid, support: Optional[float]):
    h = quadrature_step(sgrid, ugrid)
    x = _x_nodes(sgrid, h, support)
    F = np.asarray(func(np.exp(x)))
    x, F = _trim(x, F)
    return x, F, h


def _samples_from(func, source: str, sgrid: LogGrid, ugrid: UGrid,
                  support: Optional[float], derivatives: bool) -> MellinSamples:
    x, F, h = _integrand_grid(func, sgrid, ugrid, support)
    orders = 2 if derivatives else 0
    full, floors = _transform_arrays(x, F, ugrid, orders)
    names = ["values", "d1", "d2"][: orders + 1]
    meta = {"sgrid": sgrid.as_dict(), "ugrid": ugrid.as_dict(), "x_step": h,
            "x_range": [float(x[0]), float(x[-1])], "x_nodes": int(x.size),
            "rule": "trapezoid in log s"}
    return MellinSamples(
        u=ugrid.nodes, values=full[:, 0], source=source,
        d1=full[:, 1] if derivatives else None,
        d2=full[:, 2] if derivatives else None,
        grid_meta=meta, noise_floor=dict(zip(names, floors)), ugrid=ugrid)


def mellin_transform(m: MultiplierSpec, sgrid: LogGrid = DEFAULT_SGRID,
                     ugrid: UGrid = DEFAULT_UGRID, derivatives: bool = False) -> MellinSamples:
    """M(m)(u) = int_0^inf s^{-iu} m(s) ds/s on the u-grid.

    With ``derivatives`` the first two u-derivatives are computed from the
    log-weighted integrands (-i log s) m and (-i log s)^2 m.
    """
    if m.value_at_zero != 0:
        raise ValueError(
            f"{m.name}: m(0) = {m.value_at_zero} != 0, so int m(s) ds/s diverges at 0; "
            "subtract m(0) e^{-s} first (see a_phi)")
    return _samples_from(m.eval, m.name, sgrid, ugrid, m.support_bound, derivatives)


def a_phi(phi: MultiplierSpec, ugrid: UGrid = DEFAULT_UGRID,
          sgrid: LogGrid = DEFAULT_SGRID, alpha: Optional[int] = None,
          derivatives: bool = False) -> MellinSamples:
    """A_phi(u) = int_0^inf s^{-iu} [phi(s) - phi(0) e^{-s}] ds/s.

    When ``alpha`` is given the precondition N(phi) < inf is enforced.
    """
    if alpha is not None:
        from .norms import smoothness_norms

        rep = smoothness_norms(phi, alpha)
        if not math.isfinite(rep.n_value):
            raise ValueError(f"{phi.name}: N(phi) is infinite ({'; '.join(rep.diagnostics)})")
    c0 = phi.value_at_zero

    def g(s):
        return phi.shifted(s) - c0 * np.expm1(-s)

    support = None
    if phi.support_bound is not None and c0 == 0:
        support = phi.support_bound
    return _samples_from(g, f"A[{phi.name}]", sgrid, ugrid, support, derivatives)


# ---------------------------------------------------------------------------
# inversion


def inverse_sums(M: MellinSamples, y: np.ndarray, which: str = "values",
                 weight: Optional[np.ndarray] = None) -> np.ndarray:
    """(1/2pi) int M(u) e^{iuy} du by the trapezoid rule, for each y."""
    vals = M.array(which)
    if weight is not None:
        vals = vals * weight
    w = trapezoid_weights(M.u.size, M.du)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    # u_k = u_0 + k du; split k = b * block + r so that e^{i u_k y} is the
    # product of one within-block and one per-block phase
    c = w * vals
    block = 512
    nb = -(-c.size // block)
    C = np.zeros(nb * block, dtype=complex)
    C[:c.size] = c
    C = C.reshape(nb, block)
    out = np.empty(y.size, dtype=complex)
    step = max(1, int(2**22 // (block + nb)))
    for i in range(0, y.size, step):
        yy = y[i:i + step]
        Z = np.exp(1j * np.outer(np.arange(block) * M.du, yy))           # block x ny
        P = np.exp(1j * np.outer(np.arange(nb) * (block * M.du), yy))    # nb x ny
        out[i:i + step] = np.exp(1j * M.u[0] * yy) * np.sum(P * (C @ Z), axis=0)
    return out / (2 * math.pi)


@dataclass
class InverseResult:
    s: np.ndarray
    values: np.ndarray
    imag_residual: float
    tail_estimate: float
    u_max: float


def mellin_inverse(M: MellinSamples, s, rel_tol: float = 1e-3,
                   check_tail: bool = True, real_source: bool = True) -> InverseResult:
    """m(s) = (1/2pi) int M(u) s^{iu} du at the given points.

    The tail beyond u_max is estimated by the change between the full grid
    and its restriction to |u| <= u_max/2.
    """
    if isinstance(s, LogGrid):
        s = s.nodes
    s = np.asarray(s, dtype=float)
    y = np.log(s)
    full = inverse_sums(M, y)
    half = inverse_sums(M.restricted(M.u_max / 2), y)
    tail = float(np.max(np.abs(full - half))) if full.size else 0.0
    scale = float(np.max(np.abs(full))) if full.size else 0.0
    if check_tail and tail > rel_tol * max(scale, np.finfo(float).tiny):
        ratio = tail / (rel_tol * max(scale, np.finfo(float).tiny))
        need = M.u_max * 2.0 ** math.ceil(math.log2(max(ratio, 2.0)))
        raise TruncationError(
            f"u_max={M.u_max:g} too small: tail {tail:.3g} vs tolerance "
            f"{rel_tol * scale:.3g}; try u_max ~ {need:g}", required_u_max=need)
    imag = float(np.max(np.abs(full.imag))) if real_source and full.size else 0.0
    values = full.real if real_source else full
    return InverseResult(s=s, values=values, imag_residual=imag, tail_estimate=tail,
                         u_max=M.u_max)


# ---------------------------------------------------------------------------
# Plancherel


def log_integral(func, sgrid: LogGrid, h: Optional[float] = None,
                 support: Optional[float] = None) -> float:
    """int func(s) ds/s over the s-grid range by trapezoid in log s."""
    if h is None:
        h = 2.0 ** math.floor(math.log2(math.log(10.0) / max(sgrid.points_per_decade, 1024)))
    x = _x_nodes(sgrid, h, support)
    F = func(np.exp(x))
    return float(np.sum(trapezoid_weights(x.size, h) * F))


def plancherel_residual(m: MultiplierSpec, sgrid: LogGrid = DEFAULT_SGRID,
                        ugrid: UGrid = DEFAULT_UGRID,
                        samples: Optional[MellinSamples] = None) -> dict:
    """Both sides of int |m|^2 ds/s = (1/2pi) int |M(m)|^2 du.

    Without ``samples`` the u-range grows by factors of 4 from 32 up to
    ``ugrid.u_max``, stopping once |u| > U/2 carries less than 1e-15 of
    the u-side.
    """

    def u_side(M):
        w = trapezoid_weights(M.u.size, M.du)
        dens = w * np.abs(M.values) ** 2
        outer = float(np.sum(dens[np.abs(M.u) > M.u_max / 2]))
        return float(np.sum(dens)) / (2 * math.pi), outer / (2 * math.pi)

    if samples is None:
        U = min(32.0, ugrid.u_max)
        while True:
            samples = mellin_transform(m, sgrid, UGrid(U, ugrid.du))
            rhs, outer = u_side(samples)
            if U >= ugrid.u_max or outer <= 1e-15 * rhs:
                break
            U = min(4 * U, ugrid.u_max)
    else:
        rhs, outer = u_side(samples)
    lhs = log_integral(lambda s: np.abs(m.eval(s)) ** 2, sgrid, support=m.support_bound)
    residual = abs(lhs - rhs) / max(lhs, 1e-300) if lhs > 0 else abs(rhs)
    return {"lhs": lhs, "rhs": rhs, "residual": residual, "u_max": samples.u_max,
            "outer_half": outer}


# ---------------------------------------------------------------------------
# integration-by-parts representation


def ibp_mellin(m: MultiplierSpec, u: float, n: int, subtract_heat: bool = False,
               limit: int = 2000) -> complex:
    """M(m)(u) after n integrations by parts.

    (-1)^n / prod_{k<n} (-iu + k) * int_0^inf s^{-iu + n - 1} g^(n)(s) ds,
    with g = m, or g = m - m(0) e^{-s} when ``subtract_heat``.  The integral
    is evaluated with QUADPACK's Fourier-weighted rule in x = log s.
    """
    from scipy.integrate import quad

    c0 = m.value_at_zero if subtract_heat else 0.0

    def gn(s):
        s = np.atleast_1d(s)
        return m.derivative(n, s) - c0 * (-1.0) ** n * np.exp(-s)

    def f(x):
        s = math.exp(x)
        return float(np.real(gn(np.array([s]))[0])) * math.exp(n * x)

    hi = math.log(m.support_bound) if (m.support_bound and c0 == 0) else math.log(60.0)
    lo = -40.0
    re = quad(f, lo, hi, weight="cos", wvar=u, limit=limit)[0]
    im = -quad(f, lo, hi, weight="sin", wvar=u, limit=limit)[0]
    denom = 1.0 + 0j
    for k in range(n):
        denom *= -1j * u + k
    return (-1) ** n * complex(re, im) / denom


# ---------------------------------------------------------------------------
# decay


def _loglog_slope(u: np.ndarray, a: np.ndarray, floor: float, lo: float,
                  per_decade: int = 64) -> tuple[float, list]:
    sel = u >= lo
    us, av = u[sel], a[sel]
    targets = np.logspace(math.log10(lo), math.log10(us[-1]),
                          int(per_decade * math.log10(us[-1] / lo)) + 1)
    idx = np.unique(np.clip(np.searchsorted(us, targets), 0, us.size - 1))
    uu, aa = us[idx], av[idx]
    good = aa > floor
    # only the initial run above the floor is trusted
    if not good.all():
        first_bad = int(np.argmin(good))
        good[first_bad:] = False
    if good.sum() < 8:
        return -math.inf, [float(lo), float(uu[max(good.sum() - 1, 0)])]
    slope = np.polyfit(np.log(uu[good]), np.log(aa[good]), 1)[0]
    return float(slope), [float(uu[good][0]), float(uu[good][-1])]


def decay_report(samples: MellinSamples, order: int, norm_bound: float,
                 which: str = "values", fit_from: float = 10.0,
                 slope_slack: float = 0.25, name: Optional[str] = None) -> VerificationReport:
    """Check |M(u)| <~ (1+|u|)^-order on the grid.

    Records sup g with g(u) = |M(u)| (1+|u|)^order, the constant
    K = sup g / norm_bound, and the log-log least-squares slope of |M| over
    [fit_from, u_max] (points below the round-off floor are excluded).
    """
    arr = samples.array(which)
    if samples.u_max < 100 * fit_from:
        raise ValueError(f"u-grid reaches {samples.u_max:g}; the slope fit needs two "
                         f"decades above {fit_from:g}")
    mag = np.abs(arr)
    g = mag * (1 + np.abs(samples.u)) ** order
    sup_g = float(np.max(g))
    pos = samples.u > 0
    # the two half-lines are fitted separately; the worse slope is kept
    floor = samples.noise_floor.get(which, 0.0)
    s_pos, r_pos = _loglog_slope(samples.u[pos], mag[pos], floor, fit_from)
    neg = samples.u < 0
    s_neg, _ = _loglog_slope(-samples.u[neg][::-1], mag[neg][::-1], floor, fit_from)
    if sup_g == 0.0:
        slope, K, ok = 0.0, 0.0, True
    else:
        slope = max(s_pos, s_neg)
        K = sup_g / norm_bound if norm_bound > 0 else math.inf
        ok = bool(slope <= -order + slope_slack and math.isfinite(K))
    stats = {"sup_g": sup_g, "slope": slope, "K": K}
    return VerificationReport(
        check_name=name or f"decay[{samples.source}:{which}]",
        inputs={"source": samples.source, "which": which, "order": order,
                "norm_bound": norm_bound, "fit_from": fit_from},
        statistics=stats,
        tolerance={"slope_max": -order + slope_slack},
        passed=ok,
        grid_meta={**samples.grid_meta, "fit_range": r_pos, "noise_floor": floor},
    )


def decay_json(report: VerificationReport) -> dict:
    """The flat decay record: sup_g, slope, order, K, pass."""
    return {"sup_g": report.statistics["sup_g"], "slope": report.statistics["slope"],
            "order": report.inputs["order"], "K": report.statistics["K"],
            "pass": report.passed}
