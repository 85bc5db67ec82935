"""Mihlin-Hormander norms and the integral smoothness quantities N, N~."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import LogGrid, integrate_log_tail
from .multipliers import MultiplierSpec

DEFAULT_MH_GRID = LogGrid(1e-6, 1e6, 64)


@dataclass
class NormReport:
    alpha: int
    mh_norms: list
    mh_alpha: float
    c_values: dict = field(default_factory=dict)   # beta -> C(eta, beta)
    d_value: Optional[float] = None
    c_unit_interval: Optional[float] = None        # ||eta||_{C^{alpha+2}([0,1])}
    n_value: Optional[float] = None
    n_tilde: Optional[float] = None
    grid_meta: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        out = {f"mh_{b}": v for b, v in enumerate(self.mh_norms)}
        out["mh_alpha_max"] = self.mh_alpha
        if self.c_values:
            top = self.alpha + 2
            out["C_0"] = self.c_values[0]
            out["C_1"] = self.c_values[1]
            out["C_top"] = self.c_values[top]
            out["D_top"] = self.d_value
            out["N"] = self.n_value
            out["N_tilde"] = self.n_tilde
        return out


def _check_order(m: MultiplierSpec, needed: int):
    if m.max_order < needed:
        raise ValueError(f"{m.name}: derivatives up to order {needed} needed, "
                         f"max_order is {m.max_order}")


def mh_norm(m: MultiplierSpec, alpha: int, grid: LogGrid = DEFAULT_MH_GRID) -> NormReport:
    """||m||_(beta) = sup_lambda |lambda^beta m^(beta)(lambda)| for beta <= alpha.

    The supremum is taken over the nodes of ``grid``; the truncation of
    (0, inf) is recorded in ``grid_meta``.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    _check_order(m, alpha)
    lam = grid.nodes
    if lam.size == 0:
        raise ValueError("empty grid")
    norms = [float(np.max(np.abs(lam**b * m.derivative(b, lam)))) for b in range(alpha + 1)]
    return NormReport(alpha=alpha, mh_norms=norms, mh_alpha=max(norms),
                      grid_meta={"mh_grid": grid.as_dict(), "truncated_sup": True})


def mh_norm_from_log_derivatives(nderivs: list) -> list:
    """MH seminorms from y-derivatives of n(y) = m(e^y).

    ``nderivs[g]`` holds samples of n^(g); the result lists
    sup |lambda^beta m^(beta)| for beta = 0..len(nderivs)-1.
    """
    from .multipliers import stirling1

    out = []
    for beta in range(len(nderivs)):
        acc = 0
        for g, c in enumerate(stirling1(beta)):
            if c:
                acc = acc + c * nderivs[g]
        out.append(float(np.max(np.abs(acc))))
    return out


def unit_interval_norm(eta: MultiplierSpec, order: int, points: int = 4097) -> float:
    """||eta||_{C^order([0,1])} as a dense-grid sup, one-sided at the ends."""
    s = np.linspace(0.0, 1.0, points)
    return max(float(np.max(np.abs(eta.derivative(b, s)))) for b in range(order + 1))


def _tail_integral(eta: MultiplierSpec, beta: int, log_weight: bool, rel_tol: float):
    if eta.support_bound is not None and eta.support_bound <= 1.0:
        return 0.0, {"converged": True, "x_upper": 0.0, "support": True}

    def integrand(x):
        s = np.exp(x)
        # |eta^(beta)(s)| s^(beta-1) ds = |eta^(beta)(s)| s^beta dx
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.abs(eta.derivative(beta, s)) * np.exp(beta * x)
        v = np.where(np.isfinite(v), v, 0.0)
        return v * x**2 if log_weight else v

    breaks = []
    if eta.support_bound is not None:
        breaks.append(math.log(eta.support_bound))
    breaks += [math.log(k) for k in eta.kinks if k > 1]
    return integrate_log_tail(integrand, rel_tol=rel_tol, breakpoints=breaks)


def smoothness_norms(eta: MultiplierSpec, alpha: int, *, rel_tol: float = 1e-10,
                     mh_grid: LogGrid = DEFAULT_MH_GRID,
                     unit_points: int = 4097) -> NormReport:
    """All norms: MH seminorms, C(eta, beta) for beta in {0, 1, alpha+2},
    D(eta, alpha+2), N(eta) and N~(eta).

    A divergent tail yields ``inf`` with a diagnostic instead of raising.
    """
    top = alpha + 2
    _check_order(eta, top)
    rep = mh_norm(eta, alpha, mh_grid)
    diags = []
    cvals = {}
    for b in sorted({0, 1, top}):
        val, info = _tail_integral(eta, b, False, rel_tol)
        cvals[b] = val
        if not info.get("converged", True):
            diags.append(f"C(eta,{b}) diverges: {info.get('diagnostic')}")
    d_val, info = _tail_integral(eta, top, True, rel_tol)
    if not info.get("converged", True):
        diags.append(f"D(eta,{top}) diverges: {info.get('diagnostic')}")
    cu = unit_interval_norm(eta, top, unit_points)
    n_val = cu + max(cvals.values())
    rep.c_values = cvals
    rep.d_value = d_val
    rep.c_unit_interval = cu
    rep.n_value = n_val
    rep.n_tilde = n_val + d_val
    rep.grid_meta.update({"unit_interval_points": unit_points, "tail_rel_tol": rel_tol})
    rep.diagnostics = diags
    return rep
