"""Frequency-block decomposition of a Mellin symbol.

The symbol M(u) is cut into pieces h_k(u) M(u) by a smooth partition of
unity with pi-spaced translates.  Each piece, supported in an interval of
length 2 pi, is expanded in a Fourier series, which gives the block
coefficients

    b_{j,k}(lambda) = int h_k(u) M(u) e^{-iju} lambda^{iu} du,

and their log-variable form C_{j,k}(y) = b_{j,k}(e^y).  Everything here is
a function of z = y - j through the block kernel

    G_beta(z) = i^beta int h_k(u) M(u) u^beta e^{izu} du = d^beta/dz^beta G_0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grids import trapezoid_weights
from .mellin import MellinSamples
from .multipliers import transition_derivatives
from .norms import mh_norm_from_log_derivatives
from .reports import VerificationReport

Y_STEP = 1.0 / 64.0
Y_RANGE = (-20.0, 20.0)
J_MAX = 64


@dataclass(frozen=True)
class PartitionSpec:
    """h(u) = tau((u+pi)/pi) on [-pi, 0], 1 - tau(u/pi) on [0, pi], 0 outside."""

    shift: float = math.pi

    def h(self, u, order: int = 0) -> np.ndarray:
        if order > 2:
            raise ValueError("partition derivatives are provided up to order 2")
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        left = (u >= -self.shift) & (u <= 0)
        right = (u > 0) & (u <= self.shift)
        tl = transition_derivatives((u[left] + self.shift) / self.shift, order)[order]
        tr = transition_derivatives(u[right] / self.shift, order)[order]
        scale = self.shift ** -order
        out[left] = tl * scale
        out[right] = (1.0 - tr if order == 0 else -tr) * scale
        return out

    def h_k(self, u, k: int, order: int = 0) -> np.ndarray:
        return self.h(np.asarray(u, dtype=float) - self.shift * k, order)

    def support(self, k: int) -> tuple[float, float]:
        return (self.shift * (k - 1), self.shift * (k + 1))

    def active(self, u: float) -> list[int]:
        """Indices k with h_k(u) possibly nonzero (at most two)."""
        k0 = math.floor(u / self.shift)
        return [k0, k0 + 1]


def build_partition() -> PartitionSpec:
    return PartitionSpec()


class BlockKernel:
    """Quadrature of G_beta(z) for one block k on the u-grid of M."""

    def __init__(self, M: MellinSamples, part: PartitionSpec, k: int):
        lo, hi = part.support(k)
        if hi > M.u_max + 1e-12 or lo < -M.u_max - 1e-12:
            raise ValueError(f"block k={k} needs |u| up to {max(abs(lo), abs(hi)):.4g}, "
                             f"u-grid reaches {M.u_max:g}")
        self.M, self.part, self.k = M, part, k
        sel = (M.u >= lo) & (M.u <= hi)
        self.idx = np.flatnonzero(sel)
        self.u = M.u[sel]
        # the block integrand vanishes with all derivatives at both ends
        self.w = np.full(self.u.size, M.du)
        self.h = part.h_k(self.u, k)
        self.hM = self.h * M.values[sel]

    def _sum(self, g: np.ndarray, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.empty(z.size, dtype=complex)
        step = max(1, int(2**22 // max(self.u.size, 1)))
        wg = self.w * g
        for i in range(0, z.size, step):
            out[i:i + step] = np.exp(1j * np.outer(z[i:i + step], self.u)) @ wg
        return out

    def G(self, z, beta: int = 0) -> np.ndarray:
        """i^beta int h_k M u^beta e^{izu} du."""
        return (1j) ** beta * self._sum(self.hM * self.u**beta, z)

    def G_ibp(self, z, beta: int = 0) -> np.ndarray:
        """G_beta(z) after two integrations by parts:
        -(i^beta / z^2) int (h_k M u^beta)'' e^{izu} du."""
        sel = self.idx
        M0 = self.M.values[sel]
        M1, M2 = self.M.array("d1")[sel], self.M.array("d2")[sel]
        h0, h1, h2 = (self.part.h_k(self.u, self.k, r) for r in range(3))
        p0 = self.u**beta
        p1 = beta * self.u ** (beta - 1) if beta >= 1 else np.zeros_like(self.u)
        p2 = beta * (beta - 1) * self.u ** (beta - 2) if beta >= 2 else np.zeros_like(self.u)
        g2 = (h2 * M0 * p0 + h0 * M2 * p0 + h0 * M0 * p2
              + 2 * (h1 * M1 * p0 + h1 * M0 * p1 + h0 * M1 * p1))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return -(1j) ** beta * self._sum(g2, z) / z**2


@dataclass
class BlockCoefficients:
    k: int
    j_values: np.ndarray
    lambdas: np.ndarray
    values: np.ndarray                       # b_{j,k}(lambda), shape (nj, nlambda)
    derivatives: dict = field(default_factory=dict)   # beta -> d^beta C_{j,k}(log lambda)

    def to_csv_columns(self) -> dict:
        J, L = np.meshgrid(self.j_values, self.lambdas, indexing="ij")
        return {"k": np.full(J.size, self.k), "j": J.ravel(), "lambda": L.ravel(),
                "re": self.values.real.ravel(), "im": self.values.imag.ravel()}


def block_coefficients(M: MellinSamples, part: PartitionSpec, k: int, j_values,
                       lambdas, alpha: int = 0) -> BlockCoefficients:
    """b_{j,k} on a lambda grid for several j, with y-derivatives up to alpha."""
    ker = BlockKernel(M, part, k)
    j_values = np.atleast_1d(np.asarray(j_values, dtype=int))
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lambdas <= 0):
        raise ValueError("lambda must be positive")
    y = np.log(lambdas)
    Z = y[None, :] - j_values[:, None]
    derivs = {b: ker.G(Z.ravel(), b).reshape(Z.shape) for b in range(alpha + 1)}
    return BlockCoefficients(k, j_values, lambdas, derivs[0], derivs)


def b_jk(M: MellinSamples, part: PartitionSpec, j: int, k: int, lambdas) -> BlockCoefficients:
    """One (j, k) slice of the block coefficients."""
    return block_coefficients(M, part, k, [j], lambdas)


def cjk_derivative(M: MellinSamples, part: PartitionSpec, j: int, k: int, beta: int, y,
                   alpha: int) -> np.ndarray:
    """d^beta/dy^beta C_{j,k}(y) = i^beta int h_k M u^beta e^{i(y-j)u} du."""
    if beta > alpha:
        raise ValueError(f"beta={beta} exceeds alpha={alpha}")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return BlockKernel(M, part, k).G(np.asarray(y, dtype=float) - j, beta)


def cjk_derivative_ibp(M: MellinSamples, part: PartitionSpec, j: int, k: int, beta: int,
                       y) -> np.ndarray:
    """The same derivative from the twice integrated-by-parts integrand."""
    return BlockKernel(M, part, k).G_ibp(np.asarray(y, dtype=float) - j, beta)


def _z_lattice(y_range=Y_RANGE, j_max: int = J_MAX, step: float = Y_STEP) -> np.ndarray:
    lo, hi = y_range[0] - j_max, y_range[1] + j_max
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def cjk_bounds_report(M: MellinSamples, part: PartitionSpec, k_range, j_range, alpha: int,
                      y_range=Y_RANGE, y_step: float = Y_STEP,
                      M_check: Optional[MellinSamples] = None,
                      growth_factor: float = 10.0) -> VerificationReport:
    """Block size and tail constants.

    (a) q_a(k) = (1+k^2) max_{beta<=alpha} sup |d^beta C_{j,k}(y)|
    (b) q_b(k) = (1+k^2) max_{beta<=alpha} sup_{|y-j|>1} |d^beta C_{j,k}(y)| (y-j)^2
    with y over the y-grid and j over j_range.  Pass: every constant is
    finite and max_k q_a(k) <= growth_factor * max_{|k|<=1} q_a(k).
    With ``M_check`` (a second u-resolution) the relative change of both
    constants must stay below 10%.
    """
    ks = np.arange(k_range[0], k_range[1] + 1)
    jj = np.arange(j_range[0], j_range[1] + 1)
    y = y_range[0] + y_step * np.arange(int(round((y_range[1] - y_range[0]) / y_step)) + 1)
    z = np.unique(np.round((y[:, None] - jj[None, :]).ravel() / y_step)) * y_step

    def constants(samples):
        qa, qb = [], []
        for k in ks:
            ker = BlockKernel(samples, part, int(k))
            a = b = 0.0
            far = np.abs(z) > 1
            for beta in range(alpha + 1):
                g = np.abs(ker.G(z, beta))
                a = max(a, float(np.max(g)))
                if far.any():
                    b = max(b, float(np.max(g[far] * z[far] ** 2)))
            qa.append(a * (1 + k * k))
            qb.append(b * (1 + k * k))
        return np.array(qa), np.array(qb)

    qa, qb = constants(M)
    central = qa[np.abs(ks) <= 1]
    ref = float(np.max(central)) if central.size else float(np.max(qa))
    ca, cb = float(np.max(qa)), float(np.max(qb))
    growth = ca / ref if ref > 0 else 0.0
    stats = {"C_a": ca, "C_b": cb, "growth": growth}
    ok = bool(np.all(np.isfinite(qa)) and np.all(np.isfinite(qb))
              and (ref == 0 or growth <= growth_factor))
    tol = {"growth_max": growth_factor}
    if M_check is not None:
        qa2, qb2 = constants(M_check)
        change = max(_rel(ca, float(np.max(qa2))), _rel(cb, float(np.max(qb2))))
        stats["resolution_change"] = change
        tol["resolution_change_max"] = 0.1
        ok = ok and change < 0.1
    return VerificationReport(
        check_name="cjk_bounds",
        inputs={"source": M.source, "k_range": list(k_range), "j_range": list(j_range),
                "alpha": alpha},
        statistics=stats, tolerance=tol, passed=ok,
        grid_meta={"ugrid": M.grid_meta.get("ugrid"), "y_range": list(y_range),
                   "y_step": y_step},
        table={"k": ks, "q_a": qa, "q_b": qb},
    )


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def parseval_block_check(M: MellinSamples, part: PartitionSpec, k: int, lam: float,
                         j_range=(-J_MAX, J_MAX), tol: float = 1e-4) -> VerificationReport:
    """int |h_k M lambda^{iu}|^2 du against normalised sums of |b_{j,k}(lambda)|^2.

    Both the (2 pi)^{-1/2} and the (2 pi)^{-1} normalisation are reported;
    the Fourier-series Parseval identity on an interval of length 2 pi
    fixes the latter, which decides pass/fail.  The j-truncation tail is
    bounded with the (y-j)^{-2} decay of C_{j,k}.
    """
    ker = BlockKernel(M, part, k)
    lhs = float(np.sum(ker.w * np.abs(ker.hM) ** 2))
    jj = np.arange(j_range[0], j_range[1] + 1)
    y = math.log(lam)
    b = ker.G(y - jj)
    total = float(np.sum(np.abs(b) ** 2))
    # tail: |b_j| <= K / (y-j)^2 with K measured on the outer quarter of the range
    zz = y - jj
    outer = np.abs(zz) >= 0.75 * np.max(np.abs(zz))
    K = float(np.max(np.abs(b[outer]) * zz[outer] ** 2)) if outer.any() else 0.0
    jt = np.arange(j_range[1] + 1, j_range[1] + 100000)
    tail = K**2 * float(np.sum((jt - y) ** -4.0) + np.sum((jt + y) ** -4.0)) / (2 * math.pi)
    rhs_printed = total / math.sqrt(2 * math.pi)
    rhs = total / (2 * math.pi)

    def resid(r):
        return abs(lhs - r) / lhs if lhs > 0 else abs(r)

    notes = []
    if tail > tol * max(lhs, 1e-300):
        notes.append(f"j-range too narrow: tail estimate {tail:.3g}")
    res = resid(rhs)
    return VerificationReport(
        check_name="parseval_block",
        inputs={"source": M.source, "k": k, "lambda": lam, "j_range": list(j_range)},
        statistics={"lhs": lhs, "rhs": rhs, "rhs_printed": rhs_printed, "residual": res,
                    "residual_printed": resid(rhs_printed), "tail_estimate": tail},
        tolerance={"residual_max": tol},
        passed=bool(res < tol and not notes),
        grid_meta={"ugrid": M.grid_meta.get("ugrid")},
        notes=notes,
    )


@dataclass
class BlockMultiplier:
    lambdas: np.ndarray
    values: np.ndarray
    log_derivatives: list            # n^(beta)(log lambda), beta = 0..alpha


def block_multiplier(M: MellinSamples, part: PartitionSpec, k: int, a: Sequence[float],
                     lambdas, alpha: int = 0, j_start: Optional[int] = None) -> BlockMultiplier:
    """m^a_k(lambda) = sum_j a_j b_{j,k}(lambda).

    ``a`` lists a_j for consecutive j starting at ``j_start`` (default
    centred on 0); entries must satisfy |a_j| <= 1.
    """
    a = np.asarray(a)
    if np.any(np.abs(a) > 1 + 1e-15):
        raise ValueError("coefficients must satisfy |a_j| <= 1")
    if j_start is None:
        j_start = -(a.size // 2)
    jv = j_start + np.arange(a.size)
    bc = block_coefficients(M, part, k, jv, lambdas, alpha)
    derivs = [a @ bc.derivatives[b] for b in range(alpha + 1)]
    return BlockMultiplier(bc.lambdas, derivs[0], derivs)


class _ShiftTable:
    """Samples G_beta(y - j) for a y-grid and integer j from one z-lattice."""

    def __init__(self, ker: BlockKernel, alpha: int, y: np.ndarray, jv: np.ndarray,
                 step: float):
        self.z = _z_lattice((y[0], y[-1]), int(np.max(np.abs(jv))), step)
        self.G = [ker.G(self.z, b) for b in range(alpha + 1)]
        iy = np.round((y - self.z[0]) / step).astype(int)
        shift = np.round(jv / step).astype(int)
        self.index = iy[:, None] - shift[None, :]          # ny x nj

    def matrix(self, beta: int) -> np.ndarray:
        return self.G[beta][self.index]


def claim_decay_check(M: MellinSamples, part: PartitionSpec, alpha: int, k_range,
                      n_rademacher: int, seed: int, j_max: int = J_MAX,
                      y_range=Y_RANGE, y_step: float = Y_STEP,
                      stability_tol: float = 0.10, rho_max: float = 0.5) -> VerificationReport:
    """Quadratic decay in k of sup_a ||sum_j a_j C_{j,k}||_{C^alpha}.

    For each k, Q(k) is the largest C^alpha(R) norm of n(y) = m^a_k(e^y)
    over n_rademacher seeded sign sequences a_j, |j| <= j_max.  Reported:
    sup_k Q(k)(1+k^2), its ratio to the minimum over |k| <= 2, stability
    under doubling the draws, the Spearman correlation of Q(k)(1+k^2) with
    |k|, and the comparability of the C^alpha norm with the MH norm.
    """
    from scipy.stats import spearmanr

    if n_rademacher < 32:
        raise ValueError("n_rademacher must be >= 32")
    ks = np.arange(k_range[0], k_range[1] + 1)
    jv = np.arange(-j_max, j_max + 1)
    ny = int(round((y_range[1] - y_range[0]) / y_step)) + 1
    y = y_range[0] + y_step * np.arange(ny)
    rng = np.random.default_rng(seed)
    A = rng.choice(np.array([-1.0, 1.0]), size=(jv.size, 2 * n_rademacher))

    Q, Q2, mh_ratio, tails = [], [], [], []
    for k in ks:
        ker = BlockKernel(M, part, int(k))
        tab = _ShiftTable(ker, alpha, y, jv, y_step)
        N = [tab.matrix(b) @ A for b in range(alpha + 1)]         # ny x draws
        calpha = np.max([np.max(np.abs(n), axis=0) for n in N], axis=0)
        Q.append(float(np.max(calpha[:n_rademacher])))
        Q2.append(float(np.max(calpha)))
        best = int(np.argmax(calpha))
        mh = max(mh_norm_from_log_derivatives([n[:, best] for n in N]))
        mh_ratio.append(mh / calpha[best] if calpha[best] > 0 else 1.0)
        # error bar for |j| > j_max from |C_{j,k}(y)| <= K (y-j)^-2
        far = np.abs(tab.z) >= 0.5 * j_max
        K = max(float(np.max(np.abs(g[far]) * tab.z[far] ** 2)) for g in tab.G)
        jt = np.arange(j_max + 1, j_max + 100000)
        edge = max(abs(y_range[0]), abs(y_range[1]))
        tails.append(2 * K * float(np.sum((jt - edge) ** -2.0)))

    Q, Q2 = np.array(Q), np.array(Q2)
    w = 1.0 + ks.astype(float) ** 2
    stat, stat2 = Q * w, Q2 * w
    sup, sup2 = float(np.max(stat)), float(np.max(stat2))
    central = stat[np.abs(ks) <= 2]
    ref = float(np.min(central)) if central.size else float(np.min(stat))
    if sup == 0.0:
        ratio, stability, rho = 0.0, 0.0, 0.0
    else:
        ratio = sup / ref if ref > 0 else math.inf
        stability = abs(sup2 - sup) / sup
        rho = float(spearmanr(np.abs(ks), stat).statistic) if np.ptp(stat) > 0 else 0.0
    passed = bool(math.isfinite(sup) and math.isfinite(ratio) and stability < stability_tol
                  and abs(rho) < rho_max)
    return VerificationReport(
        check_name="claim_decay",
        inputs={"source": M.source, "alpha": alpha, "k_range": list(k_range),
                "n_rademacher": n_rademacher, "j_max": j_max, "y_range": list(y_range),
                "y_step": y_step},
        statistics={"sup_Q_times_1pk2": sup, "ratio_to_central": ratio,
                    "stability": stability, "spearman_rho": rho,
                    "mh_over_calpha_min": float(np.min(mh_ratio)),
                    "mh_over_calpha_max": float(np.max(mh_ratio)),
                    "j_tail_error_bar": float(np.max(tails))},
        tolerance={"stability_max": stability_tol, "abs_rho_max": rho_max},
        passed=passed,
        grid_meta={"ugrid": M.grid_meta.get("ugrid")},
        seed=seed,
        table={"k": ks, "Q_k": Q, "Q_k_times_1pk2": stat,
               "n_samples": np.full(ks.size, n_rademacher),
               "Q_k_doubled": Q2},
    )


def b_tail_sums(M: MellinSamples, part: PartitionSpec, k: int, lambdas,
                J_values=(8, 16, 32), j_far: int = 4 * J_MAX) -> dict:
    """T(J) = sum_{|j|>J} sup_lambda |b_{j,k}(lambda)|^2 over the given lambdas."""
    jv = np.arange(-j_far, j_far + 1)
    bc = block_coefficients(M, part, k, jv, lambdas)
    s = np.max(np.abs(bc.values), axis=1) ** 2
    return {J: float(np.sum(s[np.abs(jv) > J])) for J in J_values}
