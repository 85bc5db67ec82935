"""Finite self-adjoint model operators and their functional calculus.

A model is a positive spectrum with an eigenbasis orthonormal for the
weighted inner product <f, g> = sum_x w_x f(x) conj(g(x)).  Signals are
plain arrays indexed by the point set X; a 2-D array holds one signal per
column.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .multipliers import MultiplierSpec

Symbol = Union[MultiplierSpec, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SpectralModel:
    eigenvalues: np.ndarray          # (dim,)
    basis: np.ndarray                # (npoints, dim), columns are eigenvectors
    weights: np.ndarray              # (npoints,)
    name: str = "model"

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        B = np.asarray(self.basis, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if np.any(lam <= 0):
            raise ValueError("eigenvalues must be strictly positive (kernel projected out)")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if B.shape != (w.size, lam.size):
            raise ValueError(f"basis shape {B.shape} does not match "
                             f"({w.size} points, {lam.size} eigenvalues)")
        gram = B.T @ (w[:, None] * B)
        if not np.allclose(gram, np.eye(lam.size), atol=1e-12, rtol=0):
            raise ValueError("eigenvectors are not orthonormal in the weighted inner product")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def npoints(self) -> int:
        return self.weights.size

    def _check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[0] != self.npoints:
            raise ValueError(f"signal has {f.shape[0]} points, model {self.name} has {self.npoints}")
        return f

    def coefficients(self, f) -> np.ndarray:
        """<f, e_i> for every eigenvector."""
        f = self._check(f)
        wf = f * (self.weights if f.ndim == 1 else self.weights[:, None])
        return self.basis.T @ wf

    def synthesize(self, c) -> np.ndarray:
        return self.basis @ c

    def project(self, f) -> np.ndarray:
        """Orthogonal projection onto the span of the eigenvectors."""
        return self.synthesize(self.coefficients(f))

    def scaled(self, c: float) -> "SpectralModel":
        """The model of c L."""
        return SpectralModel(c * self.eigenvalues, self.basis, self.weights, f"{c:g}*{self.name}")

    def to_json_dict(self) -> dict:
        return {"dim": self.dim, "eigenvalues": self.eigenvalues.tolist(),
                "weights": self.weights.tolist(), "basis": self.basis.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict, name: str = "model") -> "SpectralModel":
        lam = np.asarray(d["eigenvalues"], dtype=float)
        w = np.asarray(d.get("weights", np.ones(lam.size)), dtype=float)
        if "basis" in d:
            B = np.asarray(d["basis"], dtype=float)
        else:
            B = np.diag(1.0 / np.sqrt(w))
        model = cls(lam, B, w, name)
        if "dim" in d and int(d["dim"]) != model.dim:
            raise ValueError(f"dim {d['dim']} does not match {model.dim} eigenvalues")
        return model


def build_cycle_laplacian(n: int) -> SpectralModel:
    """Graph Laplacian of the n-cycle with the constant mode removed.

    Eigenpairs come from the real Fourier basis: eigenvalue 2 - 2cos(2 pi k/n)
    with cos and sin modes for 0 < k < n/2, and the alternating mode when n
    is even.
    """
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    x = np.arange(n)
    vals, vecs = [], []
    for k in range(1, (n - 1) // 2 + 1):
        lam = 2.0 - 2.0 * math.cos(2 * math.pi * k / n)
        vals += [lam, lam]
        vecs.append(math.sqrt(2.0 / n) * np.cos(2 * math.pi * k * x / n))
        vecs.append(math.sqrt(2.0 / n) * np.sin(2 * math.pi * k * x / n))
    if n % 2 == 0:
        vals.append(4.0)
        vecs.append((-1.0) ** x / math.sqrt(n))
    return SpectralModel(np.array(vals), np.stack(vecs, axis=1), np.ones(n), f"cycle:{n}")


def build_diagonal(lambdas, weights=None) -> SpectralModel:
    lam = np.asarray(lambdas, dtype=float)
    w = np.ones(lam.size) if weights is None else np.asarray(weights, dtype=float)
    if lam.size != w.size:
        raise ValueError("lambdas and weights differ in length")
    if np.any(lam <= 0) or np.any(w <= 0):
        raise ValueError("lambdas and weights must be positive")
    return SpectralModel(lam, np.diag(1.0 / np.sqrt(w)), w, f"diagonal:{lam.size}")


def cycle_laplacian_matrix(n: int) -> np.ndarray:
    """Dense n x n Laplacian of the cycle (constant mode included)."""
    L = 2.0 * np.eye(n)
    for i in range(n):
        L[i, (i + 1) % n] -= 1.0
        L[i, (i - 1) % n] -= 1.0
    return L


def symbol_values(model: SpectralModel, m: Symbol, t: float = 1.0) -> np.ndarray:
    return np.asarray(m(t * model.eigenvalues))


def spectral_apply(model: SpectralModel, m: Symbol, f, t: float = 1.0) -> np.ndarray:
    """m(tL) f = sum_i m(t lambda_i) <f, e_i> e_i."""
    c = model.coefficients(f)
    mv = symbol_values(model, m, t)
    return model.synthesize(mv[:, None] * c if c.ndim == 2 else mv * c)


def imaginary_power(model: SpectralModel, u: float, f) -> np.ndarray:
    """L^{iu} f."""
    phase = np.exp(1j * u * np.log(model.eigenvalues))
    c = model.coefficients(f)
    return model.synthesize(phase[:, None] * c if c.ndim == 2 else phase * c)


def heat(model: SpectralModel, t: float, f) -> np.ndarray:
    return spectral_apply(model, lambda s: np.exp(-s), f, t)


def lp_norm(f, p: float, weights=None) -> np.ndarray:
    """(sum_x w_x |f(x)|^p)^(1/p), column-wise for 2-D input."""
    if not 1.0 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    a = np.abs(np.asarray(f))
    if weights is None:
        weights = np.ones(a.shape[0])
    w = weights if a.ndim == 1 else weights[:, None]
    return np.sum(w * a**p, axis=0) ** (1.0 / p)


def random_signals(model: SpectralModel, count: int, rng: np.random.Generator,
                   complex_valued: bool = False) -> np.ndarray:
    """Gaussian signals projected onto the eigenvector span, one per column."""
    f = rng.standard_normal((model.npoints, count))
    if complex_valued:
        f = f + 1j * rng.standard_normal((model.npoints, count))
    return model.project(f)


def _dual(y: np.ndarray, p: float, w: np.ndarray) -> np.ndarray:
    # norming functional of y in L^p(w): <y, g>_w = ||y||_p, ||g||_{p'} = 1
    a = np.abs(y)
    n = lp_norm(y, p, w)
    if n == 0:
        return np.zeros_like(y)
    return (a / n) ** (p - 1) * np.exp(1j * np.angle(y))


def operator_norm_estimate(model: SpectralModel, symbol_vals: np.ndarray, p: float,
                           rng: np.random.Generator, n_samples: int = 200,
                           iterations: int = 20) -> dict:
    """Lower estimate of ||m(L)||_{p->p} on the eigenvector span.

    Random probes (plus every eigenvector) are scored directly; the best
    probe is then refined by Boyd's power iteration, which uses the
    adjoint conj(m)(L) and the duality maps of L^p and L^p'.
    """
    w = model.weights
    q = p / (p - 1)

    def T(f):
        return model.synthesize(symbol_vals * model.coefficients(f))

    def Tstar(g):
        return model.synthesize(np.conj(symbol_vals) * model.coefficients(g))

    probes = random_signals(model, n_samples, rng, complex_valued=True)
    probes = np.concatenate([model.basis.astype(complex), probes], axis=1)
    Tp = model.synthesize(symbol_vals[:, None] * model.coefficients(probes))
    ratios = lp_norm(Tp, p, w) / lp_norm(probes, p, w)
    best = int(np.argmax(ratios))
    sampled = float(ratios[best])
    x = probes[:, best] / lp_norm(probes[:, best], p, w)
    est = sampled
    for _ in range(iterations):
        z = Tstar(_dual(T(x), p, w))
        x_new = model.project(_dual(z, q, w))
        nx = lp_norm(x_new, p, w)
        if nx == 0:
            break
        x = x_new / nx
        est = max(est, float(lp_norm(T(x), p, w)))
    return {"estimate": est, "sampled": sampled, "n_samples": n_samples}


def contraction_violation(model: SpectralModel, ts, p: float, f) -> float:
    """max over t of ||e^{-tL} f||_p - ||f||_p (should be <= 0)."""
    base = lp_norm(f, p, model.weights)
    worst = -np.inf
    for t in ts:
        worst = max(worst, float(np.max(lp_norm(heat(model, t, f), p, model.weights) - base)))
    return worst


def signal_to_csv(f) -> str:
    """One row ``index,re,im`` per point."""
    f = np.asarray(f, dtype=complex).ravel()
    rows = ["index,re,im"]
    rows += [f"{i},{v.real!r},{v.imag!r}" for i, v in enumerate(f.tolist())]
    return "\n".join(rows) + "\n"


def signal_from_csv(text: str) -> np.ndarray:
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError("signal CSV needs the columns index,re,im")
    order = np.argsort(data[:, 0])
    if not np.array_equal(data[order, 0], np.arange(data.shape[0])):
        raise ValueError("signal indices must be 0..n-1")
    return data[order, 1] + 1j * data[order, 2]


def load_model(spec: str) -> SpectralModel:
    """``cycle:n`` or ``diagonal:path/to/model.json``."""
    kind, _, arg = spec.partition(":")
    if kind == "cycle":
        return build_cycle_laplacian(int(arg))
    if kind == "diagonal":
        with open(arg) as fh:
            return SpectralModel.from_json_dict(json.load(fh), name=spec)
    raise ValueError(f"unknown model {spec!r}; use cycle:n or diagonal:file")
