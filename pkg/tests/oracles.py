"""Independent reference computations used by the tests.

Nothing here calls into the package's quadrature engines.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, sweeps: int = 100):
    """Cyclic Jacobi rotations for a real symmetric matrix."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(sweeps):
        off = math.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q], R[q, p] = s, -s
                A = R.T @ A @ R
                V = V @ R
    return np.diag(A).copy(), V


def cycle_matrix(n: int) -> np.ndarray:
    L = 2 * np.eye(n) - np.roll(np.eye(n), 1, axis=1) - np.roll(np.eye(n), -1, axis=1)
    return L


def mellin_sheat(u) -> np.ndarray:
    """M(s e^{-s})(u) = Gamma(1 - iu)."""
    return np.exp(special.loggamma(1 - 1j * np.asarray(u, dtype=float)))


def mellin_br_psi(delta: float, u) -> np.ndarray:
    """M(s (1-s)^delta 1{s<1})(u) = B(1 - iu, delta + 1)."""
    z = 1 - 1j * np.asarray(u, dtype=float)
    return np.exp(special.loggamma(z) + special.loggamma(delta + 1) - special.loggamma(z + delta + 1))


def quad_log(func, a: float, b: float, **kw) -> float:
    """int_a^b func(s) ds/s with QUADPACK, in the variable x = log s.

    Breakpoints in ``points`` are given in s.
    """
    if kw.get("points") is not None:
        kw["points"] = [math.log(p) for p in kw["points"] if a < p < b]
    return integrate.quad(lambda x: func(math.exp(x)), math.log(a), math.log(b),
                          limit=500, **kw)[0]


def quad_complex(func, a: float, b: float, **kw) -> complex:
    re = integrate.quad(lambda x: func(x).real, a, b, limit=500, **kw)[0]
    im = integrate.quad(lambda x: func(x).imag, a, b, limit=500, **kw)[0]
    return complex(re, im)


def tau(x: float) -> float:
    """The C-infinity step, evaluated directly from its definition."""
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    a, b = math.exp(-1 / x), math.exp(-1 / (1 - x))
    return a / (a + b)


def central_difference(f, x, h, order=1):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    return (f(x + h) - 2 * f(x) + f(x - h)) / h**2
