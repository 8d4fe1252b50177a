"""Quadratic forms, eigenvalue bounds and bound curves for b-scaling.

The lower bound instances use ``x_l`` jobs of size ``b**l``. Their cost ratio
is governed by the quadratic forms ``A`` (pairs in different classes) and
``B`` (all pairs), and the best ratio is the top eigenvalue of the congruent
tridiagonal matrix ``Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.optimize import minimize_scalar

from .killrestart import f_alpha

__all__ = [
    "ConvergenceError",
    "build_AB",
    "cholesky_B",
    "build_Z",
    "z_bands",
    "toeplitz_lambda_max",
    "lambda_max_symmetric",
    "lambda_max_tridiagonal",
    "det_bound",
    "rand_bound",
    "release_bound",
    "parallel_bound",
    "BoundCurve",
    "bound_curves",
    "ell_star",
    "LowerBoundVector",
    "lb_vector",
    "quad_ratio",
    "rand_tk",
    "rand_tk_from_f",
    "rand_tk_prime",
    "rand_tk_prime_from_f",
    "rand_tk_limit",
    "rand_lb_vector",
    "rand_lb_matrices",
    "rand_lb_quadratic",
]


class ConvergenceError(RuntimeError):
    pass


def _check_b(b):
    if not (b > 1 and math.isfinite(b)):
        raise ValueError("b must be a finite number greater than 1")


def _check_L(L):
    if int(L) != L or L < 1:
        raise ValueError("L must be a positive integer")


def build_AB(L: int, b: float) -> tuple[np.ndarray, np.ndarray]:
    """``A = (b**(min(i,j)-1)/2 [i != j])`` and ``B = (b**(min(i,j)-1)/2)``, 1-based."""
    _check_L(L)
    _check_b(b)
    idx = np.arange(1, L + 1)
    B = 0.5 * b ** (np.minimum.outer(idx, idx) - 1.0)
    A = B.copy()
    np.fill_diagonal(A, 0.0)
    return A, B


def cholesky_B(L: int, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Factors with ``B = U.T @ D @ D @ U``; ``U`` is the all-ones upper triangle."""
    _check_L(L)
    _check_b(b)
    U = np.triu(np.ones((L, L)))
    d = np.empty(L)
    d[0] = 1.0
    if L > 1:
        k = np.arange(1, L)
        d[1:] = np.sqrt(b ** k - b ** (k - 1.0))
    return U, np.diag(d / math.sqrt(2))


def z_bands(L: int, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of ``Z``."""
    _check_L(L)
    _check_b(b)
    diag = np.full(L, -2 / (b - 1))
    diag[0] = 0.0
    off = np.full(L - 1, math.sqrt(b) / (b - 1))
    if L > 1:
        off[0] = 1 / math.sqrt(b - 1)
    return diag, off


def build_Z(L: int, b: float) -> np.ndarray:
    """``D^-1 U^-T A U^-1 D^-1``, which is tridiagonal."""
    diag, off = z_bands(L, b)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def toeplitz_lambda_max(alpha: float, beta: float, L: int) -> float:
    """Largest eigenvalue of the ``(L-1) x (L-1)`` tridiagonal Toeplitz matrix."""
    _check_L(L)
    if L == 1:
        raise ValueError("the matrix is empty for L = 1")
    return alpha + 2 * abs(beta) * math.cos(math.pi / L)


def _power(M: np.ndarray, tol: float, max_iter: int) -> float:
    n = M.shape[0]
    # Gershgorin shift makes the spectrum nonnegative
    radius = np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    shift = max(0.0, float(np.max(radius - np.diag(M))))
    S = M + shift * np.eye(n)
    v = np.ones(n)
    v[0] += 1e-3
    v /= np.linalg.norm(v)
    lam = float(v @ S @ v)
    for _ in range(max_iter):
        u = S @ v
        nu = np.linalg.norm(u)
        if nu == 0:
            return -shift
        v = u / nu
        new = float(v @ S @ v)
        if abs(new - lam) <= tol:
            return new - shift
        lam = new
    raise ConvergenceError("power iteration did not converge")


def _lanczos(M: np.ndarray, tol: float, max_iter: int) -> float:
    n = M.shape[0]
    steps = min(n, max_iter)
    q = np.ones(n)
    q[0] += 1e-3
    Q = np.zeros((n, steps))
    Q[:, 0] = q / np.linalg.norm(q)
    alphas, betas = [], []
    for k in range(steps):
        z = M @ Q[:, k]
        alphas.append(float(Q[:, k] @ z))
        # full reorthogonalization, twice for stability
        for _ in range(2):
            z -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ z)
        bn = float(np.linalg.norm(z))
        vals, vecs = eigh_tridiagonal(np.array(alphas), np.array(betas),
                                      select="i", select_range=(k, k))
        # residual norm of the top Ritz pair
        if bn * abs(vecs[-1, 0]) <= tol or bn <= 1e-14 * (1 + abs(vals[0])):
            return float(vals[0])
        if k + 1 < steps:
            betas.append(bn)
            Q[:, k + 1] = z / bn
    raise ConvergenceError("Lanczos did not converge")


def lambda_max_symmetric(matrix: np.ndarray, tol: float = 1e-10, method: str = "lanczos",
                         max_iter: int = 1_000_000) -> float:
    """Largest eigenvalue of a real symmetric matrix by an iterative method.

    ``method="power"`` runs power iteration on the Gershgorin shifted matrix.
    ``method="lanczos"`` (default) runs Lanczos with full reorthogonalization
    from the same start vector. Both raise ``ConvergenceError`` when the
    change of the estimate stays above ``tol`` after ``max_iter`` steps.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(M, M.T, atol=1e-12 * (1 + np.max(np.abs(M)))):
        raise ValueError("matrix must be symmetric")
    if M.shape[0] == 1:
        return float(M[0, 0])
    if method == "power":
        return _power(M, tol, max_iter)
    if method == "lanczos":
        return _lanczos(M, tol, max_iter)
    raise ValueError("unknown method")


def lambda_max_tridiagonal(diag: np.ndarray, off: np.ndarray) -> float:
    n = len(diag)
    return float(eigvalsh_tridiagonal(diag, off, select="i", select_range=(n - 1, n - 1))[0])


def det_bound(b: float) -> float:
    _check_b(b)
    return 1 + 2 * b ** 1.5 / (b - 1)


def rand_bound(b: float) -> float:
    _check_b(b)
    r = math.sqrt(b)
    return (r + 2 * b - 1) / (r * math.log(b))


def release_bound(b: float) -> float:
    _check_b(b)
    return 2 * b ** 4 / (2 * b * b - 3 * b + 1)


def parallel_bound(b: float) -> float:
    _check_b(b)
    return (3 * b * b - b) / (b - 1)


@dataclass(frozen=True)
class BoundCurve:
    kind: str
    evaluate: Callable[[float], float]
    bracket: tuple[float, float]
    minimizer: float
    minimum: float


_CURVES = {
    "det": (det_bound, (1.5, 6.0)),
    "rand": (rand_bound, (2.0, 32.0)),
    "release": (release_bound, (1.01, 4.0)),
    "parallel": (parallel_bound, (1.01, 4.0)),
}


def bound_curves(tol: float = 1e-9) -> dict[str, BoundCurve]:
    """Upper bound curves with their numerically located minima."""
    out = {}
    for kind, (fn, (lo, hi)) in _CURVES.items():
        res = minimize_scalar(fn, bounds=(lo, hi), method="bounded", options={"xatol": tol})
        out[kind] = BoundCurve(kind, fn, (lo, hi), float(res.x), float(res.fun))
    return out


def ell_star(b: float) -> int:
    """First class index kept in the lower bound vector."""
    _check_b(b)
    r = math.sqrt(b)
    return math.ceil((r + 1) / (r - 1))


@dataclass(frozen=True)
class LowerBoundVector:
    x: np.ndarray
    ell_star: int
    clamped: bool


def _sine_vector(L: int, b: float) -> np.ndarray:
    ell = np.arange(1, L + 1)
    r = math.sqrt(b)
    scale = 2 / np.sqrt(L * b ** (ell - 1.0) * (b - 1))
    return scale * (r * np.sin((ell - 1) * math.pi / L) - np.sin(ell * math.pi / L))


def lb_vector(L: int, b: float, truncate: bool = True) -> LowerBoundVector:
    """Class counts (up to scaling) that drive the ratio towards its supremum.

    Coordinates below ``ell_star`` are set to zero; negative kept coordinates
    are clamped to zero and flagged.
    """
    _check_L(L)
    _check_b(b)
    ls = ell_star(b)
    x = _sine_vector(L, b)
    if not truncate:
        return LowerBoundVector(x, ls, False)
    if L <= ls:
        raise ValueError("L must exceed ell_star")
    x[: ls - 1] = 0.0
    clamped = bool(np.any(x < 0))
    return LowerBoundVector(np.maximum(x, 0.0), ls, clamped)


def quad_ratio(x, L: int, b: float) -> float:
    """``x.T A x / x.T B x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (L,):
        raise ValueError("x must have length L")
    A, B = build_AB(L, b)
    den = float(x @ B @ x)
    if den <= 0:
        raise ValueError("x must be nonzero")
    return float(x @ A @ x) / den


def rand_tk(b: float, K: int) -> tuple[np.ndarray, float]:
    """Coefficients ``t_0..t_{K-1}`` and ``S(K) = t_0 + 2 * sum t_k``."""
    _check_b(b)
    if int(K) != K or K < 3:
        raise ValueError("K must be an integer >= 3")
    lb = math.log(b)
    beta = b ** (1 / K)
    t = np.empty(K)
    t[0] = (1 + 2 * beta) / K - beta * (1 + 1 / lb)
    k = np.arange(1, K - 1)
    t[1:K - 1] = (1 + beta ** (1.0 + k)) / (2 * K * beta ** (k / 2))
    t[K - 1] = (b / lb - (b - beta) / (K * (beta - 1))) / (2 * beta ** ((K - 1) / 2))
    return t, float(t[0] + 2 * np.sum(t[1:]))


def _f_powers(b: float, K: int):
    beta = b ** (1 / K)

    def f(k):
        return f_alpha(min(beta ** k, b), b)
    return beta, f


def rand_tk_from_f(b: float, K: int) -> np.ndarray:
    """The coefficients of ``rand_tk`` assembled from differences of ``f``."""
    _check_b(b)
    if int(K) != K or K < 3:
        raise ValueError("K must be an integer >= 3")
    beta, f = _f_powers(b, K)
    t = np.empty(K)
    t[0] = -2 / (beta - 1) * (f(2) - f(1))
    for k in range(1, K - 1):
        t[k] = ((beta + 1) * f(k + 1) - f(k + 2) - beta * f(k)) / (beta ** (k / 2) * (beta - 1))
    t[K - 1] = (f(K) - f(K - 1)) / (beta ** ((K - 3) / 2) * (beta - 1))
    return t


def rand_tk_prime(b: float, K: int) -> tuple[np.ndarray, float]:
    """Band coefficients ``t'_0..t'_K`` of the lower bound matrix and their sum ``t'_0 + 2 sum t'_k``."""
    _check_b(b)
    if int(K) != K or K < 2:
        raise ValueError("K must be an integer >= 2")
    lb = math.log(b)
    beta = b ** (1 / K)
    t = np.empty(K + 1)
    t[0] = 1 / K - (1 + 1 / lb)
    k = np.arange(1, K)
    t[1:K] = (1 + beta ** k) / (2 * K * beta ** (k / 2))
    t[K] = (b / lb - (b - beta) / (K * (beta - 1))) / (2 * beta ** (K / 2))
    return t, float(t[0] + 2 * np.sum(t[1:]))


def rand_tk_prime_from_f(b: float, K: int) -> np.ndarray:
    _check_b(b)
    beta, f = _f_powers(b, K)
    t = np.empty(K + 1)
    t[0] = -2 / (beta - 1) * (f(1) - f(0))
    for k in range(1, K):
        t[k] = ((beta + 1) * f(k) - f(k + 1) - beta * f(k - 1)) / (beta ** (k / 2) * (beta - 1))
    t[K] = (f(K) - f(K - 1)) / (beta ** ((K - 2) / 2) * (beta - 1))
    return t


def rand_tk_limit(b: float) -> float:
    _check_b(b)
    lb = math.log(b)
    return -1 - 1 / lb + (2 * b - 1) / (math.sqrt(b) * lb)


def rand_lb_vector(b: float, K: int, L: int, truncate: bool = True) -> LowerBoundVector:
    """Class counts for sizes ``beta**i`` (``i = 0..L``, ``beta = b**(1/K)``)."""
    _check_b(b)
    beta = b ** (1 / K)
    return lb_vector(L + 1, beta, truncate)


def rand_lb_matrices(b: float, K: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """``E`` and ``E_0`` on classes ``0..L``."""
    _check_b(b)
    beta = b ** (1 / K)
    idx = np.arange(L + 1)
    base = 0.5 * beta ** np.minimum.outer(idx, idx).astype(float)
    gap = np.abs(np.subtract.outer(idx, idx))
    E = np.zeros_like(base)
    for i in range(1, K + 1):
        df = f_alpha(beta ** i if i < K else b, b) - f_alpha(beta ** (i - 1), b)
        E += df * base * (gap >= i)
    return E, base


def rand_lb_quadratic(b: float, K: int, L: int) -> float:
    """Limit ratio ``f(1) + x.T E x / x.T E_0 x`` of the randomized lower bound family."""
    x = rand_lb_vector(b, K, L).x
    E, E0 = rand_lb_matrices(b, K, L)
    return f_alpha(1.0, b) + float(x @ E @ x) / float(x @ E0 @ x)
