"""Batched log-derivative kernels.

Every ground state in this package is a product of powers (or absolute
logarithms) of a few squared measures: squared simplex volumes, rho^2 and
|x|^2.  For each measure M we compute, over a batch of configurations
X of shape (n, N, d),

    L = log M,   grad L (shape (n, N, d)),   lap L (shape (n,)).

Squared simplex volumes go through the Gram determinant: with Y the matrix
of edge vectors, d log det(Y Y^T) / dY = 2 (Y Y^T)^-1 Y.  The Laplacian
uses  Delta_k log|A|^2 = (d - q)/2 |grad_k log|A|^2|^2  for a simplex of q
points, which is the blade identity Delta ln|x ^ B| = (d - p - 2)|B|^2/|x ^ B|^2
written per vertex.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Union

import numpy as np

Point = Union[int, np.ndarray]


@dataclass
class LogTerm:
    L: np.ndarray
    grad: np.ndarray
    lap: np.ndarray
    # log of the measure relative to its natural scale (<= 0 for volumes); None if scale-free
    rel: np.ndarray | None = None


def as_batch(x, N: int, d: int) -> tuple[np.ndarray, bool]:
    """Reshape a flat vector or batch of flat vectors to (n, N, d)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = arr.reshape(-1, N * d) if not single else arr.reshape(1, N * d)
    return arr.reshape(-1, N, d), single


def simplex_term(X: np.ndarray, vertices: Sequence[Point]) -> LogTerm:
    """log of the squared (unnormalised) volume |(P_0 - P_q) ^ ... ^ (P_{q-1} - P_q)|^2.

    ``vertices`` lists integer particle indices (movable) or fixed vectors.
    """
    n, N, d = X.shape
    q = len(vertices)
    P = np.empty((n, q, d))
    movable = []
    for s, v in enumerate(vertices):
        if isinstance(v, (int, np.integer)):
            P[:, s] = X[:, v]
            movable.append((s, int(v)))
        else:
            P[:, s] = np.asarray(v, dtype=float)
    Y = P[:, :-1] - P[:, -1:]
    G = Y @ np.swapaxes(Y, 1, 2)
    if q < 2:
        raise ValueError("a simplex term needs at least two vertices")
    sign, L = np.linalg.slogdet(G)
    bad = sign <= 0
    if bad.any():
        G = G.copy()
        G[bad] = np.eye(q - 1)
    M = np.linalg.solve(G, Y)
    M[bad] = np.nan
    L = np.where(bad, -np.inf, L)
    with np.errstate(divide="ignore"):
        rel = L - np.sum(np.log(np.einsum("ijk,ijk->ij", Y, Y)), axis=1)
    dY = 2.0 * M
    vert_grad = np.concatenate([dY, -dY.sum(axis=1, keepdims=True)], axis=1)
    grad = np.zeros_like(X)
    lap = np.zeros(n)
    for s, idx in movable:
        gk = vert_grad[:, s]
        grad[:, idx] += gk
        lap += 0.5 * (d - q) * np.einsum("ij,ij->i", gk, gk)
    return LogTerm(L, grad, lap, np.where(bad, -np.inf, rel))


def pair_term(X: np.ndarray, i: int, j: int) -> LogTerm:
    diff = X[:, i] - X[:, j]
    r2 = np.einsum("ij,ij->i", diff, diff)
    d = X.shape[2]
    grad = np.zeros_like(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 2.0 * diff / r2[:, None]
        grad[:, i] = g
        grad[:, j] = -g
        return LogTerm(np.log(r2), grad, 4.0 * (d - 2) / r2)


def rho_term(X: np.ndarray) -> LogTerm:
    n, N, d = X.shape
    centred = X - X.mean(axis=1, keepdims=True)
    rho2 = N * np.einsum("ijk,ijk->i", centred, centred)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = 2.0 * N * centred / rho2[:, None, None]
        g2 = np.einsum("ijk,ijk->i", grad, grad)
        lap = 2.0 * N * (N - 1) * d / rho2 - g2
        return LogTerm(np.log(rho2), grad, lap)


def norm_term(X: np.ndarray) -> LogTerm:
    n, N, d = X.shape
    r2 = np.einsum("ijk,ijk->i", X, X)
    with np.errstate(divide="ignore", invalid="ignore"):
        return LogTerm(np.log(r2), 2.0 * X / r2[:, None, None], 2.0 * (N * d - 2) / r2)


def rho_sq(X: np.ndarray) -> np.ndarray:
    N = X.shape[1]
    centred = X - X.mean(axis=1, keepdims=True)
    return N * np.einsum("ijk,ijk->i", centred, centred)


# weights --------------------------------------------------------------------

def sum_inv_r_sq(X: np.ndarray, R: float | None = None) -> np.ndarray:
    N = X.shape[1]
    out = np.zeros(X.shape[0])
    for i, j in combinations(range(N), 2):
        diff = X[:, i] - X[:, j]
        r2 = np.einsum("ij,ij->i", diff, diff)
        if R is None:
            out += 1.0 / r2
        else:
            out += 1.0 / (r2 * np.log(np.sqrt(r2) / R) ** 2)
    return out


def sum_inv_circumradius_sq(X: np.ndarray, R: float | None = None) -> np.ndarray:
    """Sum over triples of 1/R_ijk^2 (or of the log-weighted version)."""
    N = X.shape[1]
    out = np.zeros(X.shape[0])
    for i, j, k in combinations(range(N), 3):
        if R is None:
            u = X[:, j] - X[:, i]
            v = X[:, k] - X[:, i]
            uu = np.einsum("ij,ij->i", u, u)
            vv = np.einsum("ij,ij->i", v, v)
            uv = np.einsum("ij,ij->i", u, v)
            w = u - v
            ww = np.einsum("ij,ij->i", w, w)
            out += 4.0 * np.maximum(uu * vv - uv * uv, 0.0) / (uu * vv * ww)
        else:
            tot = 0.0
            for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                u = X[:, a] - X[:, b]
                v = X[:, a] - X[:, c]
                uu = np.einsum("ij,ij->i", u, u)
                vv = np.einsum("ij,ij->i", v, v)
                lu = np.abs(np.log(np.sqrt(uu) / R))
                lv = np.abs(np.log(np.sqrt(vv) / R))
                tot = tot + np.einsum("ij,ij->i", u, v) / (uu * vv * lu * lv)
            out += 2.0 * tot
    return out


def _rotated_vectors(X: np.ndarray, R: float | None):
    """v[j, k] = |x_j|^2 rej_{x_j}(x_k) / |x_j ^ x_k|^2 (log-weighted if R)."""
    n, N, d = X.shape
    vec = {}
    for j in range(N):
        for k in range(N):
            if j == k:
                continue
            xj, xk = X[:, j], X[:, k]
            jj = np.einsum("ij,ij->i", xj, xj)
            kk = np.einsum("ij,ij->i", xk, xk)
            jk = np.einsum("ij,ij->i", xj, xk)
            b2 = jj * kk - jk * jk
            v = (jj[:, None] * xk - jk[:, None] * xj) / b2[:, None]
            if R is not None:
                v = v / np.abs(0.5 * np.log(b2) - np.log(R))[:, None]
            vec[j, k] = v
    return vec


def sigma12_parallel(X: np.ndarray, R: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    n, N, d = X.shape
    vec = _rotated_vectors(X, R)
    S1 = np.zeros(n)
    S2 = np.zeros(n)
    for k in range(N):
        vs = [vec[j, k] for j in range(N) if j != k]
        sq = sum(np.einsum("ij,ij->i", v, v) for v in vs)
        tot = np.sum(vs, axis=0)
        S1 += sq
        S2 += np.einsum("ij,ij->i", tot, tot) - sq
    return S1, S2


def matrix_potential(X: np.ndarray) -> np.ndarray:
    N = X.shape[1]
    W = np.zeros(X.shape[0])
    for j, k in combinations(range(N), 2):
        xj, xk = X[:, j], X[:, k]
        W += (np.einsum("ij,ij->i", xj, xj) * np.einsum("ij,ij->i", xk, xk)
              - np.einsum("ij,ij->i", xj, xk) ** 2)
    return W


def sigma12_volume(X: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Sigma_1^(p,N), Sigma_2^(p,N) from halved gradients of log|A_lambda|^2."""
    n, N, d = X.shape
    acc = np.zeros_like(X)
    S1 = np.zeros(n)
    for lam in combinations(range(N), p):
        half = 0.5 * simplex_term(X, lam).grad
        S1 += np.einsum("ijk,ijk->i", half, half)
        acc += half
    S2 = np.einsum("ijk,ijk->i", acc, acc) - S1
    return S1, S2


def sigma_simplex(X: np.ndarray) -> np.ndarray:
    N = X.shape[1]
    g = simplex_term(X, tuple(range(N))).grad
    return 0.25 * np.einsum("ijk,ijk->i", g, g)


def log_volume(X: np.ndarray) -> np.ndarray:
    """log of the simplex volume V of all N points."""
    from math import lgamma

    N = X.shape[1]
    return 0.5 * simplex_term(X, tuple(range(N))).L - lgamma(N)
