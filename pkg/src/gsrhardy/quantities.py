"""Geometric quantities of an N-point configuration in R^d.

Every function here works on a single configuration and goes through the
geometric-algebra layer where the quantity is naturally a blade expression.
The batched numpy kernels in :mod:`gsrhardy.kernels` compute the same things
independently; the test suite checks one against the other.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations, permutations
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .ga_core import (
    DEGENERACY_RTOL,
    Blade,
    DegenerateBladeError,
    Multivector,
    blade_inverse,
    left_interior,
    wedge,
)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Configuration:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ConfigurationError(f"points must be an (N, d) array, got shape {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.points.reshape(-1).copy()

    @classmethod
    def from_flat(cls, flat, d: int) -> "Configuration":
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size % d:
            raise ConfigurationError(f"flat length {flat.size} is not a multiple of d={d}")
        return cls(flat.reshape(-1, d))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.points[i]

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, payload) -> "Configuration":
        if not isinstance(payload, dict) or not {"d", "N", "points"} <= payload.keys():
            raise ConfigurationError('configuration must be an object with "d", "N" and "points"')
        d, N, pts = payload["d"], payload["N"], payload["points"]
        if not isinstance(d, int) or not isinstance(N, int) or d < 1 or N < 1:
            raise ConfigurationError("d and N must be positive integers")
        if not isinstance(pts, list) or len(pts) != N:
            raise ConfigurationError(f"expected {N} points, got {len(pts) if isinstance(pts, list) else type(pts).__name__}")
        for k, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != d:
                raise ConfigurationError(f"point {k} does not have {d} coordinates")
            if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p):
                raise ConfigurationError(f"point {k} has non-numeric coordinates")
        return cls(np.array(pts, dtype=float))


def load_configuration(path) -> Configuration:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return Configuration.from_json(payload)


def save_configuration(cfg: Configuration, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2) + "\n", encoding="utf-8")


def _inv(v: np.ndarray) -> np.ndarray:
    return v / np.dot(v, v)


def _mv(v) -> Multivector:
    return Multivector.from_vector(v)


# pair and triple quantities ----------------------------------------------

def pair_distance(cfg: Configuration, i: int, j: int) -> float:
    if i == j:
        raise ValueError("pair_distance needs two distinct indices")
    return float(np.linalg.norm(cfg[i] - cfg[j]))


def _collinear(u: np.ndarray, v: np.ndarray) -> bool:
    w2 = (u @ u) * (v @ v) - (u @ v) ** 2
    return w2 <= DEGENERACY_RTOL * (u @ u) * (v @ v) or w2 <= 0.0


def _cyclic_inverse_sum(cfg: Configuration, i: int, j: int, k: int, weight=None) -> float:
    pts = cfg.points
    idx = (i, j, k)
    for a, b in combinations(idx, 2):
        if np.dot(pts[a] - pts[b], pts[a] - pts[b]) == 0.0:
            raise ValueError(f"points {a} and {b} coincide")
    # the plain cyclic sum cancels on a line; the log-weighted one does not, so keep its limit
    if weight is None and _collinear(pts[j] - pts[i], pts[k] - pts[i]):
        return 0.0
    total = 0.0
    for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
        u = _inv(pts[a] - pts[b])
        v = _inv(pts[a] - pts[c])
        if weight is not None:
            u = u / weight(a, b)
            v = v / weight(a, c)
        total += float(u @ v)
    return total


def circumradius_inv_sq(cfg: Configuration, i: int, j: int, k: int) -> float:
    """1/R_ijk^2 as twice the cyclic sum of products of inverse differences.

    Collinear triples (infinite circumradius) return exactly 0.
    """
    return 2.0 * _cyclic_inverse_sum(cfg, i, j, k)


def rho_sq(cfg: Configuration) -> float:
    pts = cfg.points
    return float(sum(np.dot(pts[i] - pts[j], pts[i] - pts[j]) for i, j in combinations(range(cfg.N), 2)))


def particle_sum(cfg: Configuration) -> float:
    """sum_k sum_{i<j} (x_k - x_i).(x_k - x_j); equals (N-2)/2 * rho^2."""
    pts = cfg.points
    return float(sum(
        np.dot(pts[k] - pts[i], pts[k] - pts[j])
        for k in range(cfg.N)
        for i, j in combinations(range(cfg.N), 2)
    ))


def _log_factor(r: float, R: float) -> float:
    if R <= 0:
        raise ValueError("length scale R must be positive")
    if r == 0.0 or r == R:
        raise ValueError(f"log-regularisation undefined at r={r} with R={R}")
    return abs(math.log(r / R))


def log_reg_pair(cfg: Configuration, i: int, j: int, R: float) -> float:
    r = pair_distance(cfg, i, j)
    return r * _log_factor(r, R)


def log_reg_circum_inv_sq(cfg: Configuration, i: int, j: int, k: int, R: float) -> float:
    def weight(a, b):
        return _log_factor(pair_distance(cfg, a, b), R)

    return 2.0 * _cyclic_inverse_sum(cfg, i, j, k, weight)


def sum_inv_r_sq(cfg: Configuration, R: float | None = None) -> float:
    if R is None:
        return sum(1.0 / pair_distance(cfg, i, j) ** 2 for i, j in combinations(range(cfg.N), 2))
    return sum(1.0 / log_reg_pair(cfg, i, j, R) ** 2 for i, j in combinations(range(cfg.N), 2))


def sum_circumradius_inv_sq(cfg: Configuration, R: float | None = None) -> float:
    if R is None:
        return sum(circumradius_inv_sq(cfg, *t) for t in combinations(range(cfg.N), 3))
    return sum(log_reg_circum_inv_sq(cfg, *t, R) for t in combinations(range(cfg.N), 3))


# vectors seen from the origin ---------------------------------------------

class SigmaPair(NamedTuple):
    S1: float
    S2: float


def _bivector(cfg: Configuration, j: int, k: int) -> Blade:
    B = Blade([cfg[j], cfg[k]])
    if B.is_degenerate():
        raise DegenerateBladeError(f"vectors {j} and {k} are parallel")
    return B


def _rotated(cfg: Configuration, j: int, k: int, R: float | None) -> np.ndarray:
    """x_j _| (x_j ^ x_k)^-1, optionally divided by |ln(|B_jk|/R)|."""
    B = _bivector(cfg, j, k)
    v = left_interior(_mv(cfg[j]), blade_inverse(B)).to_vector()
    if R is not None:
        v = v / _log_factor(B.norm(), R)
    return v


def sigma12_parallel(cfg: Configuration, R: float | None = None) -> SigmaPair:
    """Sigma_1 and Sigma_2 of the parallelity family (log-weighted when R is given)."""
    N = cfg.N
    vec = {(j, k): _rotated(cfg, j, k, R) for j in range(N) for k in range(N) if j != k}
    S1 = sum(float(v @ v) for v in vec.values())
    S2 = 0.0
    for k in range(N):
        for i in range(N):
            for j in range(N):
                if len({i, j, k}) == 3:
                    S2 += float(vec[i, k] @ vec[j, k])
    return SigmaPair(S1, S2)


def sigma1_ratio_form(cfg: Configuration, R: float | None = None) -> float:
    """sum_{j<k} (|x_j|^2 + |x_k|^2) / |x_j ^ x_k|^2, optionally log-weighted."""
    total = 0.0
    for j, k in combinations(range(cfg.N), 2):
        b2 = _bivector(cfg, j, k).norm_sq()
        term = (cfg[j] @ cfg[j] + cfg[k] @ cfg[k]) / b2
        if R is not None:
            term /= _log_factor(math.sqrt(b2), R) ** 2
        total += term
    return float(total)


def matrix_potential(cfg: Configuration) -> float:
    return float(sum(Blade([cfg[j], cfg[k]]).norm_sq() for j, k in combinations(range(cfg.N), 2)))


# simplices ------------------------------------------------------------------

def _points(x) -> np.ndarray:
    return x.points if isinstance(x, Configuration) else np.asarray(x, dtype=float)


def simplex_volume(points) -> float:
    """Volume of the simplex spanned by the points, via the wedge of differences."""
    pts = _points(points)
    n = pts.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    A = Blade([pts[j] - pts[-1] for j in range(n - 1)], dim=pts.shape[1])
    return A.norm() / math.factorial(n - 1)


def simplex_volume_gram(points) -> float:
    pts = _points(points)
    n = pts.shape[0]
    Y = pts[:-1] - pts[-1]
    if n == 1:
        return 1.0
    return math.sqrt(abs(np.linalg.det(Y @ Y.T))) / math.factorial(n - 1)


def sub_blades(points) -> tuple[Blade, list[Blade]]:
    """A and A_1..A_N with A = (x_k - x_N) ^ A_k = (x_N - x_{N-1}) ^ A_N."""
    pts = _points(points)
    n, dim = pts.shape
    A = Blade([pts[j] - pts[-1] for j in range(n - 1)], dim=dim)
    subs = []
    for k in range(n - 1):
        subs.append(Blade([pts[j] - pts[-1] for j in range(n - 1) if j != k], dim=dim, sign=(-1.0) ** k))
    if n >= 2:
        subs.append(Blade([pts[j] - pts[-2] for j in range(n - 2)], dim=dim, sign=(-1.0) ** (n - 1)))
    return A, subs


def _facet_vectors(points) -> list[np.ndarray]:
    """A_k _| A^-1 for every k; raises on a degenerate simplex."""
    A, subs = sub_blades(points)
    inv = blade_inverse(A)
    return [left_interior(Ak.mv, inv).to_vector() for Ak in subs]


def sigma_simplex(points) -> float:
    """Sum of squared facet volumes over ((N-1) V)^2, through facet volumes."""
    pts = _points(points)
    n = pts.shape[0]
    V = simplex_volume(pts)
    if V <= 0.0 or Blade([pts[j] - pts[-1] for j in range(n - 1)]).is_degenerate():
        raise DegenerateBladeError("degenerate simplex")
    facets = sum(simplex_volume(np.delete(pts, k, axis=0)) ** 2 for k in range(n))
    return facets / ((n - 1) ** 2 * V ** 2)


def sigma_simplex_blade(points) -> float:
    """The same ratio as sum_k |A_k _| A^-1|^2."""
    return float(sum(v @ v for v in _facet_vectors(points)))


def subsets(p: int, N: int) -> list[tuple[int, ...]]:
    return list(combinations(range(N), p))


def _subset_vectors(pts: np.ndarray, lam) -> dict[int, np.ndarray]:
    vecs = _facet_vectors(pts[list(lam)])
    return {k: v for k, v in zip(lam, vecs)}


def sigma12_volume(cfg: Configuration, p: int) -> SigmaPair:
    """Sigma_1^(p,N) and Sigma_2^(p,N) over all p-point sub-simplices."""
    if not 2 <= p <= cfg.N:
        raise ValueError(f"p must be in 2..N, got p={p}, N={cfg.N}")
    per_point: dict[int, list[np.ndarray]] = {k: [] for k in range(cfg.N)}
    for lam in subsets(p, cfg.N):
        for k, v in _subset_vectors(cfg.points, lam).items():
            per_point[k].append(v)
    S1 = S2 = 0.0
    for vs in per_point.values():
        sq = sum(float(v @ v) for v in vs)
        tot = np.sum(vs, axis=0)
        S1 += sq
        S2 += float(tot @ tot) - sq
    return SigmaPair(S1, S2)


def xi_pq(points, p: int) -> float:
    """The symmetrised cross term Xi^(p,q) on q points (q = p+1, ..., 2p-1)."""
    pts = _points(points)
    q = pts.shape[0]
    if not p + 1 <= q <= 2 * p - 1:
        raise ValueError(f"q must lie in {p + 1}..{2 * p - 1}, got q={q}")
    if q > 6:
        raise ValueError("xi_pq is limited to q <= 6")
    pairs = [
        (lam, mu)
        for lam in subsets(p, q) if 0 in lam
        for mu in subsets(p, q) if 0 in mu and len(set(lam) & set(mu)) == 2 * p - q
    ]
    cache: dict[tuple[int, ...], dict[int, np.ndarray]] = {}

    def vec(s, k):
        if s not in cache:
            cache[s] = _subset_vectors(pts, s)
        return cache[s][k]

    total = 0.0
    for pi in permutations(range(q)):
        k = pi[0]
        for lam, mu in pairs:
            a = tuple(sorted(pi[i] for i in lam))
            b = tuple(sorted(pi[i] for i in mu))
            total += float(vec(a, k) @ vec(b, k))
    return total
