"""Ground states, GSR potentials and Monte Carlo checks of the GSR identity.

A ground state f is described by a :class:`GroundStateSpec`.  Internally f is
assembled from log-derivative kernels, so for a batch of points we get

    log f,   g = grad f / f,   h = Laplacian of log f,

and then  Delta f / f = |g|^2 + h.  The GSR potential is
alpha (1 - alpha) |g|^2 - alpha (|g|^2 + h).

For a test function u and v = f^-alpha u one has f^alpha grad v = grad u - alpha g u,
so the remainder term of the identity never needs f itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln

from . import kernels as K
from .ga_core import DEGENERACY_RTOL


class DomainError(ValueError):
    pass


class FamilyError(ValueError):
    pass


class Family(str, Enum):
    POINT = "point"
    POINT_2D = "point2d"
    SUBSPACE = "subspace"
    SUBSPACE_2D = "subspace2d"
    SEPARATION = "separation"
    PAIR_3D = "pair3d"
    PAIR_1D = "pair1d"
    PAIR_2D = "pair2d"
    COORD = "coord"
    PARALLEL = "parallel"
    PARALLEL_3D = "parallel3d"
    SIMPLEX = "simplex"
    SIMPLEX_CRITICAL = "simplex_critical"
    ALL_SIMPLICES = "all_simplices"


ALIASES = {
    "PointHardy": Family.POINT,
    "PointHardy2d": Family.POINT_2D,
    "SubspaceHardy": Family.SUBSPACE,
    "SubspaceHardy2d": Family.SUBSPACE_2D,
    "Separation": Family.SEPARATION,
    "PairProduct3d": Family.PAIR_3D,
    "PairProduct1d": Family.PAIR_1D,
    "PairProduct2d": Family.PAIR_2D,
    "CoordProduct": Family.COORD,
    "Parallelity": Family.PARALLEL,
    "Parallelity3d": Family.PARALLEL_3D,
    "SimplexVolume": Family.SIMPLEX,
    "SimplexVolumeCritical": Family.SIMPLEX_CRITICAL,
    "AllSimplices": Family.ALL_SIMPLICES,
}

LOG_FAMILIES = {Family.POINT_2D, Family.SUBSPACE_2D, Family.PAIR_2D, Family.PARALLEL_3D, Family.SIMPLEX_CRITICAL}


def parse_family(name) -> Family:
    if isinstance(name, Family):
        return name
    if name in ALIASES:
        return ALIASES[name]
    try:
        return Family(str(name).lower())
    except ValueError:
        raise FamilyError(f"unknown family {name!r}; choose from {[f.value for f in Family]}") from None


def default_alpha(family: Family, d: int, N: int, p: int) -> float:
    """Weight used when none is given.

    The K/C families use their sup-constant upper bounds (N-2, 2(N-2),
    binom(N-1, p-1) - 1) in place of the unknown sup.
    """
    if family is Family.SEPARATION:
        return -((N - 1) * d - 2) / 4.0
    if family is Family.PAIR_3D:
        return 1.0 / (2.0 + (N - 2))
    if family is Family.PAIR_2D:
        return 1.0 / (2.0 + 2 * (N - 2))
    if family in (Family.PARALLEL, Family.PARALLEL_3D):
        return 1.0 / (2.0 * (1.0 + (N - 2)))
    if family is Family.ALL_SIMPLICES:
        return 1.0 / (2.0 * (1.0 + math.comb(N - 1, p - 1) - 1))
    return 0.5


@dataclass(frozen=True, eq=False)
class GroundStateSpec:
    family: Family
    d: int
    N: int = 1
    p: int = 0
    alpha: float | None = None
    R: float | None = None
    blade: tuple | None = None

    def __post_init__(self):
        fam = parse_family(self.family)
        object.__setattr__(self, "family", fam)
        d, N, p = int(self.d), int(self.N), int(self.p)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "p", p)
        _validate(fam, d, N, p)
        if self.alpha is None:
            object.__setattr__(self, "alpha", default_alpha(fam, d, N, p))
        if fam in LOG_FAMILIES:
            R = 1.0 if self.R is None else float(self.R)
            if R <= 0:
                raise FamilyError("length scale R must be positive")
            object.__setattr__(self, "R", R)
        if fam in (Family.SUBSPACE, Family.SUBSPACE_2D):
            if self.blade is None:
                vecs = tuple(np.eye(d)[i] for i in range(p))
            else:
                vecs = tuple(np.asarray(v, dtype=float) for v in self.blade)
                if len(vecs) != p or any(v.shape != (d,) for v in vecs):
                    raise FamilyError(f"blade must consist of {p} vectors in R^{d}")
                if p and abs(np.linalg.det(np.array(vecs) @ np.array(vecs).T)) <= DEGENERACY_RTOL * np.prod([v @ v for v in vecs]):
                    raise FamilyError("blade is degenerate")
            object.__setattr__(self, "blade", vecs)

    @property
    def size(self) -> int:
        return self.N * self.d

    @property
    def is_optimal_alpha(self) -> bool:
        return math.isclose(self.alpha, default_alpha(self.family, self.d, self.N, self.p))

    def with_alpha(self, alpha: float) -> "GroundStateSpec":
        return GroundStateSpec(self.family, self.d, self.N, self.p, alpha, self.R, self.blade)

    def manifest(self) -> dict:
        out = {"family": self.family.value, "d": self.d, "N": self.N, "p": self.p, "alpha": self.alpha, "R": self.R}
        if self.blade is not None:
            out["blade"] = [list(map(float, v)) for v in self.blade]
        return out


def _validate(fam: Family, d: int, N: int, p: int) -> None:
    def need(cond, msg):
        if not cond:
            raise FamilyError(f"{fam.value}: {msg}")

    need(d >= 1, "d must be positive")
    if fam is Family.POINT:
        need(N == 1 and d != 2, "single particle with d != 2 (use point2d for d = 2)")
    elif fam is Family.POINT_2D:
        need(N == 1 and d == 2, "single particle in d = 2")
    elif fam is Family.SUBSPACE:
        need(N == 1 and 0 <= p < d, "single particle with 0 <= p < d")
        need(d - p != 2, "d - p = 2 is the critical codimension; use the subspace2d family")
    elif fam is Family.SUBSPACE_2D:
        need(N == 1 and 0 <= p < d and d - p == 2, "single particle with d - p = 2")
    elif fam is Family.SEPARATION:
        need(N >= 2, "needs N >= 2")
    elif fam is Family.PAIR_3D:
        need(N >= 2 and d >= 3, "needs N >= 2 and d >= 3")
    elif fam is Family.PAIR_1D:
        need(N >= 2 and d == 1, "needs N >= 2 and d = 1")
    elif fam is Family.PAIR_2D:
        need(N >= 2 and d == 2, "needs N >= 2 and d = 2")
    elif fam is Family.COORD:
        need(N >= 1 and d == 1, "N coordinates with d = 1")
    elif fam is Family.PARALLEL:
        need(N >= 2 and d >= 2 and d != 3, "needs N >= 2, d >= 2 and d != 3 (use parallel3d)")
    elif fam is Family.PARALLEL_3D:
        need(N >= 2 and d == 3, "needs N >= 2 and d = 3")
    elif fam is Family.SIMPLEX:
        need(N >= 2 and (d > N or d == N - 1), "needs d > N or d = N - 1 (use simplex_critical for d = N)")
    elif fam is Family.SIMPLEX_CRITICAL:
        need(N >= 2 and d == N, "needs d = N")
    elif fam is Family.ALL_SIMPLICES:
        need(2 <= p <= N and d != p and d >= p - 1, "needs 2 <= p <= N, d != p and d >= p - 1")


# assembly -------------------------------------------------------------------

def _terms(spec: GroundStateSpec, X: np.ndarray):
    """Power terms (coef, LogTerm) and log terms (LogTerm, offset) of log f."""
    fam, d, N, p = spec.family, spec.d, spec.N, spec.p
    origin = np.zeros(d)
    power: list = []
    logs: list = []
    lnR = math.log(spec.R) if spec.R is not None else 0.0
    if fam in (Family.POINT, Family.SUBSPACE):
        power.append((-(d - p - 2) / 2.0, K.simplex_term(X, [0, *(spec.blade or ()), origin])))
    elif fam in (Family.POINT_2D, Family.SUBSPACE_2D):
        blade = spec.blade if spec.blade is not None else ()
        logs.append((K.simplex_term(X, [0, *blade, origin]), lnR))
    elif fam is Family.SEPARATION:
        power.append((1.0, K.rho_term(X)))
    elif fam in (Family.PAIR_3D, Family.PAIR_1D):
        c = -(d - 2) / 2.0
        power.extend((c, K.pair_term(X, i, j)) for i in range(N) for j in range(i + 1, N))
    elif fam is Family.PAIR_2D:
        logs.extend((K.pair_term(X, i, j), lnR) for i in range(N) for j in range(i + 1, N))
    elif fam is Family.COORD:
        power.extend((0.5, K.simplex_term(X, [k, origin])) for k in range(N))
        power.append((1.0 - N, K.norm_term(X)))
    elif fam is Family.PARALLEL:
        c = -(d - 3) / 2.0
        power.extend((c, K.simplex_term(X, [j, k, origin])) for j in range(N) for k in range(j + 1, N))
    elif fam is Family.PARALLEL_3D:
        logs.extend((K.simplex_term(X, [j, k, origin]), lnR) for j in range(N) for k in range(j + 1, N))
    elif fam is Family.SIMPLEX:
        power.append((-(d - N) / 2.0, K.simplex_term(X, tuple(range(N)))))
    elif fam is Family.SIMPLEX_CRITICAL:
        logs.append((K.simplex_term(X, tuple(range(N))), lnR + math.lgamma(N)))
    elif fam is Family.ALL_SIMPLICES:
        from itertools import combinations

        c = -(d - p) / 2.0
        power.extend((c, K.simplex_term(X, lam)) for lam in combinations(range(N), p))
    return power, logs


class LogDerivatives(NamedTuple):
    logf: np.ndarray
    g: np.ndarray
    h: np.ndarray


def _log_derivatives(spec: GroundStateSpec, X: np.ndarray) -> LogDerivatives:
    n = X.shape[0]
    logf = np.zeros(n)
    g = np.zeros_like(X)
    h = np.zeros(n)
    power, logs = _terms(spec, X)
    with np.errstate(all="ignore"):
        for c, t in power:
            logf += c * t.L
            g += c * t.grad
            h += c * t.lap
        for t, off in logs:
            ell = 0.5 * t.L - off
            gl = 0.5 * t.grad / ell[:, None, None]
            logf += np.log(np.abs(ell))
            g += gl
            h += 0.5 * t.lap / ell - np.einsum("ijk,ijk->i", gl, gl)
    return LogDerivatives(logf, g.reshape(n, -1), h)


def _log_factors(spec: GroundStateSpec, X: np.ndarray) -> np.ndarray:
    """Signed values ln(measure / R) of every log term, shape (n, m)."""
    _, logs = _terms(spec, X)
    if not logs:
        return np.zeros((X.shape[0], 0))
    return np.stack([0.5 * t.L - off for t, off in logs], axis=1)


def in_domain(spec: GroundStateSpec, x) -> np.ndarray:
    """Membership of each point of a batch in the family's open domain."""
    X, _ = K.as_batch(x, spec.N, spec.d)
    fam = spec.family
    # config scale for scale-free measures (pair distances, rho, |x|)
    s2 = np.maximum(np.einsum("ijk,ijk->i", X, X) / X.shape[1], 1e-300)
    floor = math.log(DEGENERACY_RTOL)
    with np.errstate(all="ignore"):
        power, logs = _terms(spec, X)
        ok = np.ones(X.shape[0], dtype=bool)
        for t in [t for _, t in power] + [t for t, _ in logs]:
            ok &= np.isfinite(t.L) & np.all(np.isfinite(t.grad), axis=(1, 2))
            rel = t.rel if t.rel is not None else t.L - np.log(s2)
            ok &= rel > floor
        if logs:
            ell = _log_factors(spec, X)
            ok &= np.all(np.abs(ell) > 1e-12, axis=1)
        if fam is Family.PAIR_2D:
            ok &= np.all(np.einsum("ijk,ijk->ij", X, X) < (spec.R / 2.0) ** 2, axis=1)
        if fam is Family.PARALLEL_3D:
            # W < R as stated, plus |B_jk| < R so every log factor is negative
            ok &= (K.matrix_potential(X) < spec.R) & np.all(_log_factors(spec, X) < 0.0, axis=1)
        if fam is Family.SIMPLEX_CRITICAL:
            ok &= _log_factors(spec, X)[:, 0] < 0.0
        if fam is Family.COORD:
            ok &= np.all(X[:, :, 0] != 0.0, axis=1)
    return ok


def _checked(spec: GroundStateSpec, x) -> tuple[np.ndarray, bool]:
    X, single = K.as_batch(x, spec.N, spec.d)
    if X.shape[2] != spec.d:
        raise DomainError("configuration has the wrong dimension")
    ok = in_domain(spec, X)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise DomainError(f"{spec.family.value}: point {bad} of the batch lies outside the domain")
    return X, single


def _out(arr, single):
    return arr[0] if single else arr


def log_derivatives(spec: GroundStateSpec, x) -> LogDerivatives:
    X, single = _checked(spec, x)
    ld = _log_derivatives(spec, X)
    if single:
        return LogDerivatives(ld.logf[0], ld.g[0], ld.h[0])
    return ld


def gs_value(spec: GroundStateSpec, x):
    X, single = _checked(spec, x)
    return _out(np.exp(_log_derivatives(spec, X).logf), single)


def gs_grad(spec: GroundStateSpec, x):
    X, single = _checked(spec, x)
    ld = _log_derivatives(spec, X)
    return _out(np.exp(ld.logf)[:, None] * ld.g, single)


def gs_laplacian(spec: GroundStateSpec, x):
    X, single = _checked(spec, x)
    ld = _log_derivatives(spec, X)
    return _out(np.exp(ld.logf) * (np.einsum("ij,ij->i", ld.g, ld.g) + ld.h), single)


def laplacian_over_f(spec: GroundStateSpec, x):
    X, single = _checked(spec, x)
    ld = _log_derivatives(spec, X)
    return _out(np.einsum("ij,ij->i", ld.g, ld.g) + ld.h, single)


def _potential(spec: GroundStateSpec, X: np.ndarray, alpha: float) -> np.ndarray:
    if spec.family is Family.COORD:
        return product_potential(X.reshape(X.shape[0], -1), alpha, alpha * (1 - spec.N))
    ld = _log_derivatives(spec, X)
    g2 = np.einsum("ij,ij->i", ld.g, ld.g)
    return alpha * (1.0 - alpha) * g2 - alpha * (g2 + ld.h)


def gsr_potential(spec: GroundStateSpec, x, alpha: float | None = None):
    X, single = _checked(spec, x)
    a = spec.alpha if alpha is None else alpha
    return _out(_potential(spec, X, a), single)


def product_potential(x: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Two-factor GSR potential for g^alpha h^beta with g = prod |x_k|, h = |x|^2."""
    x = np.atleast_2d(x)
    N = x.shape[1]
    r2 = np.einsum("ij,ij->i", x, x)
    grad_g_sq = np.sum(1.0 / x**2, axis=1)
    grad_h_sq = 4.0 / r2
    lap_h = 2.0 * N / r2
    cross = 2.0 * N / r2
    return (alpha * (1 - alpha) * grad_g_sq
            + beta * (1 - beta) * grad_h_sq - beta * lap_h
            - 2.0 * alpha * beta * cross)


# weights used in Hardy inequalities ------------------------------------------

def _w_inv_dist(spec, X):
    power, logs = _terms(spec, X)
    t = (power or [(None, logs[0][0])])[0][1]
    return 0.25 * np.einsum("ijk,ijk->i", t.grad, t.grad)


def _w_inv_dist_log(spec, X):
    t, off = _terms(spec, X)[1][0]
    ell = 0.5 * t.L - off
    return 0.25 * np.einsum("ijk,ijk->i", t.grad, t.grad) / ell**2


def _w_simplex_log(spec, X):
    ell = K.log_volume(X) - math.log(spec.R)
    return K.sigma_simplex(X) / ell**2


WEIGHTS: dict[str, Callable[[GroundStateSpec, np.ndarray], np.ndarray]] = {
    "inv_dist_sq": _w_inv_dist,
    "inv_dist_sq_log": _w_inv_dist_log,
    "inv_rho_sq": lambda s, X: 1.0 / K.rho_sq(X),
    "sum_inv_r_sq": lambda s, X: K.sum_inv_r_sq(X),
    "sum_inv_R_sq": lambda s, X: K.sum_inv_circumradius_sq(X),
    "sum_inv_r_sq_log": lambda s, X: K.sum_inv_r_sq(X, s.R),
    "sum_inv_R_sq_log": lambda s, X: K.sum_inv_circumradius_sq(X, s.R),
    "coord_potential": lambda s, X: (0.25 * np.sum(1.0 / X[:, :, 0] ** 2, axis=1)
                                     + (s.N - 1) ** 2 / np.einsum("ijk,ijk->i", X, X)),
    "sigma1": lambda s, X: K.sigma12_parallel(X)[0],
    "sigma2": lambda s, X: K.sigma12_parallel(X)[1],
    "sigma1_log": lambda s, X: K.sigma12_parallel(X, s.R)[0],
    "sigma2_log": lambda s, X: K.sigma12_parallel(X, s.R)[1],
    "sigma_simplex": lambda s, X: K.sigma_simplex(X),
    "sigma_simplex_log": _w_simplex_log,
    "sigma1_pN": lambda s, X: K.sigma12_volume(X, s.p)[0],
    "sigma2_pN": lambda s, X: K.sigma12_volume(X, s.p)[1],
}


def weight(spec: GroundStateSpec, name: str, x):
    if name not in WEIGHTS:
        raise KeyError(f"unknown weight {name!r}; choose from {sorted(WEIGHTS)}")
    X, single = _checked(spec, x)
    with np.errstate(all="ignore"):
        return _out(WEIGHTS[name](spec, X), single)


# test functions and sampling -------------------------------------------------

@dataclass(frozen=True, eq=False)
class TestFunctionSpec:
    """Bump exp(-1/(1 - s^2)), s = |x - center| / radius, supported in a ball."""

    __test__ = False

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def value(self, x):
        x = np.atleast_2d(x)
        s2 = np.einsum("ij,ij->i", x - self.center, x - self.center) / self.radius**2
        out = np.zeros(x.shape[0])
        m = s2 < 1.0
        out[m] = np.exp(-1.0 / (1.0 - s2[m]))
        return out

    def grad(self, x):
        x = np.atleast_2d(x)
        diff = x - self.center
        s2 = np.einsum("ij,ij->i", diff, diff) / self.radius**2
        out = np.zeros_like(diff)
        m = s2 < 1.0
        u = np.exp(-1.0 / (1.0 - s2[m]))
        out[m] = (-2.0 * u / (self.radius**2 * (1.0 - s2[m]) ** 2))[:, None] * diff[m]
        return out

    def manifest(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class IntegrationSpec:
    samples: int = 1_000_000
    seed: int = 0
    block_size: int = 1 << 16

    def blocks(self):
        """Yield (generator, count) per block; seeded per block for reproducibility."""
        if self.samples < 1:
            raise ValueError("samples must be positive")
        nblocks = -(-self.samples // self.block_size)
        children = np.random.SeedSequence(self.seed).spawn(nblocks)
        left = self.samples
        for child in children:
            m = min(self.block_size, left)
            left -= m
            yield np.random.Generator(np.random.PCG64(child)), m

    def manifest(self) -> dict:
        return {"samples": self.samples, "seed": self.seed, "block_size": self.block_size}


def sample_ball(rng: np.random.Generator, m: int, center: np.ndarray, radius: float) -> np.ndarray:
    n = center.shape[0]
    z = rng.standard_normal((m, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(m) ** (1.0 / n)
    return center + z * r[:, None]


def ball_volume(n: int, radius: float) -> float:
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1) + n * math.log(radius))


class _Moments:
    """Chan-style running mean / M2 per column."""

    def __init__(self, k: int):
        self.n = 0
        self.mean = np.zeros(k)
        self.m2 = np.zeros(k)

    def add(self, cols: np.ndarray):
        m = cols.shape[0]
        mu = cols.mean(axis=0)
        m2 = ((cols - mu) ** 2).sum(axis=0)
        delta = mu - self.mean
        tot = self.n + m
        self.mean = self.mean + delta * m / tot
        self.m2 = self.m2 + m2 + delta**2 * self.n * m / tot
        self.n = tot

    def stderr(self) -> np.ndarray:
        return np.sqrt(self.m2 / max(self.n - 1, 1) / self.n)


def check_support(spec: GroundStateSpec, u: TestFunctionSpec, probes: int = 4096, margin: float = 0.1) -> bool:
    """Sample the enlarged ball of radius (1 + margin) r and its boundary sphere."""
    if u.center.shape[0] != spec.size:
        raise DomainError(f"test function lives in R^{u.center.shape[0]}, family needs R^{spec.size}")
    rng = np.random.default_rng(20240917)
    big = (1.0 + margin) * u.radius
    inner = sample_ball(rng, probes, u.center, big)
    z = rng.standard_normal((probes, spec.size))
    shell = u.center + big * z / np.linalg.norm(z, axis=1, keepdims=True)
    pts = np.vstack([u.center[None, :], inner, shell])
    if not in_domain(spec, pts).all():
        return False
    X, _ = K.as_batch(pts, spec.N, spec.d)
    ell = _log_factors(spec, X)
    if ell.shape[1]:
        signs = np.sign(ell)
        if not np.all(signs == signs[0]):
            return False
    # random probes miss thin singular sets (a point, a hyperplane x_i = x_j); search for them
    return not _reaches_singular_set(spec, pts, u.center, big)


def _term_list(spec: GroundStateSpec, X: np.ndarray) -> list:
    power, logs = _terms(spec, X)
    return [t for _, t in power] + [t for t, _ in logs]


def _term_rel(t, X: np.ndarray) -> np.ndarray:
    if t.rel is not None:
        return t.rel
    return t.L - np.log(np.maximum(np.einsum("ijk,ijk->i", X, X) / X.shape[1], 1e-300))


def _reaches_singular_set(spec: GroundStateSpec, pts: np.ndarray, center: np.ndarray, radius: float,
                          starts: int = 16, steps: int = 80) -> bool:
    """Projected Newton descent on each log-measure from the probes where it is smallest.

    For a measure vanishing to order m the step -grad L / |grad L|^2 shrinks the
    distance to its zero set by the factor 1 - 1/(2m), so the measure drops by
    the degeneracy ratio within the step budget whenever the zero set meets the ball.
    """
    floor = math.log(DEGENERACY_RTOL)
    X0, _ = K.as_batch(pts, spec.N, spec.d)
    with np.errstate(all="ignore"):
        n_terms = len(_term_list(spec, X0))
        for j in range(n_terms):
            t0 = _term_list(spec, X0)[j]
            pick = np.argsort(_term_rel(t0, X0))[:starts]
            x, L0 = pts[pick].copy(), t0.L[pick]
            for _ in range(steps):
                X, _ = K.as_batch(x, spec.N, spec.d)
                t = _term_list(spec, X)[j]
                # a drop by the degeneracy ratio means the zero set sits inside the ball
                r = np.minimum(_term_rel(t, X), t.L - L0)
                if np.any(~np.isfinite(r) | (r <= floor)):
                    return True
                gr = t.grad.reshape(x.shape[0], -1)
                x = x - gr / np.einsum("ij,ij->i", gr, gr)[:, None]
                off = x - center
                dist = np.linalg.norm(off, axis=1, keepdims=True)
                x = np.where(dist > radius, center + off * (radius / dist), x)
    return False


def _default_center(spec: GroundStateSpec) -> tuple[np.ndarray, float]:
    fam, d, N, p = spec.family, spec.d, spec.N, spec.p
    R = spec.R or 1.0
    if fam is Family.POINT:
        return 3.0 * np.eye(d)[0], 1.0
    if fam is Family.POINT_2D:
        return 0.4 * R * np.eye(2)[0], 0.25 * R
    if fam in (Family.SUBSPACE, Family.SUBSPACE_2D):
        B = np.array(spec.blade).reshape(p, d)
        Q, _ = np.linalg.qr(np.vstack([B, np.eye(d)]).T)
        par = Q[:, :p].sum(axis=1) * 0.5 if p else np.zeros(d)
        normal = Q[:, p]
        if fam is Family.SUBSPACE:
            return par + 3.0 * normal, 1.0
        amp = math.sqrt(abs(np.linalg.det(B @ B.T))) if p else 1.0
        return 0.2 * par / amp + 0.4 * R / amp * normal, 0.25 * R / amp
    if fam is Family.SEPARATION:
        X = np.zeros((N, d))
        X[:, 0] = 3.0 * np.arange(N)
        return X.ravel(), 1.0
    if fam in (Family.PAIR_3D, Family.PAIR_2D):
        ang = 2 * math.pi * np.arange(N) / N
        s = 0.3 * R if fam is Family.PAIR_2D else 3.0 / (2 * math.sin(math.pi / N))
        X = np.zeros((N, d))
        X[:, 0], X[:, 1] = s * np.cos(ang), s * np.sin(ang)
        return X.ravel(), (0.15 * R if fam is Family.PAIR_2D else 1.0)
    if fam is Family.PAIR_1D:
        return 3.0 * np.arange(N, dtype=float), 1.0
    if fam is Family.COORD:
        return 2.0 + np.arange(N, dtype=float), 1.0
    if fam in (Family.PARALLEL, Family.PARALLEL_3D):
        length = 3.0 if fam is Family.PARALLEL else 0.5
        if N <= d:
            X = length * np.eye(d)[:N]
        else:
            rng = np.random.default_rng(7)
            X = rng.standard_normal((N, d))
            if d == 2:
                ang = math.pi * np.arange(N) / N
                X = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            X = length * X / np.linalg.norm(X, axis=1, keepdims=True)
        return X.ravel(), (0.75 if fam is Family.PARALLEL else 0.1)
    if fam is Family.SIMPLEX:
        X = np.zeros((N, d))
        for k in range(min(N, d)):
            X[k, k] = 3.0
        return X.ravel(), 0.75
    if fam is Family.SIMPLEX_CRITICAL:
        return (0.5 * np.eye(d)).ravel(), 0.1
    if fam is Family.ALL_SIMPLICES:
        if N <= d:
            X = 3.0 * np.eye(d)[:N]
        else:
            X = 3.0 * np.random.default_rng(12345).standard_normal((N, d))
        return X.ravel(), 0.5
    raise FamilyError(f"no default placement for {fam}")


def default_test_function(spec: GroundStateSpec) -> TestFunctionSpec:
    """Deterministic bump for the family, shrunk until its support clears the singular set."""
    center, radius = _default_center(spec)
    for _ in range(30):
        u = TestFunctionSpec(center, radius)
        if check_support(spec, u):
            return u
        radius *= 0.7
    raise DomainError(f"could not place a test function for {spec.family.value}")


# Monte Carlo ------------------------------------------------------------------

class GSRResidual(NamedTuple):
    lhs: float
    pot_term: float
    rhs: float
    residual: float
    stderr: float
    passed: bool


def _require_support(spec, u):
    if not check_support(spec, u):
        raise DomainError(f"{spec.family.value}: test-function support leaves the domain")


def gsr_residual(spec: GroundStateSpec, u: TestFunctionSpec, quad: IntegrationSpec,
                 alpha: float | None = None) -> GSRResidual:
    """Monte Carlo estimate of both sides of the GSR identity on common samples."""
    _require_support(spec, u)
    a = spec.alpha if alpha is None else alpha
    mom = _Moments(4)
    for rng, m in quad.blocks():
        x = sample_ball(rng, m, u.center, u.radius)
        X, _ = K.as_batch(x, spec.N, spec.d)
        uv = u.value(x)
        gu = u.grad(x)
        ld = _log_derivatives(spec, X)
        g2 = np.einsum("ij,ij->i", ld.g, ld.g)
        if spec.family is Family.COORD:
            pot = product_potential(x, a, a * (1 - spec.N))
        else:
            pot = a * (1.0 - a) * g2 - a * (g2 + ld.h)
        lhs = np.einsum("ij,ij->i", gu, gu)
        w = gu - a * ld.g * uv[:, None]
        rhs = np.einsum("ij,ij->i", w, w)
        ptm = pot * uv**2
        mom.add(np.column_stack([lhs, ptm, rhs, lhs - ptm - rhs]))
    vol = ball_volume(spec.size, u.radius)
    lhs, pot, rhs, res = vol * mom.mean
    err = vol * mom.stderr()[3]
    if not lhs > 0:
        raise DomainError("test function has zero mass on the samples")
    passed = abs(res) <= max(3.0 * err, 1e-2 * lhs)
    return GSRResidual(float(lhs), float(pot), float(rhs), float(res), float(err), bool(passed))


class HardyDeficit(NamedTuple):
    lhs: float
    weighted: float
    deficit: float
    stderr: float
    passed: bool


def hardy_deficit(spec: GroundStateSpec, constant: float, weight_name: str,
                  u: TestFunctionSpec, quad: IntegrationSpec) -> HardyDeficit:
    """Estimate  int |grad u|^2 - constant * int w |u|^2  for a named weight w."""
    _require_support(spec, u)
    if weight_name not in WEIGHTS:
        raise KeyError(f"unknown weight {weight_name!r}; choose from {sorted(WEIGHTS)}")
    wfn = WEIGHTS[weight_name]
    mom = _Moments(3)
    for rng, m in quad.blocks():
        x = sample_ball(rng, m, u.center, u.radius)
        X, _ = K.as_batch(x, spec.N, spec.d)
        gu = u.grad(x)
        lhs = np.einsum("ij,ij->i", gu, gu)
        with np.errstate(all="ignore"):
            wt = wfn(spec, X) * u.value(x) ** 2
        mom.add(np.column_stack([lhs, wt, lhs - constant * wt]))
    vol = ball_volume(spec.size, u.radius)
    lhs, wt, deficit = vol * mom.mean
    err = vol * mom.stderr()[2]
    if not lhs > 0:
        raise DomainError("test function has zero mass on the samples")
    return HardyDeficit(float(lhs), float(wt), float(deficit), float(err), bool(deficit >= -3.0 * err))
