"""Supremum estimates for the geometric ratio constants, optimal weights and Hardy constants.

Ratio kinds (numerator / denominator, both sums over the configuration):

    K     sum over triples 1/R_ijk^2      / sum over pairs 1/r_ij^2
    K2d   log-weighted triples          / log-weighted pairs, points in the ball of radius R/2
    C     parallelity cross sum           / parallelity square sum
    C3d   log-weighted parallelity ratio, configurations with W < R
    Cp    simplex-subset cross sum        / simplex-subset square sum

Every estimate is a lower bound on the sup: it is the value at an explicit
configuration, re-evaluated through the geometric-algebra path in ``quantities``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from . import kernels as Kn
from . import quantities as Q

KINDS = ("K", "K2d", "C", "C3d", "Cp")
K_KINDS = {"K", "K2d"}
C_KINDS = {"C", "C3d", "Cp"}

# bad configurations get this objective value (we minimise the negative ratio)
_PENALTY = 1e6


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class RatioObjective:
    kind: str
    d: int
    N: int
    p: int = 0
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EstimatorError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        d, N, p = self.d, self.N, self.p
        ok = {
            "K": d >= 1 and N >= 2,
            "K2d": d == 2 and N >= 2,
            "C": d >= 2 and N >= 2,
            "C3d": d == 3 and N >= 2,
            "Cp": 2 <= p <= N and d >= p - 1,
        }[self.kind]
        if not ok:
            raise EstimatorError(f"infeasible parameters for {self.kind}: d={d}, N={N}, p={p}")
        if self.R <= 0:
            raise EstimatorError("R must be positive")

    @property
    def scale_invariant(self) -> bool:
        return self.kind in ("K", "C", "Cp")

    @property
    def stated_bound(self) -> float:
        N, p = self.N, self.p
        if self.kind == "K":
            return float(N - 2) if N >= 2 else 0.0
        if self.kind == "K2d":
            return 2.0 * (N - 2)
        if self.kind in ("C", "C3d"):
            return float(N - 2)
        return float(math.comb(N - 1, p - 1) - 1)

    @property
    def n_params(self) -> int:
        return self.N * self.d + (1 if self.kind == "C3d" else 0)

    # parametrisation -------------------------------------------------------
    def to_config(self, z: np.ndarray) -> np.ndarray:
        """Map free parameters (batch, n_params) to configurations (batch, N, d)."""
        z = np.atleast_2d(z)
        n, N, d = z.shape[0], self.N, self.d
        X = z[:, : N * d].reshape(n, N, d)
        with np.errstate(all="ignore"):
            if self.kind in ("K", "Cp"):
                X = X - X.mean(axis=1, keepdims=True)
                X = X / np.sqrt(Kn.rho_sq(X))[:, None, None]
            elif self.kind == "C":
                X = X / np.sqrt(np.einsum("ijk,ijk->i", X, X))[:, None, None]
            elif self.kind == "K2d":
                r = np.linalg.norm(X, axis=2, keepdims=True)
                X = 0.5 * self.R * np.tanh(r) * X / r
            else:
                target = self.R / (1.0 + np.exp(-z[:, -1]))
                X = X * (target / Kn.matrix_potential(X))[:, None, None] ** 0.25
        return X

    def ratio_batch(self, X: np.ndarray) -> np.ndarray:
        """Fast vectorised ratio on configurations of shape (n, N, d)."""
        with np.errstate(all="ignore"):
            if self.kind == "K":
                return Kn.sum_inv_circumradius_sq(X) / Kn.sum_inv_r_sq(X)
            if self.kind == "K2d":
                return Kn.sum_inv_circumradius_sq(X, self.R) / Kn.sum_inv_r_sq(X, self.R)
            if self.kind == "C":
                s1, s2 = Kn.sigma12_parallel(X)
                return s2 / s1
            if self.kind == "C3d":
                s1, s2 = Kn.sigma12_parallel(X, self.R)
                return s2 / s1
            s1, s2 = Kn.sigma12_volume(X, self.p)
            return s2 / s1

    def feasible(self, X: np.ndarray) -> np.ndarray:
        if X.ndim == 2:
            X = X[None]
        ok = np.all(np.isfinite(X), axis=(1, 2))
        if self.kind == "K2d":
            ok &= np.all(np.linalg.norm(X, axis=2) < self.R / 2, axis=1)
        if self.kind == "C3d":
            ok &= Kn.matrix_potential(X) < self.R
        return ok

    def exact(self, cfg: Q.Configuration) -> float:
        """Ratio through the geometric-algebra path (independent of the kernels)."""
        if self.kind == "K":
            return Q.sum_circumradius_inv_sq(cfg) / Q.sum_inv_r_sq(cfg)
        if self.kind == "K2d":
            return Q.sum_circumradius_inv_sq(cfg, self.R) / Q.sum_inv_r_sq(cfg, self.R)
        if self.kind == "C":
            s = Q.sigma12_parallel(cfg)
            return s.S2 / s.S1
        if self.kind == "C3d":
            s = Q.sigma12_parallel(cfg, self.R)
            return s.S2 / s.S1
        s = Q.sigma12_volume(cfg, self.p)
        return s.S2 / s.S1

    def manifest(self) -> dict:
        return {"kind": self.kind, "d": self.d, "N": self.N, "p": self.p, "R": self.R}


@dataclass(frozen=True)
class OptimizerSpec:
    restarts: int = 8
    local_steps: int = 3000
    seed: int = 0
    # initial simplex edge lengths; each local search is re-run with the next size
    step_schedule: tuple = (0.5, 0.1, 0.02)

    def manifest(self) -> dict:
        return {"restarts": self.restarts, "local_steps": self.local_steps, "seed": self.seed,
                "step_schedule": list(self.step_schedule)}


class SupEstimate(NamedTuple):
    value: float
    argmax_cfg: Q.Configuration
    dispersion: float
    restart_values: tuple
    stated_bound: float
    within_bound: bool
    min_pair_distance: float


def _objective(obj: RatioObjective):
    def f(z):
        X = obj.to_config(z)
        if not obj.feasible(X)[0]:
            return _PENALTY
        v = obj.ratio_batch(X)[0]
        return -v if np.isfinite(v) else _PENALTY
    return f


def _local_search(f, z0: np.ndarray, opt: OptimizerSpec) -> tuple[np.ndarray, float]:
    z, val = z0, f(z0)
    n = z0.size
    for step in opt.step_schedule:
        simplex = np.vstack([z, z + step * np.eye(n)])
        res = minimize(f, z, method="Nelder-Mead",
                       options={"maxfev": opt.local_steps, "xatol": 1e-10, "fatol": 1e-13,
                                "initial_simplex": simplex, "adaptive": True})
        if res.fun <= val:
            z, val = res.x, res.fun
    return z, val


def _lift(obj: RatioObjective, cfg: Q.Configuration, rng: np.random.Generator) -> np.ndarray:
    """Embed a smaller configuration by adding far-away points."""
    X = np.zeros((obj.N, obj.d))
    X[: cfg.N] = cfg.points
    scale = np.max(np.linalg.norm(cfg.points, axis=1)) + 1.0
    for k in range(cfg.N, obj.N):
        direction = rng.standard_normal(obj.d)
        X[k] = 1e3 * scale * (k - cfg.N + 1) * direction / np.linalg.norm(direction)
    z = X.ravel()
    if obj.kind == "C3d":
        z = np.append(z, 0.0)
    return z


def estimate_sup(obj: RatioObjective, opt: OptimizerSpec | None = None,
                 warm_start: Q.Configuration | None = None) -> SupEstimate:
    """Random restarts plus derivative-free local search; best value wins.

    Restarts are seeded from SeedSequence(seed).spawn so the result depends only
    on ``opt``.  With ``warm_start`` the first restart begins from that configuration
    (padded with distant points if it has fewer particles).
    """
    opt = opt or OptimizerSpec()
    if opt.restarts < 1:
        raise EstimatorError("need at least one restart")
    f = _objective(obj)
    seeds = np.random.SeedSequence(opt.seed).spawn(opt.restarts)
    best_z, best_val = None, np.inf
    values = []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if i == 0 and warm_start is not None:
            if warm_start.d != obj.d or warm_start.N > obj.N:
                raise EstimatorError("warm start does not embed into the objective's configuration space")
            z0 = _lift(obj, warm_start, rng)
        else:
            z0 = rng.standard_normal(obj.n_params)
            z0 *= rng.random() ** (1.0 / obj.n_params) / np.linalg.norm(z0)
        z, val = _local_search(f, z0, opt)
        values.append(-val if val < _PENALTY else float("nan"))
        if val < best_val:
            best_z, best_val = z, val
    if best_z is None or best_val >= _PENALTY:
        raise EstimatorError("optimizer found no configuration inside the domain")
    X = obj.to_config(best_z)[0]
    if not obj.feasible(X)[0]:
        raise EstimatorError("optimizer returned a configuration outside the domain")
    cfg = Q.Configuration(X)
    fast = -best_val
    value = float(obj.exact(cfg))
    if not math.isclose(value, fast, rel_tol=1e-9, abs_tol=1e-12):
        raise EstimatorError(f"independent re-evaluation disagrees: {value} vs {fast}")
    finite = np.array([v for v in values if np.isfinite(v)])
    diffs = X[:, None, :] - X[None, :, :]
    dist = np.linalg.norm(diffs, axis=2)[np.triu_indices(obj.N, 1)]
    return SupEstimate(
        value=value,
        argmax_cfg=cfg,
        dispersion=float(finite.std()) if finite.size else 0.0,
        restart_values=tuple(float(v) for v in values),
        stated_bound=obj.stated_bound,
        within_bound=value <= obj.stated_bound + 1e-6,
        min_pair_distance=float(dist.min()) if dist.size else float("nan"),
    )


# weights and constants --------------------------------------------------------

def optimal_alpha(kind: str, value: float) -> float:
    """1/(2+K) for the K kinds, 1/(2(1+C)) for the C kinds."""
    if value < 0:
        raise ValueError("the ratio constant must be nonnegative")
    if kind in K_KINDS:
        return 1.0 / (2.0 + value)
    if kind in C_KINDS:
        return 1.0 / (2.0 * (1.0 + value))
    raise ValueError(f"unknown kind {kind!r}")


class CombinedAlpha(NamedTuple):
    c: float
    alpha: float
    constant: float


def combined_alpha_c(d: int, N: int) -> CombinedAlpha:
    """Weight maximising alpha (1 - alpha) / (1 + c alpha^2) and the resulting pair constant."""
    if d < 3 or N < 2:
        raise ValueError("needs d >= 3 and N >= 2")
    c = 1.5 * (d - 2) ** 2 / (d - 1) ** 2 * (N - 1) * (N - 2)
    alpha = 1.0 / (1.0 + math.sqrt(1.0 + c))
    return CombinedAlpha(c, alpha, alpha * (d - 2) ** 2)


def hardy_constant(tag: str, d: int, N: int = 1, p: int = 0, value: float | None = None) -> float:
    """Closed-form Hardy constants; ``value`` is the K or C constant where one is needed.

    Tags: point, subspace, point2d, subspace2d, separation, pairs, triples, pairs2d, triples2d, pairs1d,
    coord, combined, parallel, parallel_cross, parallel3d, parallel3d_cross,
    simplex, simplex_critical, all_simplices, all_simplices_cross.
    """
    def need():
        if value is None:
            raise ValueError(f"{tag} needs the ratio constant")
        if value < 0:
            raise ValueError("the ratio constant must be nonnegative")
        return value

    def need_positive():
        v = need()
        if v == 0:
            raise ValueError(f"{tag}: the constant vanishes, so the cross-term inequality is vacuous")
        return v

    if tag in ("point", "subspace"):
        return (d - p - 2) ** 2 / 4.0
    if tag == "separation":
        return N * ((N - 1) * d - 2) ** 2 / 4.0
    if tag == "pairs":
        return (d - 2) ** 2 / (2.0 + need())
    if tag == "triples":
        v = need_positive()
        return (d - 2) ** 2 / (v * (2.0 + v))
    if tag == "pairs2d":
        return 1.0 / (2.0 + need())
    if tag == "triples2d":
        v = need_positive()
        return 1.0 / (v * (2.0 + v))
    if tag == "pairs1d":
        return 0.5
    if tag == "coord":
        return 1.0
    if tag == "combined":
        return combined_alpha_c(d, N).constant
    if tag == "parallel":
        return (d - 3) ** 2 / (4.0 * (1.0 + need()))
    if tag == "parallel_cross":
        v = need_positive()
        return (d - 3) ** 2 / (4.0 * v * (1.0 + v))
    if tag == "parallel3d":
        return 1.0 / (4.0 * (1.0 + need()))
    if tag == "parallel3d_cross":
        v = need_positive()
        return 1.0 / (4.0 * v * (1.0 + v))
    if tag == "simplex":
        return (d - N) ** 2 / 4.0
    if tag in ("point2d", "subspace2d", "simplex_critical"):
        return 0.25
    if tag == "all_simplices":
        return (d - p) ** 2 / (4.0 * (1.0 + need()))
    if tag == "all_simplices_cross":
        v = need_positive()
        return (d - p) ** 2 / (4.0 * v * (1.0 + v))
    raise ValueError(f"unknown constant tag {tag!r}")


_KIND_TAG = {"K": "pairs", "K2d": "pairs2d", "C": "parallel", "C3d": "parallel3d", "Cp": "all_simplices"}


def constants_report(obj: RatioObjective, est: SupEstimate) -> dict:
    return {
        "kind": obj.kind,
        "d": obj.d,
        "N": obj.N,
        "p": obj.p,
        "estimate": est.value,
        "estimate_label": "certified lower bound on sup",
        "stated_bound": est.stated_bound,
        "within_bound": est.within_bound,
        "dispersion": est.dispersion,
        "restart_values": list(est.restart_values),
        "min_pair_distance": est.min_pair_distance,
        "argmax_cfg": est.argmax_cfg.to_json(),
        "alpha_opt": optimal_alpha(obj.kind, max(est.value, 0.0)),
        "hardy_constant": hardy_constant(_KIND_TAG[obj.kind], obj.d, obj.N, obj.p, max(est.value, 0.0)),
    }
