"""Randomised identity checks for the blade calculus and the particle sums.

Each check returns a :class:`CheckResult` with the worst relative error over
all trials.  Finite differences are the oracle for every derivative; all
stencil values are functions of s = |x ^ A|^2, so each stencil point costs
one wedge product.
"""

from __future__ import annotations

import math
from itertools import permutations
from typing import NamedTuple

import numpy as np

from . import ga_core as ga
from . import quantities as Q

GRAD_TOL = 1e-7
LAP_TOL = 1e-4
EXACT_TOL = 1e-12


class CheckResult(NamedTuple):
    name: str
    d: int
    p: int
    trials: int
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_err <= self.tol)

    def as_dict(self) -> dict:
        return {**self._asdict(), "passed": self.passed}


def _wedge_sq(x: np.ndarray, A: ga.Blade) -> float:
    return ga.wedge(ga.Multivector.from_vector(x), A.mv).norm_sq()


def _rel(num, ana, floor: float = 1e-300) -> float:
    num, ana = np.atleast_1d(num), np.atleast_1d(ana)
    return float(np.linalg.norm(num - ana) / max(np.linalg.norm(ana), floor))


def _random_pair(rng: np.random.Generator, d: int, p: int):
    """Random x and grade-p blade with x comfortably off the blade's subspace."""
    while True:
        vecs = rng.standard_normal((p, d))
        A = ga.Blade(list(vecs), dim=d)
        x = rng.standard_normal(d)
        if A.norm_sq() < 1e-3 * np.prod(np.sum(vecs**2, axis=1)):
            continue
        if _wedge_sq(x, A) < 0.05 * (x @ x) * A.norm_sq():
            continue
        return x, A


def _stencil(x: np.ndarray, A: ga.Blade, h: float):
    d = x.size
    s0 = _wedge_sq(x, A)
    plus = np.array([_wedge_sq(x + h * np.eye(d)[i], A) for i in range(d)])
    minus = np.array([_wedge_sq(x - h * np.eye(d)[i], A) for i in range(d)])
    return s0, plus, minus


def blade_checks(seed: int, trials: int, d: int, p: int) -> list[CheckResult]:
    """Derivative identities of |x ^ A|^2, its powers and its logarithm against finite differences."""
    rng = np.random.default_rng([seed, d, p])
    worst = {k: 0.0 for k in ("grad_sq", "grad_sq_norm", "lap_sq", "lap_pow", "lap_pow_zero",
                               "grad_log", "lap_log")}
    k = d - p
    for _ in range(trials):
        x, A = _random_pair(rng, d, p)
        a2 = A.norm_sq()
        scale = math.sqrt(x @ x)
        beta0 = -(k - 2) / 2.0
        # the Laplacian of s^beta vanishes at beta = 0 and beta0; keep the generic draw away from both
        beta = rng.uniform(-2.0, 2.0)
        while min(abs(beta), abs(beta - beta0)) < 0.1:
            beta = rng.uniform(-2.0, 2.0)
        R = float(np.exp(rng.uniform(-1, 1)))
        # first derivatives: fine stencil; second derivatives: coarser stencil
        h1 = 1e-6 * scale
        s0, sp, sm = _stencil(x, A, h1)
        h2 = 1e-3 * scale
        _, Sp, Sm = _stencil(x, A, h2)

        grad = ga.blade_grad_sq(x, A)
        worst["grad_sq"] = max(worst["grad_sq"], _rel((sp - sm) / (2 * h1), grad))
        worst["grad_sq_norm"] = max(worst["grad_sq_norm"], _rel(grad @ grad, 4 * a2 * s0))
        lap_fd = np.sum(Sp + Sm - 2 * s0) / h2**2
        bl = ga.blade_laplacians(x, A, beta, R)
        worst["lap_sq"] = max(worst["lap_sq"], _rel(lap_fd, 2 * k * a2))
        worst["lap_sq"] = max(worst["lap_sq"], _rel(bl.lap_sq, 2 * k * a2))

        def powlap(b, step, plus, minus):
            return np.sum(plus**b + minus**b - 2 * s0**b) / step**2

        # powers need a smaller stencil than the quadratic itself
        h3 = 1e-4 * scale
        _, Pp, Pm = _stencil(x, A, h3)
        worst["lap_pow"] = max(worst["lap_pow"], _rel(powlap(beta, h3, Pp, Pm), bl.lap_pow))
        zero_fd = powlap(beta0, h3, Pp, Pm)
        typical = abs(beta0) * (abs(beta0) + 1) * a2 * s0 ** (beta0 - 1.0) + a2 * s0 ** (beta0 - 1.0)
        b0 = ga.blade_laplacians(x, A, beta0, R).lap_pow
        worst["lap_pow_zero"] = max(worst["lap_pow_zero"], abs(zero_fd) / typical, abs(b0) / typical)

        lnp = 0.5 * np.log(sp) - math.log(R)
        lnm = 0.5 * np.log(sm) - math.log(R)
        worst["grad_log"] = max(worst["grad_log"], _rel((lnp - lnm) / (2 * h1), bl.grad_log))
        LP = 0.5 * np.log(Pp)
        LM = 0.5 * np.log(Pm)
        lap_log_fd = np.sum(LP + LM - 2 * 0.5 * np.log(s0)) / h3**2
        floor = a2 / s0
        worst["lap_log"] = max(worst["lap_log"], abs(lap_log_fd - bl.lap_log) / max(abs(bl.lap_log), floor))
    tols = {"grad_sq": GRAD_TOL, "grad_sq_norm": GRAD_TOL, "lap_sq": LAP_TOL, "lap_pow": LAP_TOL,
            "lap_pow_zero": LAP_TOL, "grad_log": GRAD_TOL, "lap_log": LAP_TOL}
    return [CheckResult(name, d, p, trials, worst[name], tols[name]) for name in worst]


def _parity(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def permutation_checks(seed: int, trials: int, max_points: int = 6, max_dim: int = 6) -> list[CheckResult]:
    """Relabelling the vertices leaves |A| fixed and multiplies A by the permutation's parity."""
    rng = np.random.default_rng([seed, 17])
    out = []
    for N in range(2, max_points + 1):
        d = max(N - 1, 2)
        if d > max_dim:
            continue
        worst = 0.0
        perms = list(permutations(range(N)))
        for _ in range(trials):
            # nearly flat simplices lose relative accuracy to cancellation; redraw them
            while True:
                pts = rng.standard_normal((N, d))
                edges = pts[:-1] - pts[-1]
                A = ga.wedge_all(list(edges), d)
                if A.norm() >= 0.05 * np.prod(np.linalg.norm(edges, axis=1)):
                    break
            for idx in rng.choice(len(perms), size=min(len(perms), 6), replace=False):
                perm = perms[idx]
                P = pts[list(perm)]
                B = ga.wedge_all([P[k] - P[-1] for k in range(N - 1)], d)
                sgn = _parity(perm)
                norm = A.norm()
                worst = max(worst, np.max(np.abs(B.coeffs - sgn * A.coeffs)) / norm,
                            abs(B.norm() - norm) / norm)
        out.append(CheckResult("simplex_permutation", d, N, trials, float(worst), EXACT_TOL))
    return out


def particle_identity_checks(seed: int, trials: int) -> list[CheckResult]:
    """sum_k sum_{i<j} (x_k - x_i).(x_k - x_j) = (N - 2)/2 * rho^2 on random configurations."""
    rng = np.random.default_rng([seed, 32])
    worst: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    for _ in range(trials):
        N = int(rng.integers(2, 7))
        d = int(rng.integers(1, 5))
        cfg = Q.Configuration(rng.standard_normal((N, d)) * rng.uniform(0.1, 10.0))
        lhs = Q.particle_sum(cfg)
        rho2 = Q.rho_sq(cfg)
        err = abs(lhs - 0.5 * (N - 2) * rho2) / (max(N - 2, 1) * rho2)
        worst[d, N] = max(worst.get((d, N), 0.0), err)
        counts[d, N] = counts.get((d, N), 0) + 1
    return [CheckResult("particle_sum", d, N, counts[d, N], worst[d, N], EXACT_TOL)
            for d, N in sorted(worst)]


def quantity_checks(seed: int, trials: int) -> list[CheckResult]:
    """Cross-path invariants: wedge vs Gram volumes, facet sums vs sub-blades, two-point Xi."""
    rng = np.random.default_rng([seed, 99])
    vol = facet = xi = 0.0
    for _ in range(trials):
        N = int(rng.integers(2, 5))
        d = int(rng.integers(N - 1, 6)) if N > 2 else int(rng.integers(1, 6))
        pts = rng.standard_normal((N, d))
        v1, v2 = Q.simplex_volume(pts), Q.simplex_volume_gram(pts)
        vol = max(vol, abs(v1 - v2) / max(v2, 1e-300))
        if d >= N - 1 and N >= 2:
            s1, s2 = Q.sigma_simplex(pts), Q.sigma_simplex_blade(pts)
            facet = max(facet, abs(s1 - s2) / s2)
        tri = rng.standard_normal((3, 3))
        ratio = Q.xi_pq(tri, 2) / Q.circumradius_inv_sq(Q.Configuration(tri), 0, 1, 2)
        xi = max(xi, abs(ratio - 2.0) / 2.0)
    return [
        CheckResult("volume_wedge_vs_gram", 0, 0, trials, vol, 1e-10),
        CheckResult("facet_sum_two_paths", 0, 0, trials, facet, 1e-10),
        CheckResult("xi_23_twice_circumradius", 0, 0, trials, xi, 1e-10),
    ]


def run_suite(seed: int, trials: int, max_dim: int = 6) -> dict:
    """Everything the ``identities`` command runs; empty when trials == 0."""
    checks: list[CheckResult] = []
    if trials > 0:
        for d in range(2, max_dim + 1):
            for p in range(1, d):
                checks.extend(blade_checks(seed, trials, d, p))
        checks.extend(permutation_checks(seed, max(1, trials // 10), max_dim=max_dim))
        checks.extend(particle_identity_checks(seed, 10 * trials))
        checks.extend(quantity_checks(seed, trials))
    return {"checks": [c.as_dict() for c in checks], "passed": all(c.passed for c in checks)}
