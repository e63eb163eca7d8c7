"""Rayleigh quotients of the trial family u_delta = f^((1 - delta)/2) exp(-|x|/2).

For a ground state f with g = grad log f,

    |grad u_delta|^2 = u_delta^2 [ (1-delta)^2/4 |g|^2 - (1-delta)/2 g.x/|x| + 1/4 ],

so the quotient  Q = int |grad u|^2 / int (|g|^2/4) u^2  only needs

    I1 = int f^(1-delta) e^-|x|,   I2 = int |g|^2 f^(1-delta) e^-|x|,   J = int (g.x/|x|) f^(1-delta) e^-|x|.

Every supported family is, near its singular set, a power t^-e of a distance t in a
perpendicular block of dimension e + 2.  Samples are drawn in split coordinates:
t from a Gamma law of shape e*delta (drawn in log space, so tiny shapes do not
underflow), the other blocks from radial Gamma laws under an e^-|.|/s envelope.
With that proposal the I2 weights are bounded, which keeps Q(delta) well
conditioned even as delta -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import helmert
from scipy.special import gammaln

from .gsr_engine import Family, FamilyError, GroundStateSpec, IntegrationSpec, _log_derivatives, default_alpha
from . import kernels as K

SUITE = (
    ("subspace", 4, 1, 0),
    ("subspace", 5, 1, 2),
    ("separation", 3, 2, 0),
    ("parallel", 5, 2, 0),
    ("simplex", 5, 3, 0),
)
SUITE_DELTAS = (0.2, 0.1, 0.05, 0.01)
Q_TARGET = 1.1


class NonIntegrableError(ArithmeticError):
    pass


def _log_sphere(k: int) -> float:
    """log of the surface area of the unit sphere in R^k."""
    return math.log(2.0) + 0.5 * k * math.log(math.pi) - gammaln(0.5 * k)


@dataclass(frozen=True, eq=False)
class SharpnessProbe:
    spec: GroundStateSpec
    delta: float

    def __post_init__(self):
        s = self.spec
        ok = (
            s.family is Family.SUBSPACE
            or s.family is Family.SEPARATION
            or (s.family is Family.PARALLEL and s.N == 2)
            or s.family is Family.SIMPLEX
        )
        if not ok:
            raise FamilyError(f"no trial family for {s.family.value} with N={s.N}")
        if s.family is Family.SUBSPACE and s.blade is not None:
            if not np.allclose(np.array(s.blade).reshape(s.p, s.d), np.eye(s.d)[: s.p]):
                raise FamilyError("trial family uses the coordinate subspace; pass blade=None")
        if self.delta == 0:
            raise ValueError("delta must be nonzero")
        if self.exponent == 0:
            raise FamilyError("ground state is constant; there is no Hardy constant to test")

    @property
    def exponent(self) -> int:
        """e with f ~ t^-e near the singular set (t = distance in the perpendicular block)."""
        s = self.spec
        if s.family is Family.SUBSPACE:
            return s.d - s.p - 2
        if s.family is Family.SEPARATION:
            return (s.N - 1) * s.d - 2
        if s.family is Family.PARALLEL:
            return s.d - 3
        return s.d - s.N

    @property
    def power(self) -> float:
        """Exponent turning the stored ground state into the one whose |g|^2/4 is the weight."""
        if self.spec.family is Family.SEPARATION:
            return 2.0 * default_alpha(Family.SEPARATION, self.spec.d, self.spec.N, 0)
        return 1.0

    @property
    def effective_delta(self) -> float:
        """delta with the sign reversed when f vanishes on the singular set."""
        return self.delta if self.exponent > 0 else -self.delta

    @property
    def perp_dim(self) -> int:
        return self.exponent + 2

    def manifest(self) -> dict:
        return {**self.spec.manifest(), "delta": self.delta, "effective_delta": self.effective_delta}


# Cartesian evaluation -------------------------------------------------------------

def u_delta(probe: SharpnessProbe, x) -> np.ndarray:
    X, single = K.as_batch(x, probe.spec.N, probe.spec.d)
    ld = _log_derivatives(probe.spec, X)
    r = np.linalg.norm(X.reshape(X.shape[0], -1), axis=1)
    out = np.exp(0.5 * (1 - probe.effective_delta) * probe.power * ld.logf - 0.5 * r)
    return out[0] if single else out


def grad_u_delta(probe: SharpnessProbe, x) -> np.ndarray:
    X, single = K.as_batch(x, probe.spec.N, probe.spec.d)
    flat = X.reshape(X.shape[0], -1)
    ld = _log_derivatives(probe.spec, X)
    r = np.linalg.norm(flat, axis=1)
    de = probe.effective_delta
    u = np.exp(0.5 * (1 - de) * probe.power * ld.logf - 0.5 * r)
    out = u[:, None] * (0.5 * (1 - de) * probe.power * ld.g - 0.5 * flat / r[:, None])
    return out[0] if single else out


# split-coordinate sampling ---------------------------------------------------------

class _Draw(NamedTuple):
    x: np.ndarray        # Cartesian samples (n, N*d); the singular distance may underflow here
    log_q: np.ndarray    # log proposal density in R^(N*d)
    logf: np.ndarray     # log of the effective ground state, computed with log t
    log_g2: np.ndarray   # log |g|^2
    gx: np.ndarray       # g . x
    log_r: np.ndarray    # log |x|, kept exact when |x| itself underflows


def _log_gamma_variate(rng, shape: float, scale: float, m: int) -> np.ndarray:
    # G(a) = G(a+1) U^(1/a) keeps tiny shapes representable in log space
    return np.log(rng.gamma(shape + 1.0, scale, m)) + np.log(rng.random(m)) / shape


def _log_gamma_pdf(log_r: np.ndarray, shape: float, scale: float) -> np.ndarray:
    return (shape - 1.0) * log_r - np.exp(log_r) / scale - gammaln(shape) - shape * math.log(scale)


def _radial_block(rng, m: int, dim: int, shape: float, scale: float):
    """Vector in R^dim with radius ~ Gamma(shape, scale); returns (vectors, log_radius, log_density)."""
    log_r = _log_gamma_variate(rng, shape, scale, m)
    z = rng.standard_normal((m, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    vec = z * np.exp(log_r)[:, None]
    log_q = _log_gamma_pdf(log_r, shape, scale) - (dim - 1) * log_r - _log_sphere(dim)
    return vec, log_r, log_q


def _orth_complement_unit(rng, basis: np.ndarray) -> np.ndarray:
    """Uniform unit vectors orthogonal to the rows of basis (n, k, dim)."""
    n, k, dim = basis.shape
    z = rng.standard_normal((n, dim))
    if k:
        z -= np.einsum("nkd,nk->nd", basis, np.einsum("nkd,nd->nk", basis, z))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _tail_shape(probe: SharpnessProbe) -> float:
    a = probe.exponent * probe.effective_delta
    # outside the integrable regime fall back to a flat radial law; weights then blow up
    return a if a > 0 else 1.0


def _draw_split(probe: SharpnessProbe, rng, m: int, basis: np.ndarray, logf_offset: float) -> _Draw:
    """Subspace and separation: x = par coordinates (first rows of basis) + perp block."""
    e = probe.exponent
    k = probe.perp_dim
    par_dim = basis.shape[0] - k
    scale = math.sqrt(2.0 if par_dim else 1.0)
    perp, log_t, lq = _radial_block(rng, m, k, _tail_shape(probe), scale)
    coords = np.zeros((m, basis.shape[0]))
    coords[:, par_dim:] = perp
    if par_dim:
        par, _, lq_par = _radial_block(rng, m, par_dim, float(par_dim), scale)
        coords[:, :par_dim] = par
        lq = lq + lq_par
    x = coords @ basis
    logf = logf_offset - e * log_t
    log_g2 = 2.0 * math.log(abs(e)) - 2.0 * log_t
    gx = np.full(m, -float(e))
    if par_dim:
        with np.errstate(divide="ignore"):
            log_par = np.log(np.linalg.norm(coords[:, :par_dim], axis=1))
        log_r = 0.5 * np.logaddexp(2 * log_par, 2 * log_t)
    else:
        log_r = log_t
    return _Draw(x, lq, logf, log_g2, gx, log_r)


def _subspace_draw(probe, rng, m):
    return _draw_split(probe, rng, m, np.eye(probe.spec.d), 0.0)


def _separation_basis(N: int, d: int) -> np.ndarray:
    """Orthonormal rows: d centre-of-mass directions, then a basis of the relative coordinates."""
    diag = np.kron(np.ones((N, 1)) / math.sqrt(N), np.eye(d))      # (N d, d)
    q, _ = np.linalg.qr(np.hstack([diag, np.eye(N * d)]))
    basis = q[:, : N * d].T
    basis[:d] = diag.T
    return basis


def _separation_draw(probe, rng, m):
    s = probe.spec
    e = probe.exponent
    # f_eff = rho^-e with rho = sqrt(N) t
    draw = _draw_split(probe, rng, m, _separation_basis(s.N, s.d), -0.5 * e * math.log(s.N))
    return draw


def _parallel_draw(probe, rng, m):
    d = probe.spec.d
    e = probe.exponent
    de = probe.effective_delta
    scale = math.sqrt(3.0)
    shape1 = 1.0 + e * de if 1.0 + e * de > 0 else 1.0
    x1, log_r1, lq1 = _radial_block(rng, m, d, shape1, scale)
    a = rng.laplace(0.0, scale, m)
    lqa = -np.abs(a) / scale - math.log(2.0 * scale)
    log_t = _log_gamma_variate(rng, _tail_shape(probe), scale, m)
    lqt = _log_gamma_pdf(log_t, _tail_shape(probe), scale) - (d - 2) * log_t - _log_sphere(d - 1)
    u1 = x1 / np.exp(log_r1)[:, None]
    w = _orth_complement_unit(rng, u1[:, None, :])
    x2 = a[:, None] * u1 + np.exp(log_t)[:, None] * w
    x = np.hstack([x1, x2])
    logf = -e * (log_r1 + log_t)
    r1sq = np.exp(2 * log_r1)
    tot = r1sq + a**2 + np.exp(2 * log_t)
    log_g2 = 2 * math.log(abs(e)) + np.log(tot) - 2 * log_r1 - 2 * log_t
    gx = np.full(m, -2.0 * e)
    return _Draw(x, lqa + lq1 + lqt, logf, log_g2, gx, 0.5 * np.log(tot))


def _facet_sum(Y: np.ndarray) -> np.ndarray:
    """Sum over vertices of squared facet wedges for edge vectors Y = x_k - x_N, shape (m, N-1, d)."""
    m, q, d = Y.shape
    tot = np.zeros(m)
    for k in range(q):
        E = np.delete(Y, k, axis=1)
        tot += np.linalg.det(E @ np.swapaxes(E, 1, 2)) if E.shape[1] else 1.0
    # facet opposite the base vertex: edges y_j - y_last
    E = Y[:, :-1] - Y[:, -1:]
    tot += np.linalg.det(E @ np.swapaxes(E, 1, 2)) if E.shape[1] else 1.0
    return tot


def _simplex_draw(probe, rng, m):
    # orthonormal Helmert coordinates: centroid block c and relative blocks xi_1..xi_{N-1};
    # the simplex wedge is sqrt(N) xi_1 ^ ... ^ xi_{N-1}
    s = probe.spec
    d, N = s.d, s.N
    e = probe.exponent
    de = probe.effective_delta
    k = probe.perp_dim
    par_dim = N - 2
    scale = math.sqrt(N + 1 if par_dim else 2)
    c, _, lq = _radial_block(rng, m, d, float(d), scale)
    shape_xi = 1.0 + e * de if 1.0 + e * de > 0 else 1.0
    xis = []
    for _ in range(par_dim):
        xi, _, lqx = _radial_block(rng, m, d, shape_xi, scale)
        xis.append(xi)
        lq = lq + lqx
    if xis:
        Qb, Rb = np.linalg.qr(np.stack(xis, axis=2))                  # (m, d, N-2)
        onb = np.swapaxes(Qb, 1, 2)
        log_B = np.sum(np.log(np.abs(np.diagonal(Rb, axis1=1, axis2=2))), axis=1)
        cpar, log_par, lqp = _radial_block(rng, m, par_dim, float(par_dim), scale)
        last = np.einsum("mk,mkd->md", cpar, onb)
        lq = lq + lqp
    else:
        onb = np.zeros((m, 0, d))
        log_B = np.zeros(m)
        last = np.zeros((m, d))
        log_par = np.full(m, -np.inf)
    log_t = _log_gamma_variate(rng, _tail_shape(probe), scale, m)
    lq = lq + _log_gamma_pdf(log_t, _tail_shape(probe), scale) - (k - 1) * log_t - _log_sphere(k)
    last = last + np.exp(log_t)[:, None] * _orth_complement_unit(rng, onb)
    blocks = np.stack([c, *xis, last], axis=1)                        # (m, N, d)
    X = np.einsum("jk,mjd->mkd", helmert(N, full=True), blocks)
    logf = -e * (0.5 * math.log(N) + log_B + log_t)
    Y = X[:, :-1] - X[:, -1:]
    log_g2 = 2 * math.log(abs(e)) + np.log(_facet_sum(Y)) - math.log(N) - 2 * log_B - 2 * log_t
    gx = np.full(m, -float(e * (N - 1)))
    rest = np.einsum("mjd,mjd->m", blocks[:, :-1], blocks[:, :-1])
    with np.errstate(divide="ignore"):
        log_last = np.logaddexp(2 * log_par, 2 * log_t)
        log_r = 0.5 * np.logaddexp(np.log(rest), log_last)
    return _Draw(X.reshape(m, -1), lq, logf, log_g2, gx, log_r)


_DRAWERS = {
    Family.SUBSPACE: _subspace_draw,
    Family.SEPARATION: _separation_draw,
    Family.PARALLEL: _parallel_draw,
    Family.SIMPLEX: _simplex_draw,
}


def draw(probe: SharpnessProbe, rng: np.random.Generator, m: int) -> _Draw:
    return _DRAWERS[probe.spec.family](probe, rng, m)


# integrals --------------------------------------------------------------------

class TrialIntegrals(NamedTuple):
    I1: float
    I2: float
    J: float
    I1_stderr: float
    I2_stderr: float
    Q: float
    Q_stderr: float
    max_weight_share: float
    prefix_I1: tuple
    prefix_I2: tuple


def _weights(probe: SharpnessProbe, dr: _Draw):
    de = probe.effective_delta
    lw = (1.0 - de) * dr.logf - np.exp(dr.log_r) - dr.log_q
    w1 = np.exp(lw)
    w2 = np.exp(lw + dr.log_g2)
    wj = dr.gx * np.exp(lw - dr.log_r)
    return w1, w2, wj


def _integrate(probe: SharpnessProbe, quad: IntegrationSpec) -> TrialIntegrals:
    # at least four blocks so the prefix (sample-doubling) estimates exist
    block = min(quad.block_size, max(1, quad.samples // 4))
    q = IntegrationSpec(quad.samples, quad.seed, block)
    parts = []
    for rng, m in q.blocks():
        parts.append(np.column_stack(_weights(probe, draw(probe, rng, m))))
    W = np.vstack(parts)
    n = W.shape[0]
    with np.errstate(all="ignore"):
        I1, I2, J = W.mean(axis=0)
        se = W.std(axis=0, ddof=1) / math.sqrt(n)
        de = probe.effective_delta
        num = (1 - de) ** 2 / 4 * W[:, 1] - (1 - de) / 2 * W[:, 2] + 0.25 * W[:, 0]
        den = 0.25 * W[:, 1]
        Qv = num.mean() / den.mean()
        Q_se = (num - Qv * den).std(ddof=1) / math.sqrt(n) / den.mean()
        share = float(max(W[:, 0].max() / W[:, 0].sum(), W[:, 1].max() / W[:, 1].sum()))
        prefix = tuple(float(W[: max(1, n * j // 4), 0].mean()) for j in (1, 2, 4))
        prefix2 = tuple(float(W[: max(1, n * j // 4), 1].mean()) for j in (1, 2, 4))
    return TrialIntegrals(float(I1), float(I2), float(J), float(se[0]), float(se[1]),
                          float(Qv), float(Q_se), share, prefix, prefix2)


def _diverging(res: TrialIntegrals) -> bool:
    if not all(np.isfinite([res.I1, res.I2, res.J])):
        return True
    if res.max_weight_share > 0.5:
        return True
    for prefix in (res.prefix_I1, res.prefix_I2):
        p = np.array(prefix)
        if np.ptp(p) > 0.25 * np.abs(p).max():
            return True
    return False


def trial_integrals(probe: SharpnessProbe, quad: IntegrationSpec) -> TrialIntegrals:
    """I1, I2 (and J, Q) by importance sampling; raises NonIntegrableError on divergence.

    Near the singular set the I1 and I2 integrands behave like t^(a+1) and t^(a-1)
    in the perpendicular radius, a = exponent * effective delta, so a <= 0 is
    rejected before sampling; anything else must also be stable under sample doubling.
    """
    a = probe.exponent * probe.effective_delta
    if a <= 0:
        which = "I1 and I2 diverge" if a <= -2 else "I2 diverges"
        raise NonIntegrableError(f"{probe.spec.family.value}: delta={probe.delta} is outside the "
                                 f"integrable range ({which} at the singular set)")
    res = _integrate(probe, quad)
    if _diverging(res):
        raise NonIntegrableError(
            f"{probe.spec.family.value}: delta={probe.delta} gives unstable estimates "
            f"(max weight share {res.max_weight_share:.2f}, prefix I1 {res.prefix_I1}, prefix I2 {res.prefix_I2})")
    return res


def rayleigh_ratio(probe: SharpnessProbe, quad: IntegrationSpec) -> tuple[float, float]:
    res = trial_integrals(probe, quad)
    return res.Q, res.Q_stderr


# sweeps -------------------------------------------------------------------------

def sweep(spec: GroundStateSpec, deltas=SUITE_DELTAS, quad: IntegrationSpec | None = None) -> dict:
    """Q(delta) over a delta sweep plus the two integral conditions; verdict is numerical evidence only."""
    quad = quad or IntegrationSpec(samples=400_000, seed=0)
    rows = []
    error = None
    for dl in deltas:
        probe = SharpnessProbe(spec, dl)
        try:
            res = trial_integrals(probe, quad)
        except NonIntegrableError as exc:
            error = str(exc)
            rows.append(None)
            continue
        rows.append(res)
    out = {
        "family": spec.family.value,
        "params": {"d": spec.d, "N": spec.N, "p": spec.p},
        "deltas": [float(x) for x in deltas],
        "effective_deltas": [SharpnessProbe(spec, x).effective_delta for x in deltas],
        "integration": quad.manifest(),
    }
    if error is not None:
        out.update({"Q_values": None, "verdict": "non-integrable", "error": error, "sharpness_consistent": False})
        return out
    Qs = [r.Q for r in rows]
    order = np.argsort(deltas)[::-1]                       # from the largest delta down
    Q_desc = [Qs[i] for i in order]
    monotone = all(b < a for a, b in zip(Q_desc, Q_desc[1:]))
    q_min = Qs[int(np.argmin(np.abs(deltas)))]
    i1 = {float(dl): r.I1 for dl, r in zip(deltas, rows)}
    probe_set = [x for x in (0.05, 0.1, 0.2) if x in i1]
    i1_var = (max(i1[x] for x in probe_set) / min(i1[x] for x in probe_set) - 1.0) if len(probe_set) > 1 else None
    i2_growth = (rows[list(deltas).index(0.05)].I2 / rows[list(deltas).index(0.2)].I2
                 if 0.05 in i1 and 0.2 in i1 else None)
    consistent = monotone and q_min <= Q_TARGET
    out.update({
        "Q_values": Qs,
        "Q_stderr": [r.Q_stderr for r in rows],
        "I1": [r.I1 for r in rows],
        "I2": [r.I2 for r in rows],
        "I1_variation": i1_var,
        "I2_growth": i2_growth,
        "monotone": monotone,
        "Q_at_smallest_delta": q_min,
        "sharpness_consistent": bool(consistent),
        "verdict": "sharpness-consistent (numerical evidence, not proof)" if consistent else "not sharpness-consistent",
    })
    return out


def sharpness_suite(quad: IntegrationSpec | None = None, deltas=SUITE_DELTAS) -> dict:
    results = [sweep(GroundStateSpec(f, d, N, p), deltas, quad) for f, d, N, p in SUITE]
    return {"sweeps": results, "all_consistent": all(r["sharpness_consistent"] for r in results)}
