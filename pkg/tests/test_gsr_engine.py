from __future__ import annotations

import math

import numpy as np
import pytest

from gsrhardy import kernels as Kn
from gsrhardy.gsr_engine import (
    DomainError, Family, FamilyError, GroundStateSpec, IntegrationSpec, TestFunctionSpec,
    check_support, default_alpha, default_test_function, gs_grad, gs_laplacian, gs_value,
    gsr_potential, gsr_residual, hardy_deficit, in_domain, laplacian_over_f, log_derivatives,
    parse_family, weight,
)

FAMILIES = [
    ("point", 3, 1, 0), ("point", 5, 1, 0), ("point2d", 2, 1, 0),
    ("subspace", 5, 1, 2), ("subspace", 3, 1, 2), ("subspace2d", 4, 1, 2),
    ("separation", 3, 3, 0), ("pair3d", 3, 3, 0), ("pair3d", 4, 4, 0),
    ("pair1d", 1, 4, 0), ("pair2d", 2, 3, 0), ("coord", 1, 3, 0),
    ("parallel", 5, 3, 0), ("parallel", 2, 3, 0), ("parallel3d", 3, 3, 0),
    ("simplex", 5, 3, 0), ("simplex", 2, 3, 0), ("simplex_critical", 3, 3, 0),
    ("all_simplices", 4, 4, 3), ("all_simplices", 5, 3, 2),
]
IDS = [f"{f}-d{d}-N{N}-p{p}" for f, d, N, p in FAMILIES]


def _points_near_center(spec, n=5, seed=0):
    u = default_test_function(spec)
    rng = np.random.default_rng(seed)
    x = u.center + 0.5 * u.radius * rng.uniform(-1, 1, (n, spec.size)) / math.sqrt(spec.size)
    assert in_domain(spec, x).all()
    return x, u.radius


@pytest.mark.parametrize("fam,d,N,p", FAMILIES, ids=IDS)
def test_log_derivatives_match_finite_differences(fam, d, N, p):
    spec = GroundStateSpec(fam, d, N, p)
    x, radius = _points_near_center(spec)
    n = spec.size
    eye = np.eye(n)
    for xi in x:
        ld = log_derivatives(spec, xi)
        h1 = 1e-6 * radius
        logf = lambda y: log_derivatives(spec, y).logf
        fd_g = np.array([(logf(xi + h1 * eye[i]) - logf(xi - h1 * eye[i])) / (2 * h1) for i in range(n)])
        assert np.linalg.norm(fd_g - ld.g) <= 1e-6 * max(np.linalg.norm(ld.g), 1e-3)
        h2 = 1e-3 * radius
        fd_h = sum(logf(xi + h2 * eye[i]) + logf(xi - h2 * eye[i]) - 2 * ld.logf for i in range(n)) / h2**2
        scale = max(abs(ld.h), float(ld.g @ ld.g), 1.0 / radius**2 * 1e-3)
        assert abs(fd_h - ld.h) <= 1e-4 * scale


@pytest.mark.parametrize("fam,d,N,p", FAMILIES, ids=IDS)
def test_value_grad_laplacian_consistent(fam, d, N, p):
    spec = GroundStateSpec(fam, d, N, p)
    x, _ = _points_near_center(spec, n=3, seed=1)
    f = gs_value(spec, x)
    ld = log_derivatives(spec, x)
    np.testing.assert_allclose(f, np.exp(ld.logf), rtol=1e-12)
    np.testing.assert_allclose(gs_grad(spec, x), ld.g * f[:, None], rtol=1e-12)
    lap_over_f = np.einsum("ij,ij->i", ld.g, ld.g) + ld.h
    np.testing.assert_allclose(laplacian_over_f(spec, x), lap_over_f, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(gs_laplacian(spec, x), lap_over_f * f, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("fam,d,N,p", FAMILIES, ids=IDS)
def test_potential_formula(fam, d, N, p):
    spec = GroundStateSpec(fam, d, N, p)
    x, _ = _points_near_center(spec, n=4, seed=2)
    ld = log_derivatives(spec, x)
    g2 = np.einsum("ij,ij->i", ld.g, ld.g)
    for a in (0.2, 0.5, 0.8, spec.alpha):
        expect = a * (1 - a) * g2 - a * (g2 + ld.h)
        np.testing.assert_allclose(gsr_potential(spec, x, a), expect, rtol=1e-10, atol=1e-12 * np.max(np.abs(expect)))


def test_point_and_subspace_potentials():
    rng = np.random.default_rng(3)
    for d, p in [(3, 0), (5, 0), (5, 2), (6, 1)]:
        spec = GroundStateSpec("subspace" if p else "point", d, 1, p)
        x = rng.standard_normal((6, d))
        dist2 = np.sum(x[:, p:] ** 2, axis=1)
        np.testing.assert_allclose(gsr_potential(spec, x), (d - p - 2) ** 2 / 4 / dist2, rtol=1e-12)


def test_pair_and_parallel_decompositions():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((8, 4, 3))
    spec = GroundStateSpec("pair3d", 3, 4)
    S1, S2 = Kn.sum_inv_r_sq(X), Kn.sum_inv_circumradius_sq(X)
    for a in (0.2, 1 / 3, 0.7):
        np.testing.assert_allclose(gsr_potential(spec, X.reshape(8, -1), a),
                                   (3 - 2) ** 2 * (2 * a * (1 - a) * S1 - a**2 * S2), rtol=1e-10)
    X = rng.standard_normal((8, 3, 5))
    spec = GroundStateSpec("parallel", 5, 3)
    s1, s2 = Kn.sigma12_parallel(X)
    for a in (0.25, 0.5):
        np.testing.assert_allclose(gsr_potential(spec, X.reshape(8, -1), a),
                                   (5 - 3) ** 2 * (a * (1 - a) * s1 - a**2 * s2), rtol=1e-10)
    spec = GroundStateSpec("all_simplices", 5, 4, 3)
    X = rng.standard_normal((8, 4, 5))
    s1, s2 = Kn.sigma12_volume(X, 3)
    np.testing.assert_allclose(gsr_potential(spec, X.reshape(8, -1), 0.3),
                               (5 - 3) ** 2 * (0.3 * 0.7 * s1 - 0.09 * s2), rtol=1e-10)


def test_simplex_potential_is_weight_times_constant():
    rng = np.random.default_rng(5)
    spec = GroundStateSpec("simplex", 6, 4)
    x = rng.standard_normal((6, 24))
    np.testing.assert_allclose(gsr_potential(spec, x), (6 - 4) ** 2 / 4 * weight(spec, "sigma_simplex", x), rtol=1e-10)


def test_coord_product_potential_at_ones():
    spec = GroundStateSpec("coord", 1, 2)
    assert gsr_potential(spec, np.array([1.0, 1.0])) == pytest.approx(1.0, rel=1e-14)
    assert weight(spec, "coord_potential", np.array([1.0, 1.0])) == pytest.approx(1.0, rel=1e-14)


def test_separation_default_alpha_and_potential():
    spec = GroundStateSpec("separation", 3, 2)
    assert spec.alpha == pytest.approx(-(3 - 2) / 4)
    x = np.array([0.3, -0.1, 0.2, 1.5, 0.4, -0.7])
    rho2 = Kn.rho_sq(x.reshape(1, 2, 3))[0]
    assert gsr_potential(spec, x) == pytest.approx(2 * ((3 - 2) / 2) ** 2 / rho2, rel=1e-10)


def test_aliases_and_defaults():
    assert parse_family("PointHardy") is Family.POINT
    assert parse_family("SubspaceHardy2d") is Family.SUBSPACE_2D
    assert parse_family("Parallelity3d") is Family.PARALLEL_3D
    with pytest.raises(FamilyError):
        parse_family("no-such-family")
    assert default_alpha(Family.POINT, 3, 1, 0) == 0.5
    assert default_alpha(Family.PAIR_3D, 3, 3, 0) == pytest.approx(1 / 3)
    assert default_alpha(Family.PARALLEL, 5, 4, 0) == pytest.approx(1 / 6)
    spec = GroundStateSpec("pair2d", 2, 3)
    assert spec.R == 1.0 and spec.is_optimal_alpha
    assert spec.manifest()["alpha"] == pytest.approx(1 / 4)
    assert not spec.with_alpha(0.2).is_optimal_alpha


@pytest.mark.parametrize("fam,d,N,p", [
    ("subspace", 4, 1, 2), ("point", 2, 1, 0), ("pair3d", 2, 3, 0), ("pair2d", 3, 2, 0),
    ("parallel", 3, 3, 0), ("simplex", 3, 3, 0), ("simplex_critical", 4, 3, 0), ("all_simplices", 3, 3, 3),
    ("coord", 2, 2, 0), ("separation", 3, 1, 0),
])
def test_invalid_parameter_combinations(fam, d, N, p):
    with pytest.raises(FamilyError):
        GroundStateSpec(fam, d, N, p)


def test_critical_codimension_points_to_2d_family():
    with pytest.raises(FamilyError, match="subspace2d"):
        GroundStateSpec("subspace", 4, 1, 2)


def test_domain_errors():
    spec = GroundStateSpec("pair3d", 3, 2)
    with pytest.raises(DomainError):
        gsr_potential(spec, np.array([1.0, 0, 0, 1.0, 0, 0]))
    spec = GroundStateSpec("pair2d", 2, 2)
    assert not in_domain(spec, np.array([0.6, 0, 0, 0.1]))[0]           # outside B_{R/2}
    spec = GroundStateSpec("point2d", 2)
    assert not in_domain(spec, np.array([1.0, 0.0]))[0]                 # |x| = R: log factor vanishes
    spec = GroundStateSpec("simplex_critical", 2, 2)
    assert not in_domain(spec, np.array([0, 0, 3.0, 0]))[0]             # volume above R
    spec = GroundStateSpec("coord", 1, 2)
    with pytest.raises(DomainError):
        gsr_potential(spec, np.array([0.0, 1.0]))


def test_support_check_rejects_bumps_over_singular_set():
    spec = GroundStateSpec("point", 3)
    assert check_support(spec, TestFunctionSpec([3.0, 0, 0], 1.0))
    assert not check_support(spec, TestFunctionSpec([0.5, 0, 0], 1.0))
    # thin singular sets: a coordinate hyperplane and a coincidence plane
    assert not check_support(GroundStateSpec("coord", 1, 2), TestFunctionSpec([0.3, 2.0], 1.0))
    assert not check_support(GroundStateSpec("pair1d", 1, 3), TestFunctionSpec([0, 0.5, 3], 1.0))
    assert check_support(GroundStateSpec("pair1d", 1, 3), TestFunctionSpec([0, 3, 6], 1.0))
    spec = GroundStateSpec("point2d", 2)
    assert not check_support(spec, TestFunctionSpec([1.0, 0.0], 0.2))   # straddles |x| = R
    with pytest.raises(DomainError):
        gsr_residual(spec, TestFunctionSpec([1.0, 0.0], 0.2), IntegrationSpec(samples=1000))


def test_bump_gradient():
    u = TestFunctionSpec([0.2, -0.1, 0.4], 0.7)
    rng = np.random.default_rng(6)
    x = u.center + 0.3 * rng.standard_normal((5, 3))
    h = 1e-6
    fd = np.stack([(u.value(x + h * e) - u.value(x - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
    np.testing.assert_allclose(u.grad(x), fd, rtol=1e-6, atol=1e-10)
    assert u.value(u.center + np.array([0.7, 0, 0]))[0] == 0.0


def test_gsr_residual_small_and_reproducible():
    spec = GroundStateSpec("pair3d", 3, 3)
    u = default_test_function(spec)
    quad = IntegrationSpec(samples=100_000, seed=11, block_size=10_000)
    a = gsr_residual(spec, u, quad)
    b = gsr_residual(spec, u, quad)
    assert a == b
    assert a.passed and a.rhs >= 0 and a.lhs > 0
    c = gsr_residual(spec, u, IntegrationSpec(samples=100_000, seed=12, block_size=10_000))
    assert c.lhs != a.lhs


def test_residual_detects_wrong_potential():
    # feeding the alpha = 0.5 potential with an alpha = 0.2 remainder must break the identity
    spec = GroundStateSpec("point", 5)
    u = TestFunctionSpec([1.2, 0, 0, 0, 0], 1.0)
    quad = IntegrationSpec(samples=200_000, seed=0)
    good = gsr_residual(spec, u, quad)
    assert good.passed
    bad_spec = GroundStateSpec("point", 5, alpha=0.2)
    mixed = gsr_residual(bad_spec, u, quad, alpha=0.2)
    assert mixed.passed                                         # consistent alpha still fine
    assert abs(good.pot_term - mixed.pot_term) > 10 * good.stderr


def test_hardy_deficit_point():
    spec = GroundStateSpec("point", 3)
    u = TestFunctionSpec([1.5, 0, 0], 1.0)
    quad = IntegrationSpec(samples=200_000, seed=0)
    res = hardy_deficit(spec, 0.25, "inv_dist_sq", u, quad)
    assert res.passed and res.deficit > 0
    # a constant far above the sharp one produces a clearly negative deficit
    assert not hardy_deficit(spec, 50.0, "inv_dist_sq", u, quad).passed
    with pytest.raises(KeyError):
        hardy_deficit(spec, 0.25, "nope", u, quad)


def test_integration_blocks_deterministic():
    quad = IntegrationSpec(samples=25, seed=3, block_size=10)
    sizes = [m for _, m in quad.blocks()]
    assert sizes == [10, 10, 5]
    draws1 = [rng.random(2) for rng, _ in quad.blocks()]
    draws2 = [rng.random(2) for rng, _ in quad.blocks()]
    assert all(np.array_equal(a, b) for a, b in zip(draws1, draws2))
