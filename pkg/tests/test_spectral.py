"""Tests for the discrete sine basis, fractional norms and spectral projections."""

from __future__ import annotations

import numpy as np
import pytest

from src.grid import ScalarField, build_grid, inner_product, norm
from src.spectral import (
    SpectralCoefficients,
    SpectralError,
    analyze,
    build_basis,
    fractional_norm,
    project_below,
    random_regular_field,
    synthesize,
    validate_kappa,
)


def _random_field(n: int, rng: np.random.Generator) -> ScalarField:
    return ScalarField(build_grid(n), rng.standard_normal((n, n)))


def test_single_node_grid_has_eigenvalue_sixteen() -> None:
    """On n = 1, h = 1/2 and mu_11 = 8/h^2 * sin^2(pi/4) = 16."""
    basis = build_basis(build_grid(1))

    assert basis.mu_min == pytest.approx(16.0)
    assert basis.mode_indices() == [(1, 1)]


def test_lowest_eigenvalue_approaches_continuum_value() -> None:
    """mu_11 on n = 31 is within 1% of 2 pi^2."""
    basis = build_basis(build_grid(31))

    assert basis.mu_min == pytest.approx(2.0 * np.pi**2, rel=1e-2)
    assert np.all(np.diff(basis.sorted_eigenvalues()) >= 0.0)


def test_analyze_recovers_single_mode() -> None:
    """The coefficients of e_21 are the unit vector at (2, 1)."""
    basis = build_basis(build_grid(7))
    coefficients = analyze(basis.eigenvector(2, 1)).values
    expected = np.zeros((7, 7))
    expected[1, 0] = 1.0

    np.testing.assert_allclose(coefficients, expected, atol=1e-12)


@pytest.mark.parametrize("n", [3, 8, 16])
def test_analyze_matches_direct_summation(n: int) -> None:
    """The fast transform agrees with c_kl = h^2 sum u_ij 2 sin(k pi x_i) sin(l pi y_j)."""
    u = _random_field(n, np.random.default_rng(n))
    grid = u.grid
    xs, ys = grid.mesh()
    direct = np.empty((n, n))
    for k in range(1, n + 1):
        for l in range(1, n + 1):
            mode = 2.0 * np.sin(k * np.pi * xs) * np.sin(l * np.pi * ys)
            direct[k - 1, l - 1] = grid.h**2 * np.sum(u.values * mode)

    np.testing.assert_allclose(analyze(u).values, direct, atol=1e-12)


def test_synthesize_inverts_analyze_and_preserves_norm() -> None:
    """Analysis is orthonormal: round trips are exact and Parseval holds."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        u = _random_field(6, rng)
        coefficients = analyze(u)

        np.testing.assert_allclose(synthesize(coefficients).values, u.values, atol=1e-12)
        assert np.sum(coefficients.values**2) == pytest.approx(norm(u, "L2") ** 2, rel=1e-12)


def test_analyze_rejects_nonzero_boundary() -> None:
    """Fields must satisfy the Dirichlet condition before expansion."""
    field = ScalarField.constant(build_grid(3), 1.0, with_boundary=True)

    with pytest.raises(SpectralError, match="boundary"):
        analyze(field)


def test_fractional_norm_of_single_mode() -> None:
    """||A^theta e_kl|| = mu_kl^theta; on n = 1 with theta = 1 this is 16."""
    grid = build_grid(1)
    mode = build_basis(grid).eigenvector(1, 1)

    assert fractional_norm(mode, 1.0) == pytest.approx(16.0)
    assert fractional_norm(mode, -0.5) == pytest.approx(0.25)


def test_fractional_norm_at_zero_order_is_l2() -> None:
    """theta = 0 gives the discrete L2 norm."""
    u = _random_field(5, np.random.default_rng(1))

    assert fractional_norm(u, 0.0) == pytest.approx(norm(u, "L2"), rel=1e-12)


def test_fractional_norm_at_half_order_is_h1_seminorm() -> None:
    """theta = 1/2 reproduces the discrete gradient norm."""
    u = _random_field(5, np.random.default_rng(2))

    assert fractional_norm(u, 0.5) == pytest.approx(norm(u, "H1_semi"), rel=1e-10)


@pytest.mark.parametrize("s", [1.0, 1.25, 2.0])
def test_dual_norm_bounds_inner_products(s: float) -> None:
    """|(u, v)| <= ||u||_{-s} ||v||_{s}."""
    rng = np.random.default_rng(int(4 * s))
    basis = build_basis(build_grid(6))
    for _ in range(100):
        u = _random_field(6, rng)
        v = _random_field(6, rng)
        bound = fractional_norm(u, -s / 2.0, basis) * fractional_norm(v, s / 2.0, basis)
        assert abs(inner_product(u, v)) <= bound * (1.0 + 1e-12)


def test_projection_is_idempotent_and_self_adjoint() -> None:
    """P_lambda P_lambda = P_lambda and (P u, v) = (u, P v) for random lambda."""
    rng = np.random.default_rng(3)
    basis = build_basis(build_grid(8))
    for lam in rng.uniform(basis.mu_min, basis.mu_max, 20):
        u = _random_field(8, rng)
        v = _random_field(8, rng)
        projected = project_below(u, lam, basis)

        np.testing.assert_allclose(project_below(projected, lam, basis).values, projected.values, atol=1e-11)
        assert inner_product(projected, v) == pytest.approx(inner_product(u, project_below(v, lam, basis)), abs=1e-11)


def test_projection_splits_orthogonally() -> None:
    """||u||^2 = ||P u||^2 + ||(I - P) u||^2."""
    u = _random_field(8, np.random.default_rng(4))
    basis = build_basis(u.grid)
    low = project_below(u, 100.0, basis)
    high = u - low

    assert norm(u) ** 2 == pytest.approx(norm(low) ** 2 + norm(high) ** 2, rel=1e-12)


def test_projection_extremes() -> None:
    """lambda <= mu_min keeps nothing; lambda > mu_max keeps everything."""
    u = _random_field(4, np.random.default_rng(5))
    basis = build_basis(u.grid)

    assert np.all(project_below(u, basis.mu_min, basis).values == 0.0)
    np.testing.assert_allclose(project_below(u, 2.0 * basis.mu_max, basis).values, u.values, atol=1e-12)
    with pytest.raises(SpectralError):
        project_below(u, 0.0, basis)


@pytest.mark.parametrize("kappa", [0.3, 0.8, 2.0])
def test_projection_tail_and_growth_bounds(kappa: float) -> None:
    """High modes shrink like lambda^(-kappa/2); low modes grow at most like lambda^((s-kappa)/2)."""
    rng = np.random.default_rng(6)
    basis = build_basis(build_grid(10))
    s = kappa + 1.0
    for lam in (50.0, 200.0, 800.0):
        for _ in range(20):
            v = _random_field(10, rng)
            size = fractional_norm(v, kappa / 2.0, basis)
            low = project_below(v, lam, basis)
            tail = v - low
            assert norm(tail) <= lam ** (-kappa / 2.0) * size * (1.0 + 1e-10)
            assert fractional_norm(low, s / 2.0, basis) <= lam ** ((s - kappa) / 2.0) * size * (1.0 + 1e-10)


def test_validate_kappa_excludes_one_half_and_nonpositive() -> None:
    """kappa must be positive and differ from 1/2."""
    assert validate_kappa(2) == 2.0
    for kappa in (0.5, 0.0, -1.0):
        with pytest.raises(SpectralError):
            validate_kappa(kappa)


def test_random_regular_field_is_deterministic_and_scaled() -> None:
    """Same seed gives the same field; the L2 norm equals the amplitude."""
    basis = build_basis(build_grid(9))
    first = random_regular_field(basis, 2.0, 7, 0.3)
    second = random_regular_field(basis, 2.0, 7, 0.3)

    np.testing.assert_array_equal(first.values, second.values)
    assert norm(first) == pytest.approx(0.3, rel=1e-12)


def test_random_regular_field_seeds_change_signs_only() -> None:
    """Different seeds share coefficient magnitudes."""
    basis = build_basis(build_grid(9))
    first = analyze(random_regular_field(basis, 0.8, 1, 1.0)).values
    second = analyze(random_regular_field(basis, 0.8, 2, 1.0)).values

    np.testing.assert_allclose(np.abs(first), np.abs(second), atol=1e-12)
    assert not np.allclose(first, second)


def test_random_regular_field_zero_amplitude_and_excluded_kappa() -> None:
    """Amplitude 0 yields zero; kappa = 1/2 is rejected."""
    basis = build_basis(build_grid(4))

    assert np.all(random_regular_field(basis, 2.0, 0, 0.0).values == 0.0)
    with pytest.raises(SpectralError, match="1/2"):
        random_regular_field(basis, 0.5, 0, 1.0)


def test_random_regular_field_has_requested_regularity() -> None:
    """The D(A^{kappa/2}) norm stays bounded under refinement while D(A^{kappa/2 + 1}) grows."""
    coarse = random_regular_field(build_basis(build_grid(15)), 0.8, 3, 1.0)
    fine = random_regular_field(build_basis(build_grid(31)), 0.8, 3, 1.0)

    assert fractional_norm(fine, 0.4) < 2.0 * fractional_norm(coarse, 0.4)
    assert fractional_norm(fine, 1.4) > 2.0 * fractional_norm(coarse, 1.4)


def test_synthesize_accepts_explicit_coefficients() -> None:
    """A unit coefficient at (1, 1) synthesizes e_11."""
    grid = build_grid(3)
    coefficients = np.zeros((3, 3))
    coefficients[0, 0] = 1.0
    field = synthesize(SpectralCoefficients(grid, coefficients))

    np.testing.assert_allclose(field.values, build_basis(grid).eigenvector(1, 1).values, atol=1e-12)
