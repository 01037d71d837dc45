"""Tests for grids, discrete fields and the summation-by-parts operators."""

from __future__ import annotations

import numpy as np
import pytest

from src.grid import (
    EdgeVectorField,
    GridError,
    ScalarField,
    build_grid,
    edge_inner_product,
    gradient,
    gradient_matrix,
    inner_product,
    neg_div_gradient,
    neg_divergence,
    norm,
)
from src.spectral import build_basis


def _random_field(n: int, rng: np.random.Generator) -> ScalarField:
    return ScalarField(build_grid(n), rng.standard_normal((n, n)))


def test_build_grid_spacing_and_node_count() -> None:
    """n interior nodes per axis give h = 1/(n+1) and n^2 unknowns."""
    grid = build_grid(3)

    assert grid.h == pytest.approx(0.25)
    assert grid.node_count == 9
    assert grid.padded_shape == (5, 5)
    np.testing.assert_allclose(grid.coordinates(), [0.25, 0.5, 0.75])


@pytest.mark.parametrize("n", [0, -1, 2.5, True])
def test_build_grid_rejects_invalid_sizes(n: object) -> None:
    """Grids need a positive integer number of interior nodes."""
    with pytest.raises(GridError):
        build_grid(n)


def test_inner_product_of_ones_is_interior_area() -> None:
    """(1, 1)_h on n = 3 is 9 nodes times h^2 = 0.5625."""
    ones = ScalarField.constant(build_grid(3), 1.0)

    assert inner_product(ones, ones) == pytest.approx(0.5625)


def test_first_sine_mode_has_unit_norm() -> None:
    """e_11 = 2 sin(pi x) sin(pi y) is normalized in the discrete inner product."""
    basis = build_basis(build_grid(7))
    mode = basis.eigenvector(1, 1)

    assert inner_product(mode, mode) == pytest.approx(1.0, rel=1e-12)
    assert inner_product(mode, basis.eigenvector(2, 1)) == pytest.approx(0.0, abs=1e-12)


def test_gradient_of_linear_function_is_constant() -> None:
    """grad x is (1, 0) on every edge when the closure carries the boundary values of x."""
    field = ScalarField.from_function(build_grid(5), lambda xs, ys: xs, with_boundary=True)
    grad = gradient(field)

    np.testing.assert_allclose(grad.x, 1.0, rtol=1e-12)
    np.testing.assert_allclose(grad.y, 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [3, 5, 9])
def test_summation_by_parts_holds_for_random_pairs(n: int) -> None:
    """(grad u, grad v)_h equals (u, -div grad v)_h for implicit-zero fields."""
    rng = np.random.default_rng(n)
    for _ in range(100):
        u = _random_field(n, rng)
        v = _random_field(n, rng)
        lhs = edge_inner_product(gradient(u), gradient(v))
        rhs = inner_product(u, neg_div_gradient(v))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-10)


def test_neg_divergence_is_adjoint_of_gradient() -> None:
    """(grad u, w) = (u, -div w) for arbitrary edge fields w."""
    rng = np.random.default_rng(4)
    grid = build_grid(6)
    u = _random_field(6, rng)
    w = EdgeVectorField(grid, rng.standard_normal((7, 6)), rng.standard_normal((6, 7)))

    assert edge_inner_product(gradient(u), w) == pytest.approx(inner_product(u, neg_divergence(w)), rel=1e-12)


def test_gradient_is_linear() -> None:
    """grad(a u + b v) = a grad u + b grad v."""
    rng = np.random.default_rng(1)
    u = _random_field(4, rng)
    v = _random_field(4, rng)
    combined = gradient(2.0 * u - 3.0 * v)
    expected = 2.0 * gradient(u) - 3.0 * gradient(v)

    np.testing.assert_allclose(combined.flat(), expected.flat(), atol=1e-12)


def test_gradient_matrix_matches_stencil() -> None:
    """The sparse gradient reproduces gradient() on implicit-zero fields."""
    rng = np.random.default_rng(2)
    u = _random_field(5, rng)

    np.testing.assert_allclose(gradient_matrix(5) @ u.flat(), gradient(u).flat(), atol=1e-12)


def test_norms_of_zero_and_constant_fields() -> None:
    """Zero has zero norms; a constant c has L2 norm |c| * n * h."""
    grid = build_grid(4)
    zero = ScalarField.zeros(grid)

    for mode in ("L2", "H1", "H1_semi"):
        assert norm(zero, mode) == 0.0
    assert norm(ScalarField.constant(grid, -2.0), "L2") == pytest.approx(2.0 * 4 * grid.h)


def test_h1_norm_combines_l2_and_seminorm() -> None:
    """||u||_H1^2 = ||u||_L2^2 + |u|_H1^2."""
    u = _random_field(5, np.random.default_rng(3))

    assert norm(u, "H1") ** 2 == pytest.approx(norm(u, "L2") ** 2 + norm(u, "H1_semi") ** 2)


def test_discrete_poincare_inequality() -> None:
    """||u|| <= C_P |u|_H1 with C_P = 1/sqrt(mu_min) for implicit-zero fields."""
    rng = np.random.default_rng(5)
    basis = build_basis(build_grid(8))
    for _ in range(50):
        u = _random_field(8, rng)
        assert norm(u, "L2") <= basis.poincare_constant * norm(u, "H1_semi") * (1.0 + 1e-12)


def test_unknown_norm_mode_raises() -> None:
    """Only L2, H1 and H1_semi are supported."""
    with pytest.raises(GridError, match="H2"):
        norm(ScalarField.zeros(build_grid(2)), "H2")


def test_fields_on_different_grids_do_not_mix() -> None:
    """Combining fields from two grids is an error."""
    with pytest.raises(GridError):
        inner_product(ScalarField.zeros(build_grid(2)), ScalarField.zeros(build_grid(3)))


def test_field_arithmetic_combines_boundary_frames() -> None:
    """Sums keep the closure; dropping it with interior() leaves the values."""
    grid = build_grid(3)
    left = ScalarField.constant(grid, 1.0, with_boundary=True)
    right = ScalarField.constant(grid, 2.0)
    total = left + right

    assert np.all(total.values == 3.0)
    assert total.boundary is not None
    assert total.padded()[0, 0] == 1.0
    assert total.interior().implicit_zero
