"""Tests for the stationary forward, adjoint and linearized solvers."""

from __future__ import annotations

import numpy as np
import pytest

from src.elliptic import (
    EllipticProblem,
    ProblemError,
    SolverError,
    assemble_system,
    solve,
    solve_adjoint,
    solve_linearized,
)
from src.grid import EdgeVectorField, ScalarField, build_grid, edge_inner_product, gradient, inner_product
from src.scenarios import manufactured_elliptic, standard_elliptic
from src.spectral import build_basis


def _unit_problem(n: int, source: float = 1.0) -> EllipticProblem:
    grid = build_grid(n)
    return EllipticProblem(grid, ScalarField.constant(grid, 1.0), ScalarField.constant(grid, source), 0.0)


def test_single_node_solution() -> None:
    """On n = 1 with a = q = f = 1 and g = 0, (16 + 1) u = 1."""
    problem = _unit_problem(1)
    state = solve(problem, ScalarField.constant(problem.grid, 1.0))

    assert state.values[0, 0] == pytest.approx(1.0 / 17.0, rel=1e-12)


def test_zero_data_gives_zero_state() -> None:
    """f = 0 and g = 0 give u = 0 for any admissible q."""
    problem = _unit_problem(5, source=0.0)
    q = ScalarField(problem.grid, np.random.default_rng(0).uniform(0.25, 4.0, (5, 5)))

    assert np.all(solve(problem, q).values == 0.0)


def test_manufactured_solution_converges_at_second_order() -> None:
    """Halving h reduces the maximum and L2 errors by about four; the observed L2 order stays near two."""
    errors = []
    for n in (15, 31, 63):
        case = manufactured_elliptic(build_grid(n))
        errors.append(case.errors(solve(case.problem, case.q)))

    assert errors[1][0] < 1e-2
    assert 3.5 <= errors[0][0] / errors[1][0] <= 4.5
    assert 3.5 <= errors[0][1] / errors[1][1] <= 4.5
    for coarse, fine in zip(errors, errors[1:]):
        assert 1.7 <= np.log2(coarse[1] / fine[1]) <= 2.3


def test_conjugate_gradient_path_matches_manufactured_solution() -> None:
    """Grids above the direct-solve threshold still reach second-order accuracy."""
    case = manufactured_elliptic(build_grid(47))
    max_error, _ = case.errors(solve(case.problem, case.q))

    assert max_error < 2e-3


def test_boundary_data_enters_the_solution() -> None:
    """With f = 0, q = 0 and g = 1 the solution is identically one."""
    grid = build_grid(6)
    problem = EllipticProblem(grid, ScalarField.constant(grid, 2.0), ScalarField.zeros(grid), 1.0)
    state = solve(problem, ScalarField.zeros(grid))

    np.testing.assert_allclose(state.values, 1.0, rtol=1e-10)
    assert state.padded()[0, 3] == 1.0


def test_solution_operator_is_symmetric() -> None:
    """(S f1, f2) = (f1, S f2) for homogeneous boundary data."""
    rng = np.random.default_rng(1)
    grid = build_grid(7)
    a = ScalarField.from_function(grid, lambda xs, ys: 1.0 + xs * ys, with_boundary=True)
    q = ScalarField(grid, rng.uniform(0.25, 4.0, grid.shape))
    f1 = ScalarField(grid, rng.standard_normal(grid.shape))
    f2 = ScalarField(grid, rng.standard_normal(grid.shape))
    u1 = solve(EllipticProblem(grid, a, f1), q).interior()
    u2 = solve(EllipticProblem(grid, a, f2), q).interior()

    assert inner_product(u1, f2) == pytest.approx(inner_product(f1, u2), rel=1e-10)


def test_maximum_principle_for_nonnegative_data() -> None:
    """Nonnegative f and g with q >= 0 give a nonnegative state."""
    rng = np.random.default_rng(2)
    grid = build_grid(9)
    for _ in range(10):
        f = ScalarField(grid, rng.uniform(0.0, 5.0, grid.shape))
        g = rng.uniform(0.0, 2.0, grid.padded_shape)
        q = ScalarField(grid, rng.uniform(0.0, 4.0, grid.shape))
        state = solve(EllipticProblem(grid, ScalarField.constant(grid, 1.0), f, g), q)
        assert state.values.min() >= -1e-12


def test_standard_problem_state_stays_above_boundary_value() -> None:
    """The standard scenario keeps u >= 1 for radiativities up to the box ceiling."""
    grid = build_grid(15)
    state = solve(standard_elliptic(grid), ScalarField.constant(grid, 4.0))

    assert state.values.min() >= 1.0 - 1e-10


def test_value_adjoint_of_first_mode() -> None:
    """With a = 1 and q = 0 the adjoint of e_11 is e_11 / mu_11."""
    problem = _unit_problem(7, source=0.0)
    basis = build_basis(problem.grid)
    mode = basis.eigenvector(1, 1)
    adjoint = solve_adjoint(problem, ScalarField.zeros(problem.grid), mode)

    np.testing.assert_allclose(adjoint.values, mode.values / basis.mu_min, atol=1e-12)


@pytest.mark.parametrize("mode", ["gradient", "value"])
def test_adjoint_identity_with_linearized_state(mode: str) -> None:
    """(r, u'(q)[d]) equals (-u p, d) to rounding for both residual types."""
    rng = np.random.default_rng(3)
    grid = build_grid(8)
    problem = standard_elliptic(grid)
    q = ScalarField(grid, rng.uniform(0.5, 3.0, grid.shape))
    system = assemble_system(problem, q)
    state = solve(problem, q, system=system)

    for _ in range(5):
        direction = ScalarField(grid, rng.standard_normal(grid.shape))
        derivative = solve_linearized(problem, q, direction, state=state, system=system)
        if mode == "gradient":
            residual = EdgeVectorField(grid, rng.standard_normal((9, 8)), rng.standard_normal((8, 9)))
            lhs = edge_inner_product(residual, gradient(derivative))
        else:
            residual = ScalarField(grid, rng.standard_normal(grid.shape))
            lhs = inner_product(residual, derivative)
        adjoint = solve_adjoint(problem, q, residual, system=system)
        rhs = inner_product(ScalarField(grid, -state.values * adjoint.values), direction)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_negative_radiativity_is_rejected() -> None:
    """q below -1e-12 anywhere raises; rounding-level negatives are clamped."""
    problem = _unit_problem(3)
    values = np.ones((3, 3))
    values[1, 1] = -1e-3

    with pytest.raises(ProblemError, match="nonnegative"):
        solve(problem, ScalarField(problem.grid, values))
    values[1, 1] = -1e-14
    assert np.all(solve(problem, ScalarField(problem.grid, values)).values > 0.0)


def test_nonpositive_conductivity_is_rejected() -> None:
    """a must be positive on every node."""
    grid = build_grid(3)
    a = ScalarField.constant(grid, 1.0).with_values(np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]]))

    with pytest.raises(ProblemError, match="Conductivity"):
        EllipticProblem(grid, a, ScalarField.zeros(grid))


def test_solver_error_carries_diagnostics() -> None:
    """SolverError keeps the iteration count and the residual."""
    error = SolverError("Linear solve did not converge", iterations=12, residual=0.5)

    assert error.iterations == 12
    assert error.residual == 0.5
    assert "iterations=12" in str(error)
