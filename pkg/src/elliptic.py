"""Forward and adjoint solvers for ``-div(a grad u) + q u = f`` with Dirichlet data ``g``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

try:
    from .grid import (
        EdgeVectorField,
        Grid,
        GridError,
        ScalarField,
        boundary_frame,
        gradient,
        gradient_matrix,
        neg_divergence,
    )
except ImportError:
    from grid import (
        EdgeVectorField,
        Grid,
        GridError,
        ScalarField,
        boundary_frame,
        gradient,
        gradient_matrix,
        neg_divergence,
    )

logger = logging.getLogger(__name__)

DIRECT_SOLVE_MAX_N = 31
CG_RELATIVE_TOLERANCE = 1e-12
CG_ITERATIONS_PER_NODE = 20
RESIDUAL_TOLERANCE = 1e-10
Q_ROUNDING_TOLERANCE = 1e-12


class ProblemError(ValueError):
    """Raised when PDE data violate the solver's hypotheses."""


class SolverError(RuntimeError):
    """Raised when a linear solve does not reach the residual tolerance."""

    def __init__(self, message: str, *, iterations: int, residual: float) -> None:
        super().__init__(f"{message} (iterations={iterations}, relative residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


def _edge_average(a_full: np.ndarray, grid: Grid) -> EdgeVectorField:
    """Arithmetic mean of nodal conductivities at each edge midpoint."""
    ax = 0.5 * (a_full[1:, 1:-1] + a_full[:-1, 1:-1])
    ay = 0.5 * (a_full[1:-1, 1:] + a_full[1:-1, :-1])
    return EdgeVectorField(grid, ax, ay)


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    """Data ``a``, ``f`` and ``g`` of the stationary radiativity system.

    Attributes
    ----------
    grid : Grid
        Discretization of the unit square.
    a : ScalarField
        Conductivity. When it carries no explicit boundary closure, the nearest
        interior value is used on the boundary for the edge averages.
    f : ScalarField
        Source density on the interior nodes.
    g : float | np.ndarray
        Dirichlet data: a constant or a padded ``(n+2, n+2)`` array whose boundary
        entries are used.
    """

    grid: Grid
    a: ScalarField
    f: ScalarField
    g: float | np.ndarray = 0.0
    a_full: np.ndarray = field(init=False, repr=False)
    edge_weights: EdgeVectorField = field(init=False, repr=False)
    stiffness: sps.csr_matrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("a", "f"):
            if getattr(self, name).grid != self.grid:
                raise GridError(f"Field '{name}' lives on n={getattr(self, name).grid.n}, expected n={self.grid.n}.")
        object.__setattr__(self, "g", boundary_frame(self.grid, self.g))

        if self.a.boundary is None:
            a_full = np.pad(self.a.values, 1, mode="edge")
        else:
            a_full = self.a.padded()
        if not np.all(a_full > 0.0):
            raise ProblemError(f"Conductivity must be positive at every node; minimum is {a_full.min():.6g}.")
        object.__setattr__(self, "a_full", a_full)

        weights = _edge_average(a_full, self.grid)
        object.__setattr__(self, "edge_weights", weights)
        derivative = gradient_matrix(self.grid.n)
        stiffness = (derivative.T @ sps.diags(weights.flat()) @ derivative).tocsr()
        object.__setattr__(self, "stiffness", stiffness)

    @property
    def a_min(self) -> float:
        return float(self.a_full.min())

    def boundary_load(self) -> np.ndarray:
        """Right-hand-side contribution of ``g`` after stencil elimination."""
        return boundary_load(self.edge_weights, self.g)


def boundary_load(edge_weights: EdgeVectorField, g: np.ndarray) -> np.ndarray:
    """Return ``-div(a grad G)`` on the interior, where ``G`` is zero inside and ``g`` on the boundary."""
    grid = edge_weights.grid
    frame = ScalarField(grid, np.zeros(grid.shape), g)
    return neg_divergence(edge_weights * gradient(frame)).flat()


def radiativity_values(q: ScalarField, grid: Grid) -> np.ndarray:
    """Return nodal ``q`` clamped at zero when negatives are pure rounding.

    Raises
    ------
    ProblemError
        Raised when ``q`` is negative beyond ``1e-12`` anywhere.
    """
    if q.grid != grid:
        raise GridError(f"Radiativity lives on n={q.grid.n}, expected n={grid.n}.")
    values = q.flat()
    lowest = float(values.min())
    if lowest < -Q_ROUNDING_TOLERANCE:
        raise ProblemError(f"Radiativity must be nonnegative; minimum is {lowest:.6g}.")
    return np.maximum(values, 0.0)


class LinearSystem:
    """SPD system ``(L_q + shift*I) x = b`` reused across forward and adjoint solves.

    Grids with ``n <= 31`` are factorized once with a sparse LU; larger grids use
    conjugate gradients with a diagonal preconditioner.
    """

    def __init__(self, matrix: sps.spmatrix, n: int) -> None:
        self.matrix = sps.csc_matrix(matrix)
        self.n = n
        self.max_iterations = CG_ITERATIONS_PER_NODE * n * n
        if n <= DIRECT_SOLVE_MAX_N:
            self._factorization = spla.splu(self.matrix)
            self._preconditioner = None
        else:
            self._factorization = None
            inverse_diagonal = 1.0 / self.matrix.diagonal()
            self._preconditioner = spla.LinearOperator(
                self.matrix.shape, matvec=lambda vector: inverse_diagonal * vector
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            return np.zeros_like(rhs)

        iterations = 0
        if self._factorization is not None:
            solution = self._factorization.solve(rhs)
            info = 0
        else:
            counter = {"iterations": 0}

            def _count(_: np.ndarray) -> None:
                counter["iterations"] += 1

            solution, info = spla.cg(
                self.matrix,
                rhs,
                rtol=CG_RELATIVE_TOLERANCE,
                maxiter=self.max_iterations,
                M=self._preconditioner,
                callback=_count,
            )
            iterations = counter["iterations"]

        residual = float(np.linalg.norm(self.matrix @ solution - rhs) / rhs_norm)
        logger.debug("Linear solve on n=%d: %d iterations, relative residual %.3e", self.n, iterations, residual)
        if info != 0 or residual > RESIDUAL_TOLERANCE:
            raise SolverError("Linear solve did not converge", iterations=iterations, residual=residual)
        return solution


def assemble_system(problem: EllipticProblem, q: ScalarField, *, shift: float = 0.0) -> LinearSystem:
    """Assemble ``L_q + shift*I`` where ``L_q = -div(a grad .) + q``."""
    q_values = radiativity_values(q, problem.grid)
    matrix = problem.stiffness + sps.diags(q_values + shift)
    return LinearSystem(matrix, problem.grid.n)


def solve(problem: EllipticProblem, q: ScalarField, *, system: LinearSystem | None = None) -> ScalarField:
    """Solve the elliptic system for radiativity ``q``.

    Parameters
    ----------
    problem : EllipticProblem
        Conductivity, source and Dirichlet data.
    q : ScalarField
        Nonnegative radiativity on the same grid.
    system : LinearSystem | None, optional
        Pre-assembled operator for ``q``; assembled here when omitted.

    Returns
    -------
    ScalarField
        Discrete solution carrying ``g`` as its boundary closure.

    Raises
    ------
    ProblemError
        Raised for negative ``q``.
    SolverError
        Raised when the linear solve misses the residual tolerance.
    """
    system = system or assemble_system(problem, q)
    rhs = problem.f.flat() - problem.boundary_load()
    values = system.solve(rhs)
    return ScalarField(problem.grid, values, problem.g)


def solve_adjoint(
    problem: EllipticProblem,
    q: ScalarField,
    residual: EdgeVectorField | ScalarField,
    *,
    system: LinearSystem | None = None,
) -> ScalarField:
    """Solve the adjoint equation for a data residual.

    A gradient-data residual ``grad u(q) - grad z`` enters through its weak divergence;
    a value-data residual ``u(q) - z`` enters directly. The operator is the exact
    transpose of the forward stencil.
    """
    system = system or assemble_system(problem, q)
    if isinstance(residual, EdgeVectorField):
        rhs = neg_divergence(residual).flat()
    else:
        rhs = residual.flat()
    return ScalarField(problem.grid, system.solve(rhs))


def solve_linearized(
    problem: EllipticProblem,
    q: ScalarField,
    direction: ScalarField,
    *,
    state: ScalarField | None = None,
    system: LinearSystem | None = None,
) -> ScalarField:
    """Directional derivative ``u'(q)[direction]``: solves ``L_q w = -u(q) * direction``."""
    system = system or assemble_system(problem, q)
    state = state or solve(problem, q, system=system)
    values = system.solve(-state.flat() * direction.flat())
    return ScalarField(problem.grid, values)
