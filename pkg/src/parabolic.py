"""Backward-Euler marching for ``u_t - div(a grad u) + q u = f`` and its adjoint over a time window."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

try:
    from .elliptic import EllipticProblem, LinearSystem, ProblemError, assemble_system, boundary_load
    from .grid import EdgeVectorField, Grid, GridError, ScalarField, boundary_frame, edge_inner_product, neg_divergence, norm
except ImportError:
    from elliptic import EllipticProblem, LinearSystem, ProblemError, assemble_system, boundary_load
    from grid import EdgeVectorField, Grid, GridError, ScalarField, boundary_frame, edge_inner_product, neg_divergence, norm

logger = logging.getLogger(__name__)

COMPATIBILITY_TOLERANCE = 1e-8
DEFAULT_WINDOW_START_FRACTION = 0.5

SpaceTimeFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _per_level(data: object, levels: int, name: str) -> list[object] | None:
    """Split per-level sequences; return ``None`` for time-constant data."""
    if isinstance(data, (list, tuple)):
        if len(data) != levels:
            raise ProblemError(f"Time-dependent '{name}' needs {levels} levels (0..nt), got {len(data)}.")
        return list(data)
    if isinstance(data, np.ndarray) and data.ndim == 3:
        if data.shape[0] != levels:
            raise ProblemError(f"Time-dependent '{name}' needs {levels} levels (0..nt), got {data.shape[0]}.")
        return list(data)
    return None


def window_levels(T: float, nt: int, window: tuple[float, float]) -> tuple[int, ...]:
    """Levels ``m`` in ``1..nt`` with ``t_a < m*T/nt <= t_b``."""
    t_a, t_b = window
    dt = T / nt
    slack = 1e-12 * T
    return tuple(m for m in range(1, nt + 1) if t_a + slack < m * dt <= t_b + slack)


@dataclass(frozen=True, eq=False)
class ParabolicProblem:
    """Data of the time-dependent radiativity system on ``(0, T]``.

    Attributes
    ----------
    grid : Grid
        Spatial discretization.
    a : ScalarField
        Time-independent conductivity.
    f : ScalarField | Sequence[ScalarField]
        Source, either constant in time or one field per level ``0..nt``.
    u0 : ScalarField
        Initial state; its boundary closure should match ``g`` at ``t = 0``.
    T : float
        Final time.
    nt : int
        Number of backward-Euler steps.
    g : float | np.ndarray | Sequence[np.ndarray]
        Dirichlet data, constant in time or one padded frame per level.
    window : tuple[float, float] | None
        Measurement window ``(t_a, t_b]``; defaults to ``(T/2, T]``.
    """

    grid: Grid
    a: ScalarField
    f: ScalarField | Sequence[ScalarField]
    u0: ScalarField
    T: float
    nt: int
    g: float | np.ndarray | Sequence[np.ndarray] = 0.0
    window: tuple[float, float] | None = None
    spatial: EllipticProblem = field(init=False, repr=False)
    forcing: tuple[ScalarField, ...] = field(init=False, repr=False)
    boundary: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if isinstance(self.nt, bool) or not isinstance(self.nt, (int, np.integer)) or self.nt < 1:
            raise ProblemError(f"Number of time steps must be a positive integer, got nt={self.nt!r}.")
        if not float(self.T) > 0.0:
            raise ProblemError(f"Final time must be positive, got T={self.T!r}.")
        object.__setattr__(self, "T", float(self.T))

        window = self.window or (DEFAULT_WINDOW_START_FRACTION * self.T, self.T)
        t_a, t_b = float(window[0]), float(window[1])
        if not 0.0 <= t_a < t_b <= self.T:
            raise ProblemError(f"Measurement window must satisfy 0 <= t_a < t_b <= T={self.T}, got ({t_a}, {t_b}].")
        if not window_levels(self.T, self.nt, (t_a, t_b)):
            raise ProblemError(
                f"Measurement window ({t_a}, {t_b}] contains no time level of dt={self.T / self.nt}; "
                "widen it or increase nt."
            )
        object.__setattr__(self, "window", (t_a, t_b))

        levels = self.nt + 1
        forcing_levels = _per_level(self.f, levels, "f")
        forcing = tuple(forcing_levels) if forcing_levels is not None else (self.f,) * levels
        for level, source in enumerate(forcing):
            if not isinstance(source, ScalarField) or source.grid != self.grid:
                raise GridError(f"Source at level {level} must be a ScalarField on n={self.grid.n}.")
        object.__setattr__(self, "forcing", forcing)

        boundary_levels = _per_level(self.g, levels, "g")
        if boundary_levels is None:
            frame = boundary_frame(self.grid, self.g)
            boundary = (frame,) * levels
        else:
            boundary = tuple(boundary_frame(self.grid, item) for item in boundary_levels)
        object.__setattr__(self, "boundary", boundary)

        if self.u0.grid != self.grid:
            raise GridError(f"Initial state lives on n={self.u0.grid.n}, expected n={self.grid.n}.")
        initial_frame = np.zeros(self.grid.padded_shape) if self.u0.boundary is None else self.u0.boundary
        mismatch = float(np.max(np.abs(initial_frame - boundary[0])))
        if mismatch > COMPATIBILITY_TOLERANCE:
            logger.warning(
                "Initial state boundary differs from g(0) by %.3e (tolerance %.0e); the march uses g(0).",
                mismatch,
                COMPATIBILITY_TOLERANCE,
            )

        object.__setattr__(self, "spatial", EllipticProblem(self.grid, self.a, ScalarField.zeros(self.grid)))

    @classmethod
    def from_functions(
        cls,
        grid: Grid,
        a: ScalarField,
        f: SpaceTimeFunction,
        u0: Callable[[np.ndarray, np.ndarray], np.ndarray],
        T: float,
        nt: int,
        g: SpaceTimeFunction | float = 0.0,
        window: tuple[float, float] | None = None,
    ) -> ParabolicProblem:
        """Sample analytic ``f(x, y, t)``, ``g(x, y, t)`` and ``u0(x, y)`` at every level."""
        times = np.linspace(0.0, float(T), int(nt) + 1)
        forcing = [ScalarField.from_function(grid, lambda xs, ys, t=t: f(xs, ys, t)) for t in times]
        if callable(g):
            boundary = [boundary_frame(grid, lambda xs, ys, t=t: g(xs, ys, t)) for t in times]
        else:
            boundary = float(g)
        initial = ScalarField.from_function(grid, u0, with_boundary=True)
        return cls(grid, a, forcing, initial, T, nt, boundary, window)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def window_steps(self) -> tuple[int, ...]:
        """Levels ``m`` with ``t_a < m*dt <= t_b``."""
        return window_levels(self.T, self.nt, self.window)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """One field per time level ``0..nt`` with uniform spacing ``dt``."""

    states: tuple[ScalarField, ...]
    dt: float

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, level: int) -> ScalarField:
        return self.states[level]

    def __iter__(self) -> Iterator[ScalarField]:
        return iter(self.states)

    @property
    def nt(self) -> int:
        return len(self.states) - 1


def assemble_step_system(problem: ParabolicProblem, q: ScalarField) -> LinearSystem:
    """Backward-Euler operator ``I/dt + L_q``, shared by every step and the adjoint."""
    return assemble_system(problem.spatial, q, shift=1.0 / problem.dt)


def march(problem: ParabolicProblem, q: ScalarField, *, system: LinearSystem | None = None) -> StateTrajectory:
    """March the state from ``u0`` to ``T`` with backward Euler.

    Parameters
    ----------
    problem : ParabolicProblem
        Coefficients, data and time discretization.
    q : ScalarField
        Time-independent nonnegative radiativity.
    system : LinearSystem | None, optional
        Pre-assembled step operator for ``q``.

    Returns
    -------
    StateTrajectory
        ``nt + 1`` states, each carrying the boundary data of its level.

    Raises
    ------
    ProblemError
        Raised for negative ``q``.
    SolverError
        Raised when a step's linear solve misses the residual tolerance.
    """
    system = system or assemble_step_system(problem, q)
    inverse_dt = 1.0 / problem.dt
    states = [ScalarField(problem.grid, problem.u0.values, problem.boundary[0])]
    for level in range(1, problem.nt + 1):
        load = boundary_load(problem.spatial.edge_weights, problem.boundary[level])
        rhs = inverse_dt * states[-1].flat() + problem.forcing[level].flat() - load
        states.append(ScalarField(problem.grid, system.solve(rhs), problem.boundary[level]))
    logger.debug("Marched %d backward-Euler steps on n=%d (dt=%.4g)", problem.nt, problem.grid.n, problem.dt)
    return StateTrajectory(tuple(states), problem.dt)


def march_adjoint(
    problem: ParabolicProblem,
    q: ScalarField,
    residuals: Mapping[int, EdgeVectorField | ScalarField],
    *,
    system: LinearSystem | None = None,
) -> StateTrajectory:
    """Solve the backward adjoint recursion for windowed residuals.

    ``residuals`` maps a level ``m`` in the window to ``grad u^m - data`` (edge field)
    or ``u^m - data`` (nodal field). The result ``P`` has ``P[nt] = 0`` and solves
    ``(I/dt + L_q) P[m] = P[m+1]/dt + source(m+1)``, so ``P[m]`` pairs with state
    level ``m + 1``. This is the exact transpose of :func:`march`.

    Raises
    ------
    ProblemError
        Raised when a residual is given for a level outside the window.
    """
    allowed = set(problem.window_steps())
    stray = sorted(set(residuals) - allowed)
    if stray:
        raise ProblemError(f"Residuals given at levels {stray} outside the measurement window {problem.window}.")

    system = system or assemble_step_system(problem, q)
    inverse_dt = 1.0 / problem.dt
    size = problem.grid.node_count
    adjoint = [np.zeros(size) for _ in range(problem.nt + 1)]
    for level in range(problem.nt - 1, -1, -1):
        rhs = inverse_dt * adjoint[level + 1]
        residual = residuals.get(level + 1)
        if isinstance(residual, EdgeVectorField):
            rhs = rhs + neg_divergence(residual).flat()
        elif residual is not None:
            rhs = rhs + residual.flat()
        adjoint[level] = system.solve(rhs)
    return StateTrajectory(tuple(ScalarField(problem.grid, values) for values in adjoint), problem.dt)


def march_linearized(
    problem: ParabolicProblem,
    q: ScalarField,
    direction: ScalarField,
    *,
    trajectory: StateTrajectory | None = None,
    system: LinearSystem | None = None,
) -> StateTrajectory:
    """Directional derivative of the trajectory: ``(I/dt + L_q) w^m = w^{m-1}/dt - direction * u^m``."""
    system = system or assemble_step_system(problem, q)
    if trajectory is None:
        trajectory = march(problem, q, system=system)
    inverse_dt = 1.0 / problem.dt
    derivative = [np.zeros(problem.grid.node_count)]
    for level in range(1, problem.nt + 1):
        rhs = inverse_dt * derivative[-1] - direction.flat() * trajectory[level].flat()
        derivative.append(system.solve(rhs))
    return StateTrajectory(tuple(ScalarField(problem.grid, values) for values in derivative), problem.dt)


def windowed_norm(
    fields: Mapping[int, ScalarField | EdgeVectorField],
    dt: float,
    mode: str = "L2",
) -> float:
    """``sqrt(sum_m dt * ||field_m||^2)`` over the given levels.

    Edge fields use the edge inner product; nodal fields use :func:`grid.norm` in ``mode``.
    """
    total = 0.0
    for value in fields.values():
        if isinstance(value, EdgeVectorField):
            total += edge_inner_product(value, value)
        else:
            total += norm(value, mode) ** 2
    return float(np.sqrt(dt * total))
