"""Uniform grids on the unit square, discrete fields, and summation-by-parts operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sps

logger = logging.getLogger(__name__)

NORM_MODES = ("L2", "H1", "H1_semi")

FieldFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class GridError(ValueError):
    """Raised for invalid grids, mismatched fields, or unsupported norm modes."""


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of ``(0, 1)^2`` with ``n`` interior nodes per axis.

    Attributes
    ----------
    n : int
        Interior nodes per axis. Nodes sit at ``x_i = i*h`` and ``y_j = j*h`` for
        ``i, j`` in ``1..n``; indices ``0`` and ``n+1`` are boundary nodes.
    """

    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise GridError(f"Grid needs at least one interior node per axis, got n={self.n!r}.")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def node_count(self) -> int:
        return self.n * self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def padded_shape(self) -> tuple[int, int]:
        return (self.n + 2, self.n + 2)

    def coordinates(self) -> np.ndarray:
        """Return the interior node coordinates ``h, 2h, ..., n*h``."""
        return np.arange(1, self.n + 1) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return interior ``(X, Y)`` arrays indexed ``[i-1, j-1]``."""
        coords = self.coordinates()
        return np.meshgrid(coords, coords, indexing="ij")

    def padded_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` over all ``(n+2)^2`` nodes, boundary included."""
        coords = np.arange(self.n + 2) * self.h
        coords[-1] = 1.0
        return np.meshgrid(coords, coords, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        """Boolean ``(n+2, n+2)`` mask that is true on boundary nodes."""
        mask = np.ones(self.padded_shape, dtype=bool)
        mask[1:-1, 1:-1] = False
        return mask


def build_grid(n: int) -> Grid:
    """Build the uniform grid with ``n`` interior nodes per axis.

    Raises
    ------
    GridError
        Raised when ``n`` is zero, negative, or not an integer.
    """
    return Grid(n)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def boundary_frame(grid: Grid, data: float | FieldFunction | np.ndarray) -> np.ndarray:
    """Build a padded ``(n+2, n+2)`` boundary array whose interior entries are zero.

    ``data`` may be a constant, a callable ``f(X, Y)`` evaluated on all nodes, or an
    array of the padded shape whose boundary entries are kept.
    """
    if callable(data):
        xs, ys = grid.padded_mesh()
        frame = np.asarray(data(xs, ys), dtype=float) * np.ones(grid.padded_shape)
    elif np.ndim(data) == 0:
        frame = np.full(grid.padded_shape, float(data))
    else:
        frame = np.array(data, dtype=float, copy=True)
        if frame.shape != grid.padded_shape:
            raise GridError(f"Boundary array must have shape {grid.padded_shape}, got {frame.shape}.")
    frame[1:-1, 1:-1] = 0.0
    return frame


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal field on the interior nodes with a boundary closure.

    Attributes
    ----------
    grid : Grid
        Grid the field lives on.
    values : np.ndarray
        ``(n, n)`` interior values indexed ``[i-1, j-1]``.
    boundary : np.ndarray | None
        ``None`` for the implicit-zero (H0^1) closure, otherwise a padded
        ``(n+2, n+2)`` array whose boundary entries hold the Dirichlet values and
        whose interior entries are zero.
    """

    grid: Grid
    values: np.ndarray
    boundary: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.node_count:
            raise GridError(f"Field needs {self.grid.node_count} values, got {values.size}.")
        object.__setattr__(self, "values", _frozen(values.reshape(self.grid.shape)))
        if self.boundary is not None:
            object.__setattr__(self, "boundary", _frozen(boundary_frame(self.grid, self.boundary)))

    @property
    def implicit_zero(self) -> bool:
        return self.boundary is None

    @classmethod
    def zeros(cls, grid: Grid) -> ScalarField:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float, *, with_boundary: bool = False) -> ScalarField:
        """Constant field; with ``with_boundary`` the closure carries the same constant."""
        boundary = boundary_frame(grid, value) if with_boundary else None
        return cls(grid, np.full(grid.shape, float(value)), boundary)

    @classmethod
    def from_function(cls, grid: Grid, func: FieldFunction, *, with_boundary: bool = False) -> ScalarField:
        """Sample ``func(X, Y)`` on the interior nodes, and on the boundary if requested."""
        xs, ys = grid.mesh()
        values = np.asarray(func(xs, ys), dtype=float) * np.ones(grid.shape)
        boundary = boundary_frame(grid, func) if with_boundary else None
        return cls(grid, values, boundary)

    def padded(self) -> np.ndarray:
        """Return all ``(n+2)^2`` nodal values, closure included."""
        full = np.zeros(self.grid.padded_shape) if self.boundary is None else np.array(self.boundary)
        full[1:-1, 1:-1] = self.values
        return full

    def flat(self) -> np.ndarray:
        """Interior values in row-major ``(i, j)`` order."""
        return self.values.ravel()

    def with_values(self, values: np.ndarray) -> ScalarField:
        """Return a field with new interior values and the same closure."""
        return ScalarField(self.grid, np.asarray(values).reshape(self.grid.shape), self.boundary)

    def interior(self) -> ScalarField:
        """Drop the closure and keep the interior values (implicit-zero field)."""
        return ScalarField(self.grid, self.values)

    def _combine(self, other: ScalarField, sign: float) -> ScalarField:
        _require_same_grid(self, other)
        if self.boundary is None and other.boundary is None:
            boundary = None
        else:
            boundary = _frame_or_zero(self) + sign * _frame_or_zero(other)
        return ScalarField(self.grid, self.values + sign * other.values, boundary)

    def __add__(self, other: ScalarField) -> ScalarField:
        return self._combine(other, 1.0)

    def __sub__(self, other: ScalarField) -> ScalarField:
        return self._combine(other, -1.0)

    def __mul__(self, scalar: float) -> ScalarField:
        boundary = None if self.boundary is None else scalar * self.boundary
        return ScalarField(self.grid, scalar * self.values, boundary)

    __rmul__ = __mul__

    def __neg__(self) -> ScalarField:
        return self * -1.0


def _frame_or_zero(field: ScalarField) -> np.ndarray:
    return np.zeros(field.grid.padded_shape) if field.boundary is None else field.boundary


@dataclass(frozen=True, eq=False)
class EdgeVectorField:
    """Edge-based vector field: x-components on vertical edges, y-components on horizontal ones.

    ``x`` has shape ``(n+1, n)``: entry ``[a, j]`` sits between nodes ``(a, j+1)`` and
    ``(a+1, j+1)`` of the padded grid. ``y`` has shape ``(n, n+1)`` with the analogous
    layout along the second axis.
    """

    grid: Grid
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.size != (n + 1) * n or y.size != n * (n + 1):
            raise GridError(
                f"Edge field on n={n} needs {(n + 1) * n} x- and y-components, got {x.size} and {y.size}."
            )
        object.__setattr__(self, "x", _frozen(x.reshape(n + 1, n)))
        object.__setattr__(self, "y", _frozen(y.reshape(n, n + 1)))

    @classmethod
    def zeros(cls, grid: Grid) -> EdgeVectorField:
        n = grid.n
        return cls(grid, np.zeros((n + 1, n)), np.zeros((n, n + 1)))

    def flat(self) -> np.ndarray:
        """Stack x- then y-components, matching the rows of :func:`gradient_matrix`."""
        return np.concatenate([self.x.ravel(), self.y.ravel()])

    @classmethod
    def from_flat(cls, grid: Grid, flat: np.ndarray) -> EdgeVectorField:
        split = (grid.n + 1) * grid.n
        return cls(grid, flat[:split], flat[split:])

    def __add__(self, other: EdgeVectorField) -> EdgeVectorField:
        _require_same_grid(self, other)
        return EdgeVectorField(self.grid, self.x + other.x, self.y + other.y)

    def __sub__(self, other: EdgeVectorField) -> EdgeVectorField:
        _require_same_grid(self, other)
        return EdgeVectorField(self.grid, self.x - other.x, self.y - other.y)

    def __mul__(self, other: float | EdgeVectorField) -> EdgeVectorField:
        if isinstance(other, EdgeVectorField):
            _require_same_grid(self, other)
            return EdgeVectorField(self.grid, self.x * other.x, self.y * other.y)
        return EdgeVectorField(self.grid, other * self.x, other * self.y)

    __rmul__ = __mul__


def _require_same_grid(*fields: ScalarField | EdgeVectorField) -> Grid:
    grid = fields[0].grid
    for field in fields[1:]:
        if field.grid != grid:
            raise GridError(f"Fields live on different grids (n={grid.n} and n={field.grid.n}).")
    return grid


def inner_product(u: ScalarField, v: ScalarField) -> float:
    """Discrete L2 inner product ``(u, v)_h = h^2 * sum(u_ij * v_ij)`` over interior nodes."""
    grid = _require_same_grid(u, v)
    return float(grid.h**2 * np.sum(u.values * v.values))


def edge_inner_product(v: EdgeVectorField, w: EdgeVectorField) -> float:
    """Edge inner product ``h^2 * sum`` over both edge families."""
    grid = _require_same_grid(v, w)
    return float(grid.h**2 * (np.sum(v.x * w.x) + np.sum(v.y * w.y)))


def gradient(u: ScalarField) -> EdgeVectorField:
    """Forward differences across every edge, using closure values next to the boundary."""
    full = u.padded()
    h = u.grid.h
    gx = (full[1:, 1:-1] - full[:-1, 1:-1]) / h
    gy = (full[1:-1, 1:] - full[1:-1, :-1]) / h
    return EdgeVectorField(u.grid, gx, gy)


def neg_divergence(w: EdgeVectorField) -> ScalarField:
    """Exact adjoint of :func:`gradient` on implicit-zero fields.

    For every implicit-zero ``u``, ``edge_inner_product(gradient(u), w)`` equals
    ``inner_product(u, neg_divergence(w))``.
    """
    h = w.grid.h
    values = (w.x[:-1, :] - w.x[1:, :]) / h + (w.y[:, :-1] - w.y[:, 1:]) / h
    return ScalarField(w.grid, values)


def neg_div_gradient(u: ScalarField) -> ScalarField:
    """Five-point negative Laplacian ``-div(grad u)`` on the interior nodes."""
    return neg_divergence(gradient(u))


def norm(u: ScalarField, mode: str = "L2") -> float:
    """Discrete L2, H1 seminorm, or full H1 norm of a field.

    Parameters
    ----------
    u : ScalarField
        Field to measure; the H1 modes use its boundary closure.
    mode : str
        One of ``"L2"``, ``"H1_semi"`` or ``"H1"``.

    Raises
    ------
    GridError
        Raised for an unknown mode.
    """
    if mode not in NORM_MODES:
        raise GridError(f"Unknown norm mode '{mode}'. Use one of {', '.join(NORM_MODES)}.")
    l2_squared = inner_product(u, u)
    if mode == "L2":
        return float(np.sqrt(l2_squared))
    grad = gradient(u)
    semi_squared = edge_inner_product(grad, grad)
    if mode == "H1_semi":
        return float(np.sqrt(semi_squared))
    return float(np.sqrt(l2_squared + semi_squared))


@lru_cache(maxsize=32)
def gradient_matrix(n: int) -> sps.csr_matrix:
    """Sparse edge-by-node matrix of :func:`gradient` for implicit-zero fields.

    Nodes are numbered ``i*n + j``; rows list x-edges ``a*n + j`` first and then
    y-edges ``i*(n+1) + b``, matching :meth:`EdgeVectorField.flat`.
    """
    h = 1.0 / (n + 1)
    forward = sps.diags([np.ones(n), -np.ones(n)], [0, -1], shape=(n + 1, n)) / h
    identity = sps.identity(n)
    matrix = sps.vstack([sps.kron(forward, identity), sps.kron(identity, forward)])
    logger.debug("Assembled gradient matrix for n=%d with %d edges", n, matrix.shape[0])
    return matrix.tocsr()
