"""Discrete Dirichlet-Laplacian eigenbasis, fractional norms, and spectral projections.

The eigenvectors of the five-point Laplacian on the unit square are the sampled sine
modes ``e_kl = 2 sin(k pi x) sin(l pi y)``. They are orthonormal in the discrete inner
product, so analysis and synthesis are a scaled type-I sine transform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

try:
    from .grid import Grid, ScalarField
except ImportError:
    from grid import Grid, ScalarField

logger = logging.getLogger(__name__)

# Extra decay exponent used when synthesizing fields of prescribed regularity.
REGULARITY_SLACK = 0.1
EXCLUDED_KAPPA = 0.5


class SpectralError(ValueError):
    """Raised for fields outside the Dirichlet basis or invalid spectral parameters."""


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigenpairs of the discrete Dirichlet Laplacian on ``grid``.

    Attributes
    ----------
    grid : Grid
        Grid whose five-point Laplacian is diagonalized.
    eigenvalues : np.ndarray
        ``(n, n)`` array with ``eigenvalues[k-1, l-1] = (4/h^2)(sin^2(k pi h/2) + sin^2(l pi h/2))``.
    order : np.ndarray
        Flat ``k``-major indices sorted so the eigenvalues are nondecreasing.
    """

    grid: Grid
    eigenvalues: np.ndarray = field(init=False, repr=False)
    order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        h = self.grid.h
        modes = np.arange(1, self.grid.n + 1)
        one_dimensional = 4.0 / h**2 * np.sin(modes * np.pi * h / 2.0) ** 2
        eigenvalues = one_dimensional[:, None] + one_dimensional[None, :]
        eigenvalues.setflags(write=False)
        order = np.argsort(eigenvalues.ravel(), kind="stable")
        order.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "order", order)

    @property
    def mu_min(self) -> float:
        return float(self.eigenvalues[0, 0])

    @property
    def mu_max(self) -> float:
        return float(self.eigenvalues[-1, -1])

    def sorted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues.ravel()[self.order]

    def mode_indices(self) -> list[tuple[int, int]]:
        """``(k, l)`` pairs, 1-based, in sorted eigenvalue order."""
        n = self.grid.n
        return [(int(index // n) + 1, int(index % n) + 1) for index in self.order]

    def eigenvector(self, k: int, l: int) -> ScalarField:
        """Normalized mode ``e_kl`` sampled on the interior nodes."""
        return ScalarField.from_function(
            self.grid, lambda xs, ys: 2.0 * np.sin(k * np.pi * xs) * np.sin(l * np.pi * ys)
        )

    @property
    def poincare_constant(self) -> float:
        """``1/sqrt(mu_min)``, the sharp discrete Poincare constant."""
        return float(1.0 / np.sqrt(self.mu_min))


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Coefficients ``c[k-1, l-1] = (u, e_kl)_h`` of a field in the sine basis."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def build_basis(grid: Grid) -> SpectralBasis:
    """Build the discrete Dirichlet eigenbasis for ``grid``."""
    basis = SpectralBasis(grid)
    logger.debug("Built spectral basis for n=%d: mu_min=%.6g mu_max=%.6g", grid.n, basis.mu_min, basis.mu_max)
    return basis


def _require_dirichlet(u: ScalarField) -> None:
    if u.boundary is not None and np.any(u.boundary != 0.0):
        raise SpectralError(
            "Spectral operations need a field with zero boundary values; "
            "subtract the boundary data first or call .interior()."
        )


def analyze(u: ScalarField) -> SpectralCoefficients:
    """Expand ``u`` in the orthonormal sine basis.

    Raises
    ------
    SpectralError
        Raised when the field carries non-zero boundary values.
    """
    _require_dirichlet(u)
    coefficients = u.grid.h * fft.dstn(u.values, type=1, norm="ortho")
    return SpectralCoefficients(u.grid, coefficients)


def synthesize(coefficients: SpectralCoefficients) -> ScalarField:
    """Inverse of :func:`analyze`."""
    grid = coefficients.grid
    values = fft.idstn(coefficients.values / grid.h, type=1, norm="ortho")
    return ScalarField(grid, values)


def fractional_norm(u: ScalarField, theta: float, basis: SpectralBasis | None = None) -> float:
    """Discrete ``||A^theta u||_0 = sqrt(sum mu^(2 theta) c^2)``.

    Negative ``theta`` gives the dual norms: ``H^{-s}`` corresponds to ``theta = -s/2``.
    """
    basis = basis or build_basis(u.grid)
    coefficients = analyze(u).values
    return float(np.sqrt(np.sum(basis.eigenvalues ** (2.0 * theta) * coefficients**2)))


def project_below(u: ScalarField, lam: float, basis: SpectralBasis | None = None) -> ScalarField:
    """Keep the modes with eigenvalue strictly below ``lam`` (``P_lambda``).

    Modes with ``mu == lam`` are dropped, so ``lam <= mu_min`` yields the zero field.
    """
    if not lam > 0:
        raise SpectralError(f"Projection level must be positive, got {lam!r}.")
    basis = basis or build_basis(u.grid)
    coefficients = analyze(u).values
    kept = np.where(basis.eigenvalues < lam, coefficients, 0.0)
    return synthesize(SpectralCoefficients(u.grid, kept))


def validate_kappa(kappa: float) -> float:
    """Reject regularity indices outside ``kappa > 0, kappa != 1/2``."""
    kappa = float(kappa)
    if not kappa > 0:
        raise SpectralError(f"Regularity index kappa must be positive, got {kappa}.")
    if np.isclose(kappa, EXCLUDED_KAPPA, rtol=0.0, atol=1e-12):
        raise SpectralError(
            "kappa = 1/2 is excluded: the convergence-rate hypotheses require kappa > 0 and kappa != 1/2."
        )
    return kappa


def random_regular_field(
    basis: SpectralBasis,
    kappa: float,
    seed: int,
    amplitude: float,
) -> ScalarField:
    """Synthesize a field in ``D(A^{kappa/2})`` that is barely any smoother.

    Coefficients are ``s_n * mu_n^{-(kappa + 1 + 0.1)/2}`` with random signs ``s_n``
    drawn in sorted eigenvalue order, then rescaled to the requested L2 amplitude.
    Drawing in sorted order keeps the low modes identical across refinements.

    Parameters
    ----------
    basis : SpectralBasis
        Basis of the target grid.
    kappa : float
        Regularity index, ``kappa > 0`` and ``kappa != 1/2``.
    seed : int
        Seed for the sign pattern.
    amplitude : float
        Discrete L2 norm of the result.
    """
    kappa = validate_kappa(kappa)
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=basis.grid.node_count)
    flat = np.empty(basis.grid.node_count)
    sorted_mu = basis.sorted_eigenvalues()
    flat[basis.order] = signs * sorted_mu ** (-(kappa + 1.0 + REGULARITY_SLACK) / 2.0)
    flat *= amplitude / np.sqrt(np.sum(flat**2))
    result = synthesize(SpectralCoefficients(basis.grid, flat.reshape(basis.grid.shape)))
    logger.debug(
        "Synthesized kappa=%.3g field (seed=%d): L2=%.6g, D(A^{kappa/2}) norm=%.6g",
        kappa,
        seed,
        amplitude,
        fractional_norm(result, kappa / 2.0, basis),
    )
    return result
