"""Analytic coefficient presets and assembly of experiments from a configuration."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

try:
    from .analysis import RegularityScenario, build_scenario
    from .elliptic import EllipticProblem
    from .experiment_config import BOUNDARY_FIELD_KEYS, ExperimentConfig
    from .grid import Grid, ScalarField, build_grid, norm
    from .helper_functions.field_io import read_field_csv
    from .inverse import AdmissibleSet
    from .parabolic import ParabolicProblem, StateTrajectory
except ImportError:
    from analysis import RegularityScenario, build_scenario
    from elliptic import EllipticProblem
    from experiment_config import BOUNDARY_FIELD_KEYS, ExperimentConfig
    from grid import Grid, ScalarField, build_grid, norm
    from helper_functions.field_io import read_field_csv
    from inverse import AdmissibleSet
    from parabolic import ParabolicProblem, StateTrajectory

logger = logging.getLogger(__name__)

# u >= 1 everywhere for q <= 20 by the maximum principle, so c0 stays near 1.
STANDARD_SOURCE = 20.0
STANDARD_BOUNDARY = 1.0
STANDARD_INITIAL = 1.0


def standard_conductivity(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return 1.0 + 0.5 * xs * ys


def sine_mode(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * xs) * np.sin(np.pi * ys)


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """Problem with a closed-form solution sampled at the nodes."""

    problem: EllipticProblem | ParabolicProblem
    q: ScalarField
    exact: ScalarField | tuple[ScalarField, ...]

    def errors(self, state: ScalarField | StateTrajectory) -> tuple[float, float]:
        """Maximum nodal error and L2 error, at the final level for trajectories."""
        if isinstance(state, StateTrajectory):
            computed, exact = state[state.nt], self.exact[-1]
        else:
            computed, exact = state, self.exact
        difference = computed.interior() - exact.interior()
        return float(np.abs(difference.values).max()), norm(difference, "L2")


def manufactured_elliptic(grid: Grid) -> ManufacturedCase:
    """``a = q = 1`` with ``u = sin(pi x) sin(pi y)`` and ``f = (2 pi^2 + 1) u``."""
    a = ScalarField.constant(grid, 1.0)
    f = ScalarField.from_function(grid, lambda xs, ys: (2.0 * np.pi**2 + 1.0) * sine_mode(xs, ys))
    problem = EllipticProblem(grid, a, f, 0.0)
    exact = ScalarField.from_function(grid, sine_mode, with_boundary=True)
    return ManufacturedCase(problem, ScalarField.constant(grid, 1.0), exact)


def manufactured_parabolic(
    grid: Grid,
    T: float = 1.0,
    nt: int = 32,
    window: tuple[float, float] | None = None,
) -> ManufacturedCase:
    """``a = q = 1`` with ``u = exp(-t) sin(pi x) sin(pi y)`` and ``f = 2 pi^2 u``."""
    a = ScalarField.constant(grid, 1.0)
    problem = ParabolicProblem.from_functions(
        grid,
        a,
        lambda xs, ys, t: 2.0 * np.pi**2 * np.exp(-t) * sine_mode(xs, ys),
        sine_mode,
        T,
        nt,
        0.0,
        window,
    )
    exact = tuple(
        ScalarField.from_function(grid, lambda xs, ys, t=t: np.exp(-t) * sine_mode(xs, ys), with_boundary=True)
        for t in problem.times()
    )
    return ManufacturedCase(problem, ScalarField.constant(grid, 1.0), exact)


def standard_elliptic(
    grid: Grid,
    *,
    a: ScalarField | None = None,
    f: ScalarField | None = None,
    g: float | np.ndarray = STANDARD_BOUNDARY,
) -> EllipticProblem:
    """Smooth conductivity, constant source and constant boundary data."""
    a = a if a is not None else ScalarField.from_function(grid, standard_conductivity, with_boundary=True)
    f = f if f is not None else ScalarField.constant(grid, STANDARD_SOURCE)
    return EllipticProblem(grid, a, f, g)


def standard_parabolic(
    grid: Grid,
    T: float,
    nt: int,
    window: tuple[float, float] | None = None,
    *,
    a: ScalarField | None = None,
    f: ScalarField | None = None,
    g: float | np.ndarray = STANDARD_BOUNDARY,
    u0: ScalarField | None = None,
) -> ParabolicProblem:
    """Time-independent version of :func:`standard_elliptic` started from ``u0 = 1``."""
    a = a if a is not None else ScalarField.from_function(grid, standard_conductivity, with_boundary=True)
    f = f if f is not None else ScalarField.constant(grid, STANDARD_SOURCE)
    u0 = u0 if u0 is not None else ScalarField.constant(grid, STANDARD_INITIAL, with_boundary=True)
    return ParabolicProblem(grid, a, f, u0, T, nt, g, window)


@dataclass(frozen=True, eq=False)
class Experiment:
    """Everything a command needs: the forward model, the box and the ground truth."""

    config: ExperimentConfig
    problem: EllipticProblem | ParabolicProblem
    admissible: AdmissibleSet
    scenario: RegularityScenario
    manufactured: ManufacturedCase | None = None


def _load_fields(config: ExperimentConfig, grid: Grid) -> dict[str, ScalarField]:
    return {
        key: read_field_csv(path, grid, include_boundary=key in BOUNDARY_FIELD_KEYS)
        for key, path in config.fields.items()
    }


def build_experiment(config: ExperimentConfig) -> Experiment:
    """Assemble the problem and the regularity scenario described by ``config``.

    The manufactured preset uses ``q_dagger = q_star = 1``; the standard preset draws
    ``q_dagger - q_star`` with regularity ``kappa``. Grid CSVs under ``[fields]``
    replace the corresponding preset fields.
    """
    grid = build_grid(config.n)
    admissible = config.admissible()
    loaded = _load_fields(config, grid)
    manufactured = None

    if config.scenario == "manufactured":
        if config.is_parabolic:
            manufactured = manufactured_parabolic(grid, config.T, config.nt, config.window)
        else:
            manufactured = manufactured_elliptic(grid)
        problem = manufactured.problem
        q_star = loaded.get("q_star", manufactured.q)
        q_dagger = loaded.get("q_dagger", manufactured.q)
    else:
        overrides = {key: loaded[key] for key in ("a", "f") if key in loaded}
        if "g" in loaded:
            overrides["g"] = loaded["g"].boundary
        if config.is_parabolic:
            problem = standard_parabolic(grid, config.T, config.nt, config.window, u0=loaded.get("u0"), **overrides)
        else:
            problem = standard_elliptic(grid, **overrides)
        q_star = loaded.get("q_star", ScalarField.constant(grid, config.q_star))
        q_dagger = loaded.get("q_dagger")

    scenario = build_scenario(
        problem,
        config.kappa,
        admissible,
        seed=config.seed,
        amplitude=config.amplitude,
        q_star=q_star,
        q_dagger=q_dagger,
    )
    logger.info("Built %s %s experiment on n=%d", config.scenario, config.system, grid.n)
    return Experiment(config, problem, admissible, scenario, manufactured)
