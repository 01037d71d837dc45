"""Tikhonov reconstruction of the radiativity from interior state or gradient data.

The objective is ``J(q) = misfit(q) + beta/2 * ||q - q_star||^2`` on the discrete grid. Its
gradient is evaluated exactly through the discrete adjoint and minimized by projected
gradient descent over the box ``q_lo <= q <= q_hi``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
import pandas as pd

try:
    from .elliptic import EllipticProblem, LinearSystem, assemble_system, solve, solve_adjoint
    from .grid import EdgeVectorField, ScalarField, edge_inner_product, gradient as grad, inner_product, norm
    from .parabolic import ParabolicProblem, StateTrajectory, assemble_step_system, march, march_adjoint, windowed_norm
except ImportError:
    from elliptic import EllipticProblem, LinearSystem, assemble_system, solve, solve_adjoint
    from grid import EdgeVectorField, ScalarField, edge_inner_product, gradient as grad, inner_product, norm
    from parabolic import ParabolicProblem, StateTrajectory, assemble_step_system, march, march_adjoint, windowed_norm

logger = logging.getLogger(__name__)

SYSTEMS = ("elliptic", "parabolic")
DATA_MODES = ("gradient", "value")
HISTORY_COLUMNS = ["iter", "objective", "misfit", "proj_grad_norm"]
STOP_CONVERGED = "projected gradient below tolerance"
STOP_MAX_ITERS = "iteration limit"
STOP_LINE_SEARCH = "line-search failure"
MIN_TRIAL_STEP = 1e-8
MAX_TRIAL_STEP = 1e8
BOUNDS_TOLERANCE = 1e-12

Problem = Union[EllipticProblem, ParabolicProblem]
Residual = Union[ScalarField, EdgeVectorField]


class InversionError(ValueError):
    """Raised for invalid inversion set-ups: noise level, regularization, bounds, or modes."""


def _check_mode(mode: str) -> str:
    if mode not in DATA_MODES:
        raise InversionError(f"Unknown data mode '{mode}'. Use one of {', '.join(DATA_MODES)}.")
    return mode


@dataclass(frozen=True)
class AdmissibleSet:
    """Box ``0 < q_lo <= q <= q_hi``."""

    q_lo: float
    q_hi: float

    def __post_init__(self) -> None:
        if not 0.0 < self.q_lo < self.q_hi:
            raise InversionError(f"Admissible bounds need 0 < q_lo < q_hi, got q_lo={self.q_lo}, q_hi={self.q_hi}.")

    def contains(self, q: ScalarField, tolerance: float = BOUNDS_TOLERANCE) -> bool:
        return bool(np.all(q.values >= self.q_lo - tolerance) and np.all(q.values <= self.q_hi + tolerance))


@dataclass(frozen=True)
class OptimizerSettings:
    """Projected-gradient controls."""

    max_iters: int = 500
    grad_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise InversionError(f"max_iters must be nonnegative, got {self.max_iters}.")
        if not self.grad_tol > 0:
            raise InversionError(f"grad_tol must be positive, got {self.grad_tol}.")
        if not 0.0 < self.armijo_c < 1.0:
            raise InversionError(f"armijo_c must lie in (0, 1), got {self.armijo_c}.")
        if not 0.0 < self.backtrack < 1.0:
            raise InversionError(f"backtrack must lie in (0, 1), got {self.backtrack}.")
        if not self.initial_step > 0:
            raise InversionError(f"initial_step must be positive, got {self.initial_step}.")


@dataclass(frozen=True, eq=False)
class TikhonovConfig:
    """Regularization parameter, prior guess and optimizer settings."""

    beta: float
    q_star: ScalarField
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self) -> None:
        if not self.beta >= 0.0:
            raise InversionError(f"Regularization parameter must be nonnegative, got beta={self.beta}.")

    def require_admissible(self, admissible: AdmissibleSet) -> None:
        if not admissible.contains(self.q_star):
            raise InversionError(
                f"Prior q_star leaves the admissible box [{admissible.q_lo}, {admissible.q_hi}] "
                f"(range {self.q_star.values.min():.6g}..{self.q_star.values.max():.6g})."
            )


@dataclass(frozen=True, eq=False)
class Measurement:
    """Noisy data at exact noise level ``delta``.

    Attributes
    ----------
    system : str
        ``"elliptic"`` or ``"parabolic"``.
    mode : str
        ``"gradient"`` for ``grad z`` data or ``"value"`` for ``z`` data.
    data : ScalarField | EdgeVectorField | Mapping[int, ScalarField | EdgeVectorField]
        Elliptic data, or parabolic data keyed by window level.
    delta : float
        Discrepancy to the exact data in the mode's norm (time-integrated over the
        window for parabolic data).
    seed : int
        Seed of the noise realization.
    dt : float | None
        Step size weighting the parabolic misfit.
    """

    system: str
    mode: str
    data: Residual | Mapping[int, Residual]
    delta: float
    seed: int = 0
    dt: float | None = None


def _noise_like(template: Residual, rng: np.random.Generator) -> Residual:
    if isinstance(template, EdgeVectorField):
        return EdgeVectorField(
            template.grid, rng.standard_normal(template.x.shape), rng.standard_normal(template.y.shape)
        )
    return ScalarField(template.grid, rng.standard_normal(template.grid.shape))


def _observe(state: ScalarField, mode: str) -> Residual:
    """Exact data of a state: its edge gradient or its interior values."""
    return grad(state) if mode == "gradient" else state.interior()


def _size(value: Residual) -> float:
    if isinstance(value, EdgeVectorField):
        return float(np.sqrt(edge_inner_product(value, value)))
    return norm(value, "L2")


def make_measurement(
    truth: ScalarField | StateTrajectory,
    mode: str,
    delta: float,
    seed: int,
    *,
    problem: ParabolicProblem | None = None,
) -> Measurement:
    """Perturb exact data by a fixed-seed noise field scaled to norm ``delta``.

    Parameters
    ----------
    truth : ScalarField | StateTrajectory
        Exact elliptic state ``u(q_dagger)`` or exact parabolic trajectory.
    mode : str
        ``"gradient"`` or ``"value"``.
    delta : float
        Noise level, nonnegative.
    seed : int
        Seed of the noise direction.
    problem : ParabolicProblem | None, optional
        Required for trajectories; supplies the measurement window.

    Returns
    -------
    Measurement
        Data whose discrepancy to the exact data equals ``delta``.

    Raises
    ------
    InversionError
        Raised for a negative ``delta``, an unknown mode, or a trajectory without
        its problem.
    """
    mode = _check_mode(mode)
    if not delta >= 0.0:
        raise InversionError(f"Noise level must be nonnegative, got delta={delta}.")
    rng = np.random.default_rng(seed)

    if isinstance(truth, StateTrajectory):
        if problem is None:
            raise InversionError("Parabolic measurements need the ParabolicProblem for their window.")
        steps = problem.window_steps()
        exact = {level: _observe(truth[level], mode) for level in steps}
        noise = {level: _noise_like(exact[level], rng) for level in steps}
        scale = windowed_norm(noise, problem.dt)
        data = {level: exact[level] + (delta / scale) * noise[level] for level in steps}
        return Measurement("parabolic", mode, data, float(delta), seed, problem.dt)

    exact = _observe(truth, mode)
    noise = _noise_like(exact, rng)
    data = exact + (delta / _size(noise)) * noise
    return Measurement("elliptic", mode, data, float(delta), seed)


@dataclass(frozen=True, eq=False)
class ForwardPass:
    """State, data residual and misfit for one radiativity, ready for the adjoint."""

    q: ScalarField
    state: ScalarField | StateTrajectory
    residual: Residual | Mapping[int, Residual]
    misfit: float
    regularization: float
    system: LinearSystem

    @property
    def objective(self) -> float:
        return self.misfit + self.regularization

    @property
    def discrepancy(self) -> float:
        return float(np.sqrt(2.0 * self.misfit))


def _require_system(problem: Problem, measurement: Measurement) -> None:
    expected = "parabolic" if isinstance(problem, ParabolicProblem) else "elliptic"
    if measurement.system != expected:
        raise InversionError(f"{measurement.system.capitalize()} data cannot drive a {expected} problem.")
    _check_mode(measurement.mode)


def forward_pass(q: ScalarField, problem: Problem, measurement: Measurement, config: TikhonovConfig) -> ForwardPass:
    """Solve the state equation for ``q`` and evaluate the objective terms."""
    _require_system(problem, measurement)
    gap = q - config.q_star
    regularization = 0.5 * config.beta * inner_product(gap, gap)

    if isinstance(problem, ParabolicProblem):
        system = assemble_step_system(problem, q)
        trajectory = march(problem, q, system=system)
        residual = {
            level: _observe(trajectory[level], measurement.mode) - observed
            for level, observed in measurement.data.items()
        }
        misfit = 0.5 * windowed_norm(residual, problem.dt) ** 2
        return ForwardPass(q, trajectory, residual, misfit, regularization, system)

    system = assemble_system(problem, q)
    state = solve(problem, q, system=system)
    residual = _observe(state, measurement.mode) - measurement.data
    misfit = 0.5 * _size(residual) ** 2
    return ForwardPass(q, state, residual, misfit, regularization, system)


def backward_pass(evaluation: ForwardPass, problem: Problem, config: TikhonovConfig) -> ScalarField:
    """Gradient of the objective at ``evaluation.q`` in the discrete inner product."""
    q = evaluation.q
    penalty = config.beta * (q.values - config.q_star.values)
    if isinstance(problem, ParabolicProblem):
        adjoint = march_adjoint(problem, q, evaluation.residual, system=evaluation.system)
        trajectory = evaluation.state
        density = np.zeros(problem.grid.shape)
        for level in range(problem.nt):
            density -= trajectory[level + 1].values * adjoint[level].values
        return ScalarField(problem.grid, problem.dt * density + penalty)

    adjoint = solve_adjoint(problem, q, evaluation.residual, system=evaluation.system)
    return ScalarField(problem.grid, -evaluation.state.values * adjoint.values + penalty)


def objective(q: ScalarField, problem: Problem, measurement: Measurement, config: TikhonovConfig) -> float:
    """Tikhonov functional ``misfit(q) + beta/2 * ||q - q_star||^2``.

    The misfit is ``1/2 ||grad u(q) - grad z||^2`` or ``1/2 ||u(q) - z||^2`` for elliptic
    data and the ``dt``-weighted sum over the window levels for parabolic data.
    """
    return forward_pass(q, problem, measurement, config).objective


def gradient(q: ScalarField, problem: Problem, measurement: Measurement, config: TikhonovConfig) -> ScalarField:
    """Exact gradient of the discrete objective.

    The nodal density is ``-u(q) p + beta (q - q_star)`` for elliptic data and
    ``-dt * sum_m u^{m+1} P[m] + beta (q - q_star)`` for parabolic data, where ``p``
    and ``P`` come from the adjoint solvers.
    """
    evaluation = forward_pass(q, problem, measurement, config)
    return backward_pass(evaluation, problem, config)


def project_admissible(q: ScalarField, admissible: AdmissibleSet) -> ScalarField:
    """Clamp ``q`` into the admissible box node by node."""
    return q.with_values(np.clip(q.values, admissible.q_lo, admissible.q_hi))


def projected_gradient_norm(q: ScalarField, direction: ScalarField, admissible: AdmissibleSet) -> float:
    """``||q - P_K(q - direction)||``, zero exactly at stationary points of the box problem."""
    return norm(q - project_admissible(q - direction, admissible), "L2")


@dataclass(frozen=True, eq=False)
class InversionResult:
    """Outcome of :func:`minimize`.

    Attributes
    ----------
    q_rec : ScalarField
        Final (best) iterate, inside the admissible box.
    history : pd.DataFrame
        One row per accepted iterate with columns ``iter, objective, misfit, proj_grad_norm``.
    objective : float
        Objective at ``q_rec``.
    misfit : float
        Data misfit at ``q_rec``.
    discrepancy : float
        ``sqrt(2 * misfit)``, the data residual norm.
    iterations : int
        Accepted steps taken.
    converged : bool
        Whether the projected-gradient tolerance was met.
    stop_reason : str
        Why the iteration ended.
    state : ScalarField | StateTrajectory
        State for ``q_rec``.
    """

    q_rec: ScalarField
    history: pd.DataFrame
    objective: float
    misfit: float
    discrepancy: float
    iterations: int
    converged: bool
    stop_reason: str
    state: ScalarField | StateTrajectory


def minimize(
    problem: Problem,
    measurement: Measurement,
    config: TikhonovConfig,
    admissible: AdmissibleSet,
    q0: ScalarField,
) -> InversionResult:
    """Minimize the Tikhonov functional over the admissible box.

    Projected gradient descent with Armijo backtracking along the projection arc. The
    first trial step is ``initial_step``; later ones use the Barzilai-Borwein ratio of
    the previous accepted step.

    Parameters
    ----------
    problem : EllipticProblem | ParabolicProblem
        Forward model.
    measurement : Measurement
        Noisy data matching the problem's system.
    config : TikhonovConfig
        ``beta``, ``q_star`` and optimizer settings.
    admissible : AdmissibleSet
        Box constraints.
    q0 : ScalarField
        Starting point inside the box.

    Returns
    -------
    InversionResult
        Best iterate and diagnostics. Line-search failure is reported through
        ``stop_reason`` rather than raised.

    Raises
    ------
    InversionError
        Raised when ``q0`` or ``q_star`` lies outside the box.
    """
    config.require_admissible(admissible)
    if not admissible.contains(q0):
        raise InversionError(f"Starting point leaves the admissible box [{admissible.q_lo}, {admissible.q_hi}].")
    settings = config.optimizer

    q = project_admissible(q0, admissible)
    current = forward_pass(q, problem, measurement, config)
    direction = backward_pass(current, problem, config)
    pg_norm = projected_gradient_norm(q, direction, admissible)
    tolerance = settings.grad_tol * (1.0 + pg_norm)
    rows = [(0, current.objective, current.misfit, pg_norm)]

    step = settings.initial_step
    iterations = 0
    stop_reason = STOP_MAX_ITERS
    converged = False
    while True:
        if pg_norm <= tolerance:
            converged = True
            stop_reason = STOP_CONVERGED
            break
        if iterations >= settings.max_iters:
            break

        trial_step = step
        accepted: ForwardPass | None = None
        for halvings in range(settings.max_backtracks + 1):
            candidate = project_admissible(q - trial_step * direction, admissible)
            predicted = inner_product(direction, candidate - q)
            trial = forward_pass(candidate, problem, measurement, config)
            if trial.objective <= current.objective + settings.armijo_c * predicted:
                accepted = trial
                break
            trial_step *= settings.backtrack
        if accepted is None:
            stop_reason = STOP_LINE_SEARCH
            logger.warning("Line search failed after %d halvings at iteration %d", settings.max_backtracks, iterations)
            break

        new_direction = backward_pass(accepted, problem, config)
        s = accepted.q.values - q.values
        y = new_direction.values - direction.values
        curvature = float(np.sum(s * y))
        if curvature > 0.0:
            step = float(np.clip(np.sum(s * s) / curvature, MIN_TRIAL_STEP, MAX_TRIAL_STEP))

        q, current, direction = accepted.q, accepted, new_direction
        pg_norm = projected_gradient_norm(q, direction, admissible)
        iterations += 1
        rows.append((iterations, current.objective, current.misfit, pg_norm))
        logger.debug(
            "iter %d: J=%.10g misfit=%.4g |pg|=%.3e step=%.3g halvings=%d",
            iterations,
            current.objective,
            current.misfit,
            pg_norm,
            trial_step,
            halvings,
        )

    logger.info(
        "Inversion stopped after %d iterations (%s): J=%.6g, discrepancy=%.4g, |pg|=%.3e",
        iterations,
        stop_reason,
        current.objective,
        current.discrepancy,
        pg_norm,
    )
    return InversionResult(
        q_rec=q,
        history=pd.DataFrame(rows, columns=HISTORY_COLUMNS),
        objective=current.objective,
        misfit=current.misfit,
        discrepancy=current.discrepancy,
        iterations=iterations,
        converged=converged,
        stop_reason=stop_reason,
        state=current.state,
    )
