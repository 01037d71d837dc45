"""Empirical checks of stability estimates, source conditions and convergence rates.

The helpers here turn the solvers of :mod:`elliptic`, :mod:`parabolic` and :mod:`inverse`
into measurements: admissible regularity scenarios, the a-priori parameter choice, implied
stability and source-condition constants over sample sets, and log-log rate studies.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import pandas as pd

try:
    from .elliptic import EllipticProblem, solve
    from .grid import ScalarField, inner_product, norm
    from .inverse import (
        AdmissibleSet,
        InversionResult,
        OptimizerSettings,
        TikhonovConfig,
        forward_pass,
        make_measurement,
        minimize,
        project_admissible,
    )
    from .parabolic import ParabolicProblem, StateTrajectory, march, windowed_norm
    from .spectral import SpectralError, analyze, build_basis, fractional_norm, random_regular_field, validate_kappa
except ImportError:
    from elliptic import EllipticProblem, solve
    from grid import ScalarField, inner_product, norm
    from inverse import (
        AdmissibleSet,
        InversionResult,
        OptimizerSettings,
        TikhonovConfig,
        forward_pass,
        make_measurement,
        minimize,
        project_admissible,
    )
    from parabolic import ParabolicProblem, StateTrajectory, march, windowed_norm
    from spectral import SpectralError, analyze, build_basis, fractional_norm, random_regular_field, validate_kappa

logger = logging.getLogger(__name__)

ALPHA_RULES = ("elliptic", "alternative")
STABILITY_MODES = ("gradient_H1", "value_sqrtL2", "parabolic_H1", "parabolic_sqrtL2")
DEFAULT_EPSILON = 0.25
DEFAULT_MARGIN = 0.05
DEFAULT_LP_EXPONENT = 4.0
COMPARISON_SLACK = 1e-6
MIN_RATE_POINTS = 4
INCONCLUSIVE_EXCLUSIONS = 2
SAMPLE_MODES_PER_AXIS = 6
SAMPLE_MIN_FRACTION = 0.2
SCENARIO_FIT_FRACTION = 0.95

RATE_COLUMNS = ["delta", "beta", "err_q_l2", "err_state", "iters", "converged"]
DIAGNOSTIC_COLUMNS = [
    "delta",
    "misfit",
    "objective",
    "objective_truth",
    "penalty_gap",
    "penalty_bound",
    "comparison_ok",
    "err_q_lp",
]
SUMMARY_COLUMNS = ["alpha", "kappa", "q_slope", "state_slope", "q_slope_r2", "state_slope_r2"]
SPECTRAL_COLUMNS = ["k", "l", "mu", "coefficient"]

Problem = Union[EllipticProblem, ParabolicProblem]
State = Union[ScalarField, StateTrajectory]


class AnalysisError(RuntimeError):
    """Raised when an empirical check cannot be carried out on its inputs."""


def _require_kappa(kappa: float) -> float:
    try:
        return validate_kappa(kappa)
    except SpectralError as exc:
        raise AnalysisError(str(exc)) from exc


def _system_of(problem: Problem) -> str:
    return "parabolic" if isinstance(problem, ParabolicProblem) else "elliptic"


def compute_state(problem: Problem, q: ScalarField) -> State:
    """Elliptic solution or parabolic trajectory for ``q``."""
    if isinstance(problem, ParabolicProblem):
        return march(problem, q)
    return solve(problem, q)


def state_difference_norm(problem: Problem, state: State, reference: State, mode: str) -> float:
    """Norm of ``state - reference``: nodal for elliptic, windowed ``L2(I; .)`` for parabolic."""
    if isinstance(problem, ParabolicProblem):
        differences = {level: state[level] - reference[level] for level in problem.window_steps()}
        return windowed_norm(differences, problem.dt, mode)
    return norm(state - reference, mode)


@dataclass(frozen=True, eq=False)
class RegularityScenario:
    """Ground truth for a reconstruction experiment.

    Attributes
    ----------
    kappa : float
        Regularity index of ``q_dagger - q_star``.
    q_dagger : ScalarField
        Exact radiativity inside the admissible box.
    q_star : ScalarField
        Prior guess inside the admissible box.
    c0 : float
        Verified lower bound of ``|u(q_dagger)|`` over the nodes (and the window levels
        for parabolic problems).
    admissible : AdmissibleSet
        Box both fields respect.
    source_size : float
        ``||q_dagger - q_star||`` in ``D(A^{kappa/2})``.
    truth_state : ScalarField | StateTrajectory
        Exact state ``u(q_dagger)``.
    """

    kappa: float
    q_dagger: ScalarField
    q_star: ScalarField
    c0: float
    admissible: AdmissibleSet
    source_size: float
    truth_state: State = field(repr=False)


def _fit_perturbation(q_star: ScalarField, perturbation: ScalarField, admissible: AdmissibleSet) -> float:
    """Largest scale ``s <= 1`` keeping ``q_star + s * perturbation`` inside the box."""
    values = perturbation.values
    room_up = np.where(values > 0, (admissible.q_hi - q_star.values) / np.where(values > 0, values, 1.0), np.inf)
    room_down = np.where(values < 0, (admissible.q_lo - q_star.values) / np.where(values < 0, values, 1.0), np.inf)
    limit = float(min(room_up.min(), room_down.min()))
    return 1.0 if limit >= 1.0 else SCENARIO_FIT_FRACTION * limit


def build_scenario(
    problem: Problem,
    kappa: float,
    admissible: AdmissibleSet,
    *,
    seed: int = 0,
    amplitude: float = 0.3,
    q_star: ScalarField | None = None,
    q_dagger: ScalarField | None = None,
) -> RegularityScenario:
    """Assemble and verify a regularity scenario.

    When ``q_dagger`` is omitted it is ``q_star`` plus a synthesized field of regularity
    ``kappa``; perturbations leaving the box are shrunk to fit with a warning.

    Parameters
    ----------
    problem : EllipticProblem | ParabolicProblem
        Forward model used to verify ``|u(q_dagger)| >= c0``.
    kappa : float
        Regularity index, ``kappa > 0`` and ``kappa != 1/2``.
    admissible : AdmissibleSet
        Box for both fields.
    seed : int, optional
        Seed of the synthesized perturbation.
    amplitude : float, optional
        L2 size of the synthesized perturbation before any fitting.
    q_star, q_dagger : ScalarField | None, optional
        Explicit fields; ``q_star`` defaults to the box midpoint.

    Raises
    ------
    AnalysisError
        Raised for an excluded ``kappa``, fields outside the box, or a state that
        touches zero.
    """
    kappa = _require_kappa(kappa)
    grid = problem.grid
    if q_star is None:
        q_star = ScalarField.constant(grid, 0.5 * (admissible.q_lo + admissible.q_hi))
    if not admissible.contains(q_star):
        raise AnalysisError(f"Prior q_star leaves the admissible box [{admissible.q_lo}, {admissible.q_hi}].")

    basis = build_basis(grid)
    if q_dagger is None:
        perturbation = random_regular_field(basis, kappa, seed, amplitude)
        scale = _fit_perturbation(q_star, perturbation, admissible)
        if scale < 1.0:
            logger.warning(
                "Perturbation of amplitude %.4g leaves [%.4g, %.4g]; rescaled by %.4f to fit",
                amplitude,
                admissible.q_lo,
                admissible.q_hi,
                scale,
            )
        q_dagger = q_star + scale * perturbation
    elif not admissible.contains(q_dagger):
        raise AnalysisError(f"Exact radiativity leaves the admissible box [{admissible.q_lo}, {admissible.q_hi}].")

    truth_state = compute_state(problem, q_dagger)
    if isinstance(truth_state, StateTrajectory):
        c0 = min(float(np.abs(truth_state[level].values).min()) for level in problem.window_steps())
    else:
        c0 = float(np.abs(truth_state.values).min())
    if not c0 > 0.0:
        raise AnalysisError(f"Exact state vanishes somewhere (min |u(q_dagger)| = {c0:.3e}); choose data with u bounded away from 0.")

    source_size = fractional_norm((q_dagger - q_star).interior(), kappa / 2.0, basis)
    logger.info(
        "Scenario kappa=%.3g on n=%d: c0=%.4g, ||q_dagger - q_star||=%.4g, source size A=%.4g",
        kappa,
        grid.n,
        c0,
        norm(q_dagger - q_star, "L2"),
        source_size,
    )
    return RegularityScenario(kappa, q_dagger, q_star, c0, admissible, source_size, truth_state)


def select_alpha(
    kappa: float,
    data_mode: str,
    system: str = "elliptic",
    margin: float = DEFAULT_MARGIN,
    rule: str = "elliptic",
) -> float:
    """Exponent of the variational source condition implied by regularity ``kappa``.

    Gradient data give ``1`` for ``kappa > 1`` and ``(1 - margin) * 2 kappa/(1 + kappa)``
    otherwise; value data give half of those. For parabolic systems ``rule="alternative"``
    replaces ``1 + kappa`` by ``1 + 2 kappa`` in the low-regularity branch.
    """
    kappa = _require_kappa(kappa)
    if data_mode not in ("gradient", "value"):
        raise AnalysisError(f"Unknown data mode '{data_mode}'.")
    if system not in ("elliptic", "parabolic"):
        raise AnalysisError(f"Unknown system '{system}'.")
    if rule not in ALPHA_RULES:
        raise AnalysisError(f"Unknown alpha rule '{rule}'. Use one of {', '.join(ALPHA_RULES)}.")
    if not 0.0 < margin < 1.0:
        raise AnalysisError(f"Margin must lie in (0, 1), got {margin}.")

    ceiling = 1.0 if data_mode == "gradient" else 0.5
    if kappa > 1.0:
        return ceiling
    denominator = 1.0 + 2.0 * kappa if system == "parabolic" and rule == "alternative" else 1.0 + kappa
    return (1.0 - margin) * 2.0 * ceiling * kappa / denominator


def choose_beta(delta: float, alpha: float) -> float:
    """A-priori rule ``beta = delta^(2 - alpha)``."""
    if not delta > 0.0:
        raise AnalysisError(f"Noise level must be positive, got delta={delta}.")
    if not 0.0 < alpha <= 1.0:
        raise AnalysisError(f"Exponent alpha must lie in (0, 1], got {alpha}.")
    return float(delta ** (2.0 - alpha))


def stability_ratio(
    q: ScalarField,
    scenario: RegularityScenario,
    problem: Problem,
    epsilon: float = DEFAULT_EPSILON,
    mode: str = "gradient_H1",
    *,
    state: State | None = None,
) -> float:
    """Implied constant of a conditional stability estimate at ``q``.

    The numerator is ``||q - q_dagger||`` in ``H^{-1-epsilon}``; the denominator is the
    state difference in ``H1`` (``*_H1`` modes) or the square root of its ``L2`` norm
    (``*_sqrtL2`` modes), windowed in time for parabolic modes.

    Raises
    ------
    AnalysisError
        Raised for ``q == q_dagger``, an ``epsilon`` outside ``(0, 1/2)``, or a mode that
        does not match the problem.
    """
    if mode not in STABILITY_MODES:
        raise AnalysisError(f"Unknown stability mode '{mode}'. Use one of {', '.join(STABILITY_MODES)}.")
    if not 0.0 < epsilon < 0.5:
        raise AnalysisError(f"epsilon must lie in (0, 1/2), got {epsilon}.")
    if mode.startswith("parabolic") != isinstance(problem, ParabolicProblem):
        raise AnalysisError(f"Stability mode '{mode}' does not apply to a {_system_of(problem)} problem.")

    numerator = fractional_norm((q - scenario.q_dagger).interior(), -(1.0 + epsilon) / 2.0)
    if numerator == 0.0:
        raise AnalysisError("Stability probe at q == q_dagger is 0/0; exclude this sample.")

    state = compute_state(problem, q) if state is None else state
    if mode.endswith("H1"):
        denominator = state_difference_norm(problem, state, scenario.truth_state, "H1")
    else:
        denominator = math.sqrt(state_difference_norm(problem, state, scenario.truth_state, "L2"))
    if denominator == 0.0:
        logger.warning("State difference vanishes for a sample with q != q_dagger in mode %s", mode)
        return math.inf
    return numerator / denominator


def sample_admissible(
    scenario: RegularityScenario,
    count: int,
    seed: int,
    amplitude: float = 0.3,
) -> list[ScalarField]:
    """Random admissible radiativities around ``q_dagger``.

    Each sample adds a low-mode sine series with coefficients decaying like
    ``1/(k^2 + l^2)`` and projects into the box. The series is evaluated analytically, so
    the same seed yields the same samples on every grid.
    """
    if count < 1:
        raise AnalysisError(f"Need at least one sample, got {count}.")
    grid = scenario.q_dagger.grid
    xs, ys = grid.mesh()
    modes = np.arange(1, SAMPLE_MODES_PER_AXIS + 1)
    decay = 1.0 / (modes[:, None] ** 2 + modes[None, :] ** 2)
    rng = np.random.default_rng(seed)

    samples = []
    for _ in range(count):
        coefficients = rng.standard_normal(decay.shape) * decay
        size = rng.uniform(SAMPLE_MIN_FRACTION, 1.0) * amplitude
        # continuum L2 norm of sum c_kl sin(k pi x) sin(l pi y) is sqrt(sum c^2)/2
        coefficients *= 2.0 * size / np.sqrt(np.sum(coefficients**2))
        sx = np.sin(np.pi * modes[:, None, None] * xs[None, :, :])
        sy = np.sin(np.pi * modes[:, None, None] * ys[None, :, :])
        series = np.einsum("kl,kij,lij->ij", coefficients, sx, sy)
        samples.append(project_admissible(scenario.q_dagger.with_values(scenario.q_dagger.values + series), scenario.admissible))
    return samples


def stability_sweep(
    samples: Sequence[ScalarField],
    scenario: RegularityScenario,
    problem: Problem,
    epsilon: float = DEFAULT_EPSILON,
    modes: Sequence[str] | None = None,
) -> pd.DataFrame:
    """Maximum and median stability ratios per mode over a sample set.

    Returns
    -------
    pd.DataFrame
        Columns ``mode, samples, max_ratio, median_ratio``.
    """
    if modes is None:
        modes = ("parabolic_H1", "parabolic_sqrtL2") if isinstance(problem, ParabolicProblem) else ("gradient_H1", "value_sqrtL2")
    states = [compute_state(problem, q) for q in samples]
    rows = []
    for mode in modes:
        ratios = []
        for q, state in zip(samples, states):
            try:
                ratios.append(stability_ratio(q, scenario, problem, epsilon, mode, state=state))
            except AnalysisError:
                logger.debug("Skipped a sample equal to q_dagger in mode %s", mode)
        if not ratios:
            raise AnalysisError(f"No usable samples for stability mode {mode}.")
        rows.append((mode, len(ratios), float(np.max(ratios)), float(np.median(ratios))))
        logger.info("Stability %s over %d samples: max=%.4g median=%.4g", mode, len(ratios), rows[-1][2], rows[-1][3])
    return pd.DataFrame(rows, columns=["mode", "samples", "max_ratio", "median_ratio"])


def state_difference_bound(samples: Sequence[ScalarField], scenario: RegularityScenario, problem: Problem) -> float:
    """``max ||u(q) - u(q_dagger)||`` in ``L2`` over the samples."""
    return max(
        state_difference_norm(problem, compute_state(problem, q), scenario.truth_state, "L2") for q in samples
    )


@dataclass(frozen=True)
class VscEstimate:
    """Smallest constant making the source condition hold on a sample set."""

    constant: float
    argmax: int
    samples: int
    violations: int


def vsc_constant(
    samples: Sequence[ScalarField],
    scenario: RegularityScenario,
    problem: Problem,
    alpha: float,
    mode: str = "gradient",
) -> VscEstimate:
    """Estimate the constant of the variational source condition.

    For every sample the excess ``max(0, 1/4 ||q - q_dagger||^2 - (1/2 ||q - q_star||^2 -
    1/2 ||q_dagger - q_star||^2))`` is divided by the state difference raised to ``alpha``,
    measured in ``H1`` for gradient data and ``L2`` for value data.

    Raises
    ------
    AnalysisError
        Raised for an empty sample list, an unknown mode, or ``alpha`` outside ``(0, 1]``.
    """
    if not samples:
        raise AnalysisError("VSC estimation needs at least one sample.")
    if mode not in ("gradient", "value"):
        raise AnalysisError(f"Unknown data mode '{mode}'.")
    if not 0.0 < alpha <= 1.0:
        raise AnalysisError(f"Exponent alpha must lie in (0, 1], got {alpha}.")

    norm_mode = "H1" if mode == "gradient" else "L2"
    reference_penalty = 0.5 * norm(scenario.q_dagger - scenario.q_star, "L2") ** 2
    best, argmax, violations = 0.0, -1, 0
    for index, q in enumerate(samples):
        excess = 0.25 * norm(q - scenario.q_dagger, "L2") ** 2 - (
            0.5 * norm(q - scenario.q_star, "L2") ** 2 - reference_penalty
        )
        if excess <= 0.0:
            continue
        distance = state_difference_norm(problem, compute_state(problem, q), scenario.truth_state, norm_mode)
        if distance == 0.0:
            violations += 1
            logger.warning("Sample %d violates the source condition: positive excess with no state change", index)
            continue
        value = excess / distance**alpha
        if value > best:
            best, argmax = value, index
    logger.info("VSC constant over %d samples (alpha=%.3g, %s data): %.4g at sample %d", len(samples), alpha, mode, best, argmax)
    return VscEstimate(best, argmax, len(samples), violations)


def lp_norm(u: ScalarField, p: float) -> float:
    """Discrete ``(h^2 sum |u|^p)^(1/p)``."""
    return float((u.grid.h**2 * np.sum(np.abs(u.values) ** p)) ** (1.0 / p))


def lp_bound_check(q: ScalarField, q_ref: ScalarField, admissible: AdmissibleSet, p: float) -> bool:
    """Check ``||q - q_ref||_p <= (2 q_hi)^((p-2)/p) ||q - q_ref||_2^(2/p)``.

    Raises
    ------
    AnalysisError
        Raised for ``p < 2`` or fields outside the box.
    """
    if not 2.0 <= p < math.inf:
        raise AnalysisError(f"Exponent p must be finite and at least 2, got {p}.")
    if not (admissible.contains(q) and admissible.contains(q_ref)):
        raise AnalysisError("Both fields must lie in the admissible box for the L^p bound.")
    difference = q - q_ref
    lhs = lp_norm(difference, p)
    rhs = (2.0 * admissible.q_hi) ** ((p - 2.0) / p) * norm(difference, "L2") ** (2.0 / p)
    return lhs <= rhs * (1.0 + 1e-12)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(log delta, log error)``."""

    slope: float
    intercept: float
    r2: float
    points: int


def fit_loglog_slope(deltas: Sequence[float], errors: Sequence[float]) -> SlopeFit:
    """Fit ``log(error) = slope * log(delta) + intercept``."""
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 2:
        return SlopeFit(math.nan, math.nan, math.nan, int(x.size))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    spread = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual**2)) / spread if spread > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, int(x.size))


def _within(lhs: float, rhs: float, slack: float = COMPARISON_SLACK) -> bool:
    return lhs <= rhs + slack * max(abs(lhs), abs(rhs), 1e-300)


@dataclass(frozen=True, eq=False)
class RatePoint:
    """One inversion of a rate study."""

    index: int
    delta: float
    beta: float
    seed: int
    mode: str
    problem: Problem
    scenario: RegularityScenario
    optimizer: OptimizerSettings
    lp_exponent: float


def invert_at_level(point: RatePoint) -> tuple[InversionResult, dict[str, float | int | bool]]:
    """Invert at one noise level and collect the error and comparison diagnostics."""
    problem, scenario = point.problem, point.scenario
    truth = scenario.truth_state
    measurement = make_measurement(
        truth,
        point.mode,
        point.delta,
        point.seed,
        problem=problem if isinstance(problem, ParabolicProblem) else None,
    )
    config = TikhonovConfig(point.beta, scenario.q_star, point.optimizer)
    result: InversionResult = minimize(problem, measurement, config, scenario.admissible, scenario.q_star)

    state_mode = "H1_semi" if point.mode == "gradient" else "L2"
    err_state = state_difference_norm(problem, result.state, truth, state_mode)
    truth_objective = forward_pass(scenario.q_dagger, problem, measurement, config).objective
    rec_gap = result.q_rec - scenario.q_star
    true_gap = scenario.q_dagger - scenario.q_star
    penalty_gap = 0.5 * (inner_product(rec_gap, rec_gap) - inner_product(true_gap, true_gap))
    penalty_bound = point.delta**2 / (2.0 * point.beta)
    comparison_ok = _within(result.objective, truth_objective) and _within(penalty_gap, penalty_bound)
    if not comparison_ok:
        logger.warning(
            "Comparison check failed at delta=%.3g: J(q_rec)=%.6g J(q_dagger)=%.6g gap=%.4g bound=%.4g",
            point.delta,
            result.objective,
            truth_objective,
            penalty_gap,
            penalty_bound,
        )
    row = {
        "index": point.index,
        "delta": point.delta,
        "beta": point.beta,
        "err_q_l2": norm(result.q_rec - scenario.q_dagger, "L2"),
        "err_state": err_state,
        "iters": result.iterations,
        "converged": result.converged,
        "misfit": result.misfit,
        "objective": result.objective,
        "objective_truth": truth_objective,
        "penalty_gap": penalty_gap,
        "penalty_bound": penalty_bound,
        "comparison_ok": comparison_ok,
        "err_q_lp": lp_norm(result.q_rec - scenario.q_dagger, point.lp_exponent),
    }
    logger.info(
        "delta=%.4g beta=%.4g: err_q=%.4g err_state=%.4g iters=%d converged=%s",
        point.delta,
        point.beta,
        row["err_q_l2"],
        err_state,
        result.iterations,
        result.converged,
    )
    return result, row


def run_rate_point(point: RatePoint) -> dict[str, float | int | bool]:
    return invert_at_level(point)[1]


@dataclass(frozen=True, eq=False)
class RateStudyResult:
    """Rows, diagnostics and fitted slopes of a rate study.

    Attributes
    ----------
    rows : pd.DataFrame
        ``delta, beta, err_q_l2, err_state, iters, converged``, delta descending.
    diagnostics : pd.DataFrame
        Comparison-inequality and ``L^p`` diagnostics per delta.
    alpha : float
        Source-condition exponent used in ``beta = delta^(2 - alpha)``.
    kappa : float
        Regularity index of the scenario.
    q_fit, state_fit, lp_fit : SlopeFit
        Fits over converged rows for the radiativity, state and ``L^p`` errors.
    excluded : int
        Rows left out of the fits.
    inconclusive : bool
        Set when too many rows were excluded.
    """

    rows: pd.DataFrame
    diagnostics: pd.DataFrame
    alpha: float
    kappa: float
    q_fit: SlopeFit
    state_fit: SlopeFit
    lp_fit: SlopeFit
    excluded: int
    inconclusive: bool

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(self.alpha, self.kappa, self.q_fit.slope, self.state_fit.slope, self.q_fit.r2, self.state_fit.r2)],
            columns=SUMMARY_COLUMNS,
        )


def rate_study(
    scenario: RegularityScenario,
    problem: Problem,
    data_mode: str,
    deltas: Sequence[float],
    seed: int,
    *,
    alpha: float,
    optimizer: OptimizerSettings | None = None,
    jobs: int = 1,
    lp_exponent: float = DEFAULT_LP_EXPONENT,
) -> RateStudyResult:
    """Invert at every noise level with ``beta = delta^(2 - alpha)`` and fit log-log slopes.

    Each level uses measurement seed ``seed + index`` and starts from ``q_star``.
    Levels are distributed over ``jobs`` worker processes and merged by index.

    Raises
    ------
    AnalysisError
        Raised for fewer than four noise levels or levels that are not strictly decreasing
        and positive.
    """
    deltas = [float(delta) for delta in deltas]
    if len(deltas) < MIN_RATE_POINTS:
        raise AnalysisError(f"Rate studies need at least {MIN_RATE_POINTS} noise levels, got {len(deltas)}.")
    if any(delta <= 0.0 for delta in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise AnalysisError(f"Noise levels must be positive and strictly decreasing, got {deltas}.")

    optimizer = optimizer or OptimizerSettings()
    points = [
        RatePoint(index, delta, choose_beta(delta, alpha), seed + index, data_mode, problem, scenario, optimizer, lp_exponent)
        for index, delta in enumerate(deltas)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(run_rate_point, points))
    else:
        results = [run_rate_point(point) for point in points]

    table = pd.DataFrame(sorted(results, key=lambda row: row["index"]))
    rows = table[RATE_COLUMNS].reset_index(drop=True)
    diagnostics = table[DIAGNOSTIC_COLUMNS].reset_index(drop=True)

    fitted = table[table["converged"]]
    excluded = int(len(table) - len(fitted))
    if excluded:
        logger.warning("Excluded %d unconverged inversions from the slope fits", excluded)
    q_fit = fit_loglog_slope(fitted["delta"], fitted["err_q_l2"])
    state_fit = fit_loglog_slope(fitted["delta"], fitted["err_state"])
    lp_fit = fit_loglog_slope(fitted["delta"], fitted["err_q_lp"])
    inconclusive = excluded >= INCONCLUSIVE_EXCLUSIONS or q_fit.points < 2
    if inconclusive:
        logger.warning("Rate study marked inconclusive: %d of %d rows excluded", excluded, len(table))
    logger.info(
        "Rate study (kappa=%.3g, alpha=%.3g, %s data): q slope %.3f (r2=%.3f), state slope %.3f (r2=%.3f), L^%g slope %.3f",
        scenario.kappa,
        alpha,
        data_mode,
        q_fit.slope,
        q_fit.r2,
        state_fit.slope,
        state_fit.r2,
        lp_exponent,
        lp_fit.slope,
    )
    return RateStudyResult(rows, diagnostics, alpha, scenario.kappa, q_fit, state_fit, lp_fit, excluded, inconclusive)


def spectral_table(u: ScalarField) -> pd.DataFrame:
    """Coefficients of ``u`` in the sine basis, sorted by eigenvalue."""
    basis = build_basis(u.grid)
    coefficients = analyze(u.interior()).values.ravel()[basis.order]
    indices = basis.mode_indices()
    return pd.DataFrame(
        {
            "k": [k for k, _ in indices],
            "l": [l for _, l in indices],
            "mu": basis.sorted_eigenvalues(),
            "coefficient": coefficients,
        },
        columns=SPECTRAL_COLUMNS,
    )
