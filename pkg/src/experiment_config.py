"""Experiment configuration: strict INI parsing, defaults, and bundled preset lookup."""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    from .grid import build_grid
    from .helper_functions.field_io import FieldFormatError, read_field_csv
    from .inverse import AdmissibleSet, InversionError, OptimizerSettings
    from .parabolic import window_levels
    from .spectral import SpectralError, validate_kappa
except ImportError:
    from grid import build_grid
    from helper_functions.field_io import FieldFormatError, read_field_csv
    from inverse import AdmissibleSet, InversionError, OptimizerSettings
    from parabolic import window_levels
    from spectral import SpectralError, validate_kappa

logger = logging.getLogger(__name__)

SCENARIO_DATA_DIR = Path(__file__).resolve().parent / "scenario_data"
CONFIG_SUFFIX = ".ini"
SYSTEMS = ("elliptic", "parabolic")
DATA_MODES = ("gradient", "value")
SCENARIOS = ("standard", "manufactured")
ALPHA_RULES = ("elliptic", "alternative")
FIELD_KEYS = ("q_dagger", "q_star", "a", "f", "g", "u0")
# g and u0 files list every node, boundary included.
BOUNDARY_FIELD_KEYS = ("g", "u0")
DEFAULT_DELTAS = tuple(float(delta) for delta in np.geomspace(1e-1, 1e-3, 6))

ALLOWED_KEYS = {
    "experiment": {
        "system",
        "data_mode",
        "n",
        "scenario",
        "kappa",
        "deltas",
        "delta",
        "seed",
        "output_dir",
        "samples",
        "epsilon",
        "amplitude",
        "alpha_rule",
        "margin",
    },
    "time": {"T", "nt", "window_start", "window_end"},
    "admissible": {"q_lo", "q_hi", "q_star"},
    "optimizer": {"max_iters", "grad_tol", "armijo_c", "backtrack", "initial_step"},
    "fields": set(FIELD_KEYS),
}
REQUIRED_KEYS = {"experiment": ("system", "n")}


class ConfigError(ValueError):
    """Raised when an experiment configuration is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings.

    Attributes
    ----------
    system : str
        ``"elliptic"`` or ``"parabolic"``.
    data_mode : str
        ``"gradient"`` or ``"value"``.
    n : int
        Interior nodes per axis.
    scenario : str
        Analytic preset providing the coefficients: ``"standard"`` or ``"manufactured"``.
    kappa : float
        Regularity index of ``q_dagger - q_star``.
    deltas : tuple[float, ...]
        Noise levels of a rate study, strictly decreasing.
    delta : float
        Noise level of a single inversion.
    seed : int
        Seed for the scenario, the noise, and the probe samples.
    output_dir : Path
        Directory receiving CSVs and the manifest.
    samples : int
        Number of admissible probe samples.
    epsilon : float
        Order shift of the ``H^{-1-epsilon}`` stability norm.
    amplitude : float
        L2 size of the synthesized ``q_dagger - q_star`` and of the probe perturbations.
    alpha_rule : str
        ``"elliptic"`` or ``"alternative"`` exponent map for parabolic systems.
    margin : float
        Relative distance of ``alpha`` below its supremum.
    T, nt, window : float, int, tuple[float, float] | None
        Parabolic time set-up; ``window=None`` means ``(T/2, T]``.
    q_lo, q_hi, q_star : float
        Admissible box and constant prior.
    optimizer : OptimizerSettings
        Minimizer controls.
    fields : dict[str, Path]
        Grid CSVs overriding preset fields.
    jobs : int
        Worker processes for rate studies.
    source : Path | None
        File the configuration was read from.
    """

    system: str
    n: int
    data_mode: str = "gradient"
    scenario: str = "standard"
    kappa: float = 2.0
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    delta: float = DEFAULT_DELTAS[-1]
    seed: int = 0
    output_dir: Path = Path("results")
    samples: int = 50
    epsilon: float = 0.25
    amplitude: float = 0.3
    alpha_rule: str = "elliptic"
    margin: float = 0.05
    T: float = 1.0
    nt: int = 32
    window: tuple[float, float] | None = None
    q_lo: float = 0.25
    q_hi: float = 4.0
    q_star: float = 1.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    fields: dict[str, Path] = field(default_factory=dict)
    jobs: int = 1
    source: Path | None = None

    @property
    def is_parabolic(self) -> bool:
        return self.system == "parabolic"

    def admissible(self) -> AdmissibleSet:
        return AdmissibleSet(self.q_lo, self.q_hi)

    def with_overrides(self, **changes: object) -> ExperimentConfig:
        """Copy with CLI overrides applied; ``None`` values are ignored."""
        return replace(self, **{key: value for key, value in changes.items() if value is not None})

    def echo(self) -> dict[str, str]:
        """Flat ``section.key -> value`` view for run manifests."""
        entries = {
            "experiment.system": self.system,
            "experiment.data_mode": self.data_mode,
            "experiment.n": str(self.n),
            "experiment.scenario": self.scenario,
            "experiment.kappa": repr(self.kappa),
            "experiment.deltas": ",".join(repr(delta) for delta in self.deltas),
            "experiment.delta": repr(self.delta),
            "experiment.seed": str(self.seed),
            "experiment.output_dir": str(self.output_dir),
            "experiment.samples": str(self.samples),
            "experiment.epsilon": repr(self.epsilon),
            "experiment.amplitude": repr(self.amplitude),
            "experiment.alpha_rule": self.alpha_rule,
            "experiment.margin": repr(self.margin),
            "admissible.q_lo": repr(self.q_lo),
            "admissible.q_hi": repr(self.q_hi),
            "admissible.q_star": repr(self.q_star),
            "optimizer.max_iters": str(self.optimizer.max_iters),
            "optimizer.grad_tol": repr(self.optimizer.grad_tol),
            "optimizer.armijo_c": repr(self.optimizer.armijo_c),
            "optimizer.backtrack": repr(self.optimizer.backtrack),
            "optimizer.initial_step": repr(self.optimizer.initial_step),
        }
        if self.is_parabolic:
            window = self.window or (0.5 * self.T, self.T)
            entries.update(
                {
                    "time.T": repr(self.T),
                    "time.nt": str(self.nt),
                    "time.window_start": repr(window[0]),
                    "time.window_end": repr(window[1]),
                }
            )
        for key, path in sorted(self.fields.items()):
            entries[f"fields.{key}"] = str(path)
        return entries


def _candidate_config_paths(name: str) -> list[Path]:
    """Return likely locations of a config given as a path or a bundled preset stem."""
    given = Path(name)
    candidates = [given]
    if given.suffix != CONFIG_SUFFIX:
        candidates.append(given.with_name(given.name + CONFIG_SUFFIX))
    candidates.extend(
        [
            SCENARIO_DATA_DIR / given.name,
            SCENARIO_DATA_DIR / f"{given.stem}{CONFIG_SUFFIX}",
            SCENARIO_DATA_DIR / f"{given.stem.lower()}{CONFIG_SUFFIX}",
        ]
    )

    unique: list[Path] = []
    for path in candidates:
        if path not in unique:
            unique.append(path)
    return unique


def resolve_config_path(name: str | Path) -> Path:
    """Locate a configuration file or a bundled preset.

    Raises
    ------
    ConfigError
        Raised when neither a file nor a preset with that name exists.
    """
    for candidate in _candidate_config_paths(str(name)):
        if candidate.is_file():
            return candidate
    available = ", ".join(list_presets()) or "none"
    raise ConfigError(f"Configuration '{name}' is neither a file nor a bundled preset (available: {available}).")


def list_presets() -> list[str]:
    """Stems of the bundled preset files."""
    return sorted(path.stem for path in SCENARIO_DATA_DIR.glob(f"*{CONFIG_SUFFIX}"))


def _get(parser: configparser.ConfigParser, section: str, key: str, kind: type, default: object) -> object:
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        expected = "an integer" if kind is int else "a number"
        raise ConfigError(f"Key '{section}.{key}' must be {expected}, got '{raw}'.") from exc


def _choice(value: str, options: tuple[str, ...], key: str) -> str:
    value = value.strip().lower()
    if value not in options:
        raise ConfigError(f"Key '{key}' must be one of {', '.join(options)}, got '{value}'.")
    return value


def _parse_deltas(raw: str) -> tuple[float, ...]:
    try:
        deltas = tuple(float(item) for item in raw.split(",") if item.strip())
    except ValueError as exc:
        raise ConfigError(f"Key 'experiment.deltas' must be a comma-separated list of numbers, got '{raw}'.") from exc
    if not deltas:
        raise ConfigError("Key 'experiment.deltas' is empty.")
    if any(delta <= 0.0 for delta in deltas):
        raise ConfigError(f"Key 'experiment.deltas' needs positive noise levels, got {raw}.")
    if any(later >= earlier for earlier, later in zip(deltas, deltas[1:])):
        raise ConfigError(f"Key 'experiment.deltas' must be strictly decreasing, got {raw}.")
    return deltas


def _check_strict(parser: configparser.ConfigParser) -> None:
    unknown_sections = [section for section in parser.sections() if section not in ALLOWED_KEYS]
    if unknown_sections:
        raise ConfigError(f"Unknown section(s): {', '.join(unknown_sections)}.")
    for section in parser.sections():
        unknown = sorted(set(parser.options(section)) - ALLOWED_KEYS[section])
        if unknown:
            raise ConfigError(f"Unknown key(s) in [{section}]: {', '.join(unknown)}.")
    for section, keys in REQUIRED_KEYS.items():
        for key in keys:
            if not parser.has_option(section, key):
                raise ConfigError(f"Missing required key '{section}.{key}'.")


def parse_config_text(text: str, base_dir: str | Path = ".", source: Path | None = None) -> ExperimentConfig:
    """Parse INI text into a validated :class:`ExperimentConfig`.

    Relative field paths resolve against ``base_dir``; ``output_dir`` stays relative to the
    working directory.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"Malformed configuration: {exc}") from exc
    _check_strict(parser)
    base_dir = Path(base_dir)

    system = _choice(parser.get("experiment", "system"), SYSTEMS, "experiment.system")
    n = _get(parser, "experiment", "n", int, None)
    if n < 1:
        raise ConfigError(f"Key 'experiment.n' must be at least 1, got {n}.")

    kappa = _get(parser, "experiment", "kappa", float, 2.0)
    try:
        validate_kappa(kappa)
    except SpectralError as exc:
        raise ConfigError(f"Key 'experiment.kappa': {exc}") from exc

    deltas = DEFAULT_DELTAS
    if parser.has_option("experiment", "deltas"):
        deltas = _parse_deltas(parser.get("experiment", "deltas"))
    delta = _get(parser, "experiment", "delta", float, min(deltas))
    if delta < 0.0:
        raise ConfigError(f"Key 'experiment.delta' must be nonnegative, got {delta}.")

    epsilon = _get(parser, "experiment", "epsilon", float, 0.25)
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"Key 'experiment.epsilon' must lie in (0, 1/2), got {epsilon}.")
    margin = _get(parser, "experiment", "margin", float, 0.05)
    if not 0.0 < margin < 1.0:
        raise ConfigError(f"Key 'experiment.margin' must lie in (0, 1), got {margin}.")
    samples = _get(parser, "experiment", "samples", int, 50)
    if samples < 1:
        raise ConfigError(f"Key 'experiment.samples' must be at least 1, got {samples}.")

    T = _get(parser, "time", "T", float, 1.0)
    nt = _get(parser, "time", "nt", int, 32)
    if T <= 0.0 or nt < 1:
        raise ConfigError(f"Keys 'time.T' and 'time.nt' must be positive, got T={T}, nt={nt}.")
    window = None
    if parser.has_option("time", "window_start") or parser.has_option("time", "window_end"):
        window = (
            _get(parser, "time", "window_start", float, 0.5 * T),
            _get(parser, "time", "window_end", float, T),
        )
        if not 0.0 <= window[0] < window[1] <= T:
            raise ConfigError(f"Keys 'time.window_start/window_end' need 0 <= start < end <= T, got {window}.")
        if not window_levels(T, nt, window):
            raise ConfigError(
                f"Keys 'time.window_start/window_end' give the window ({window[0]}, {window[1]}], "
                f"which contains no time level for T={T}, nt={nt}."
            )

    q_lo = _get(parser, "admissible", "q_lo", float, 0.25)
    q_hi = _get(parser, "admissible", "q_hi", float, 4.0)
    q_star = _get(parser, "admissible", "q_star", float, 1.0)
    if not 0.0 < q_lo < q_hi:
        raise ConfigError(f"Keys 'admissible.q_lo/q_hi' need 0 < q_lo < q_hi, got {q_lo}, {q_hi}.")
    if not q_lo <= q_star <= q_hi:
        raise ConfigError(f"Key 'admissible.q_star' = {q_star} lies outside [{q_lo}, {q_hi}].")

    defaults = OptimizerSettings()
    try:
        optimizer = OptimizerSettings(
            max_iters=_get(parser, "optimizer", "max_iters", int, defaults.max_iters),
            grad_tol=_get(parser, "optimizer", "grad_tol", float, defaults.grad_tol),
            armijo_c=_get(parser, "optimizer", "armijo_c", float, defaults.armijo_c),
            backtrack=_get(parser, "optimizer", "backtrack", float, defaults.backtrack),
            initial_step=_get(parser, "optimizer", "initial_step", float, defaults.initial_step),
        )
    except InversionError as exc:
        raise ConfigError(f"Section [optimizer]: {exc}") from exc

    fields = {}
    if parser.has_section("fields"):
        for key in parser.options("fields"):
            path = Path(parser.get("fields", key).strip())
            fields[key] = path if path.is_absolute() else base_dir / path

    output_dir = Path(_get(parser, "experiment", "output_dir", str, "results"))
    config = ExperimentConfig(
        system=system,
        n=n,
        data_mode=_choice(_get(parser, "experiment", "data_mode", str, "gradient"), DATA_MODES, "experiment.data_mode"),
        scenario=_choice(_get(parser, "experiment", "scenario", str, "standard"), SCENARIOS, "experiment.scenario"),
        kappa=kappa,
        deltas=deltas,
        delta=delta,
        seed=_get(parser, "experiment", "seed", int, 0),
        output_dir=output_dir,
        samples=samples,
        epsilon=epsilon,
        amplitude=_get(parser, "experiment", "amplitude", float, 0.3),
        alpha_rule=_choice(_get(parser, "experiment", "alpha_rule", str, "elliptic"), ALPHA_RULES, "experiment.alpha_rule"),
        margin=margin,
        T=T,
        nt=nt,
        window=window,
        q_lo=q_lo,
        q_hi=q_hi,
        q_star=q_star,
        optimizer=optimizer,
        fields=fields,
        source=source,
    )
    _validate_fields(config)
    return config


def _validate_fields(config: ExperimentConfig) -> None:
    """Check that every referenced grid CSV exists, parses, and respects the box."""
    grid = build_grid(config.n)
    admissible = config.admissible()
    for key, path in config.fields.items():
        if not path.is_file():
            raise ConfigError(f"Key 'fields.{key}' points to a missing file: {path}")
        try:
            loaded = read_field_csv(path, grid, include_boundary=key in BOUNDARY_FIELD_KEYS)
        except FieldFormatError as exc:
            raise ConfigError(f"Key 'fields.{key}': {exc}") from exc
        if key in ("q_dagger", "q_star") and not admissible.contains(loaded):
            raise ConfigError(f"Key 'fields.{key}' leaves the admissible box [{config.q_lo}, {config.q_hi}].")


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment configuration.

    Parameters
    ----------
    path : str | Path
        INI file, or the stem of a preset in ``src/scenario_data``.

    Returns
    -------
    ExperimentConfig
        Settings with defaults filled in.

    Raises
    ------
    ConfigError
        Raised for unreadable files, unknown or missing keys, malformed values,
        ``kappa = 1/2``, or fields outside the admissible box. The message names the key.
    """
    resolved = resolve_config_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Could not read configuration {resolved}: {exc}") from exc
    logger.info("Loading experiment configuration from %s", resolved)
    return parse_config_text(text, base_dir=resolved.parent, source=resolved)
