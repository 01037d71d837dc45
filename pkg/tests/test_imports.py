"""Import smoke tests for the radinv package."""

from src import analysis, app, elliptic, experiment_config, grid, inverse, parabolic, scenarios, spectral


def test_solver_modules_import() -> None:
    """Ensure the grid, spectral and PDE solver modules remain importable."""
    assert grid.NORM_MODES == ("L2", "H1", "H1_semi")
    assert callable(spectral.build_basis)
    assert callable(elliptic.solve)
    assert callable(parabolic.march)


def test_inversion_modules_import() -> None:
    """Ensure the inversion and analysis modules remain importable."""
    assert inverse.DATA_MODES == ("gradient", "value")
    assert callable(analysis.rate_study)


def test_launcher_imports() -> None:
    """Ensure the CLI entrypoint and its configuration layer remain importable."""
    assert app.build_parser() is not None
    assert experiment_config.list_presets()
    assert callable(scenarios.build_experiment)
