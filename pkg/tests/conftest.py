from pathlib import Path

import numpy as np
import pytest
import structlog
from click.testing import CliRunner

from aot.main import cli
from aot.services.analytic import AnalyticService

CONFIG_DIR = Path(__file__).parent / "integration" / "__configs__"


def pytest_addoption(parser):
    """Adds --run-slow flag to pytest."""
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run desk-scale training tests.",
    )


def pytest_collection_modifyitems(config, items):
    """Skip tests marked slow unless --run-slow is given."""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def reset_logging():
    """Undo any structlog configuration a CLI invocation installed."""
    yield
    structlog.reset_defaults()


@pytest.fixture()
def rng() -> np.random.Generator:
    """Fixture for a seeded numpy generator."""
    return np.random.default_rng(1234)


@pytest.fixture()
def gaussian_oracle():
    """Posterior mean of Normal(0, I) in two dimensions."""
    return AnalyticService.isotropic_gaussian([0.0, 0.0], 1.0)


@pytest.fixture()
def point_mass_oracle():
    """Posterior mean of a point mass at (2, 1)."""
    return AnalyticService.point_mass([2.0, 1.0])


@pytest.fixture()
def runner() -> CliRunner:
    """Fixture to create a click CliRunner."""
    return CliRunner()


@pytest.fixture()
def tiny_config() -> Path:
    """Path of a training config small enough for a few-second run."""
    return CONFIG_DIR / "tiny_run.json"


@pytest.fixture()
def tiny_guidance_config() -> Path:
    return CONFIG_DIR / "tiny_guidance.json"


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> Path:
    """A tiny denoiser trained once per session through the CLI."""
    out = tmp_path_factory.mktemp("tiny-run")
    result = CliRunner().invoke(
        cli,
        ["train", str(CONFIG_DIR / "tiny_run.json"), "--seed", "3", "--out", str(out)],
    )
    structlog.reset_defaults()
    assert result.exit_code == 0, result.output
    return out / "checkpoint.json"
