import numpy as np
import pytest

from link_multiplicity.cli import configure_logging
from link_multiplicity.config import ENV_LOG_LEVEL, ENV_OUTPUT_DIR
from link_multiplicity.corpus import corpus_curve
from link_multiplicity.geometry import AnnulusSpec, ChartPoint, SliceFunctional

# coarser probe grid than the default keeps regularity estimation fast in tests
TEST_PROBE_DENSITY = 64


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch):
    """No .env file or exported variables leak into configuration."""
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    monkeypatch.delenv(ENV_LOG_LEVEL, raising=False)
    monkeypatch.setattr("link_multiplicity.config.load_dotenv", lambda *args, **kwargs: False)


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    configure_logging("warning")


@pytest.fixture
def origin():
    return ChartPoint.origin(2)


@pytest.fixture
def annulus(origin):
    return AnnulusSpec(center=origin, outer=0.5, inner=0.05)


@pytest.fixture
def transverse_slice(origin):
    """A direction leaning on the first coordinate; every corpus curve splits cleanly at delta = 0.125."""
    return SliceFunctional(base=origin, direction=(0.96, 0.28), offset=0.125)


@pytest.fixture
def cusp():
    return corpus_curve("cusp")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
