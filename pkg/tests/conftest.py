"""Shared test fixtures."""

import numpy as np
import pytest

from tests._helpers import PAPER_LIVE_TIME, PAPER_N_OFF, PAPER_N_ON, single_bin_spectrum, small_config
from vip_sim.analysis.spectrum import SpectrumLabel
from vip_sim.models import ConductorSpec, DetectorGeometry, RunSummary
from vip_sim.storage.memory import MemoryStore


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch):
    """Keep VIP_* variables of the developer's shell out of the tests."""
    for name in ("VIP_LOG_LEVEL", "VIP_LOG_FORMAT", "VIP_OUTPUT_DIR", "VIP_WORKERS", "VIP_METRICS_FILE"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def geometry():
    return DetectorGeometry()


@pytest.fixture
def conductor():
    return ConductorSpec()


@pytest.fixture
def paper_run():
    """40 A for 14 510 minutes."""
    return RunSummary.from_constant_current(40.0, PAPER_LIVE_TIME)


@pytest.fixture
def store():
    return MemoryStore()


@pytest.fixture
def paper_spectra():
    """The published ROI counts as a current-on/current-off pair."""
    return (
        single_bin_spectrum(PAPER_N_ON, SpectrumLabel.CURRENT_ON),
        single_bin_spectrum(PAPER_N_OFF, SpectrumLabel.CURRENT_OFF),
    )


@pytest.fixture
def config():
    return small_config()
