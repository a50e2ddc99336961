import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bridgescan.beam import BeamSpec, fe_assemble, modal_model
from bridgescan.studies import beam_10m, bridge_30m

settings.register_profile("bridgescan", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("bridgescan")


@pytest.fixture(scope="session")
def beam10() -> BeamSpec:
    return beam_10m()


@pytest.fixture(scope="session")
def modal10(beam10):
    return modal_model(beam10)


@pytest.fixture(scope="session")
def bridge30() -> BeamSpec:
    return bridge_30m()


@pytest.fixture(scope="session")
def fe30(bridge30):
    return fe_assemble(bridge30, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sine_truth(length, x, n_modes=4):
    return np.array([np.sin(n * np.pi * np.asarray(x) / length) for n in range(1, n_modes + 1)])
