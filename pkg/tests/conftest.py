import numpy as np
import pytest

from spinqst.experiments import ExperimentConfig, designed_pulse_for, run_transfer


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def n5_config():
    return ExperimentConfig(N=5, J_B_times_T=1000.0)


@pytest.fixture(scope="session")
def n5_pulse(n5_config):
    """Calibrated default pulse for N = 5 (shared; calibration is ~1 s)."""
    return designed_pulse_for(n5_config)


@pytest.fixture(scope="session")
def n5_trajectory(n5_config):
    """Subspace transfer at N = 5, J_B*T = 1000 (shared; ~8 s)."""
    return run_transfer(n5_config)
