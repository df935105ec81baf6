"""
Shared fixtures for the svwave test suite
"""
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from svwave.config import InitialConfig, SigmaConfig, SimConfig, SpeedConfig, StudyConfig
from svwave.spectral_torus import random_field
from svwave.wave_speed import make_speed


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical studies run at reduced scale")


@pytest.fixture
def generator():
    """Fixed-seed numpy generator"""
    return np.random.default_rng(20240611)


@pytest.fixture(params=['constant', 'cosine', 'liquid_crystal'])
def speed(request):
    """Every closed-form speed preset"""
    return make_speed(request.param)


@pytest.fixture
def zero_mean_pair(generator):
    """Random band-limited (R, S) with mean(R - S) = 0"""
    R = random_field(generator, 8, 1.0, 1.0, zero_mean=True)
    S = random_field(generator, 8, 1.0, 1.0, zero_mean=True)
    return R, S


def make_config(tmp_path, **changes):
    """Small, fast configuration writing under tmp_path"""
    base = SimConfig(
        N=16,
        nu=0.05,
        T=0.02,
        dt=1e-3,
        seed=11,
        sample_cadence=1,
        output_dir=str(tmp_path / "results"),
        speed=SpeedConfig('cosine'),
        sigma=SigmaConfig('sine', (0.1, 0.05)),
        initial=InitialConfig('modes', (('sin', 1, 0.5), ('cos', 2, 0.2)), (('sin', 1, -0.5), ('cos', 2, 0.2))),
        study=StudyConfig(paths=8, resolutions=(8, 16), pairs=20, bootstrap=20),
    )
    for key, value in changes.items():
        setattr(base, key, value)
    return base


@pytest.fixture
def small_config(tmp_path):
    return make_config(tmp_path)


@pytest.fixture
def noiseless_config(tmp_path):
    return make_config(tmp_path, sigma=SigmaConfig('constant', (0.0,)))
