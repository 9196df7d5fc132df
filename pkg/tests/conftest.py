import pathlib

import numpy as np
import pytest

from lidarsr import geometry

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(987654)


@pytest.fixture
def calib8():
    """Small 8-beam fan for fast geometry tests."""
    return geometry.BeamCalibration(
        phi=np.deg2rad(np.linspace(2.0, -20.0, 8)),
        delta=np.zeros(8),
        r_max=80.0,
        width=64,
    )


@pytest.fixture
def calib16():
    return geometry.load_calibration(FIXTURES / "calib16.json")


def fan_points(calib, count, rng, r_lo=2.0, r_hi=60.0):
    """Random points strictly inside the beam fan (zero offsets assumed)."""
    lo, hi = geometry.angular_bounds(calib)
    pitch = rng.uniform(lo + 1e-5, hi - 1e-5, count)
    yaw = rng.uniform(-np.pi, np.pi, count)
    r = rng.uniform(r_lo, r_hi, count)
    rho = r * np.cos(pitch)
    return np.stack(
        [rho * np.cos(yaw), rho * np.sin(yaw), -r * np.sin(pitch)], axis=1
    )
