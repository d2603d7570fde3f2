import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from graspmetric.kinematics import ArmModel
from graspmetric.transforms import RigidTransform
from graspmetric.world import Box, Scene, SqObject

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")


@pytest.fixture
def arm():
    return ArmModel()


@pytest.fixture
def table():
    return Box.from_bounds([-0.3, -0.8, -0.05], [1.0, 0.8, 0.0], name="table")


@pytest.fixture
def can():
    return SqObject("can", 0.04, 0.12)


@pytest.fixture
def desk(arm, table, can):
    """Table with one can in front of the arm."""
    return Scene(arm, table, (), ((can, RigidTransform.from_xyz_yaw(0.5, -0.2, 0.0, 0.3)),))


@pytest.fixture
def wall():
    """Tall thin wall between the shoulder and the can of the desk scene."""
    return Box([0.4, -0.16, 0.25], [0.01, 0.15, 0.25], name="wall")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Collects one-line verdicts that are echoed in the terminal summary."""
    return request.config.stash.setdefault(_REPORT, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
