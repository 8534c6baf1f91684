"""Shared fixtures. Session-scoped simulators keep expensive renders warm."""

import numpy as np
import pytest

from activegrasp.config import RunConfig
from activegrasp.sim import GraspSimulator


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def cube_sim(cfg):
    # 6 cm cube, axis aligned: the cheapest full pipeline exercise.
    return GraspSimulator("prism_6x6x6", 0.0, cfg)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
