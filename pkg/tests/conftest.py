import numpy as np
import pytest
from hypothesis import settings

from blowup.chartcore import SamplePlan

settings.register_profile("blowup", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("blowup")


@pytest.fixture
def plan() -> SamplePlan:
    return SamplePlan()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
