import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from nmmetrology.model import ModelParams  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def sweep_model():
    return ModelParams(a1=0.4, a2=0.6, rabi=5.0, lam=1.0, horizon=2.0)


@pytest.fixture
def strong_model():
    return ModelParams(a1=0.4, a2=0.6, rabi=10.0, lam=1.0, horizon=2.0)


@pytest.fixture
def asym_model():
    return ModelParams(a1=0.25, a2=0.75, rabi=15.0, lam=1.0, horizon=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
