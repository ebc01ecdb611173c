import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("haarkit", max_examples=60, deadline=None)
settings.load_profile("haarkit")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
