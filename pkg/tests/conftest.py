import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qwalk.core import CoinOperator

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
angles = st.tuples(
    st.floats(0, math.pi / 2),
    st.floats(-math.pi, math.pi),
    st.floats(-math.pi, math.pi),
)


def random_coins(rng: np.random.Generator, n: int) -> list[CoinOperator]:
    return [CoinOperator(unitary_group.rvs(2, random_state=rng)) for _ in range(n)]


def random_pair(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return z / np.linalg.norm(z)


def random_amps(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
