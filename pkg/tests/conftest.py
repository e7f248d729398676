import numpy as np
import pytest

from imfkit import load_bundled_model
from imfkit.dynamics import random_state


@pytest.fixture(scope="session")
def quadruped():
    return load_bundled_model("quadruped")


@pytest.fixture(scope="session")
def biped():
    return load_bundled_model("planar_biped")


@pytest.fixture(scope="session")
def single_body():
    return load_bundled_model("single_body")


def make_states(model, count, seed):
    rng = np.random.default_rng(seed)
    return [random_state(model, rng) for _ in range(count)]
