# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from shared.model import DiscreteSpace, ModelParams, random_model
from shared.policy import Parameterization, Policy


def random_policy(space: DiscreteSpace, rng: np.random.Generator,
                  parameterization: Parameterization = Parameterization.LOGITS) -> Policy:
    if parameterization == Parameterization.LOGITS:
        return Policy(space, rng.normal(size=(space.n_x, space.n_a)))
    rows = rng.dirichlet(np.ones(space.n_a), size=space.n_x)
    return Policy(space, rows / rows.sum(axis=1, keepdims=True), Parameterization.SIMPLEX)


def z_independent_model(space: DiscreteSpace, rng: np.random.Generator) -> ModelParams:
    """P(x, y, z) = P(z) P(x) P(y | x): z independent of (x, y)."""
    p_x = rng.dirichlet(np.ones(space.n_x))
    p_y_given_x = rng.dirichlet(np.ones(space.n_y), size=space.n_x)
    return ModelParams(
        space=space,
        p_z=rng.dirichlet(np.ones(space.n_z)),
        p_x_given_z=np.tile(p_x, (space.n_z, 1)),
        p_y_given_xz=np.repeat(p_y_given_x[:, np.newaxis, :], space.n_z, axis=1),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def space222():
    return DiscreteSpace(n_x=2, n_y=2, n_z=2, n_a=2)


@pytest.fixture
def space422():
    return DiscreteSpace(n_x=4, n_y=2, n_z=2, n_a=2)


@pytest.fixture
def theta422(space422, rng):
    return random_model(space422, rng)
