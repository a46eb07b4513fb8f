"""Shared fixtures: chain data and design spaces are expensive, build once."""

import numpy as np
import pytest

from ionpulse.basis import build_basis
from ionpulse.chain import load_fixture
from ionpulse.solver import DesignSpace


@pytest.fixture(scope="session")
def fixture7():
    return load_fixture(7)


@pytest.fixture(scope="session")
def fixture9():
    return load_fixture(9)


@pytest.fixture(scope="session")
def basis300(fixture7):
    return build_basis(300.0, fixture7)


@pytest.fixture(scope="session")
def space300(fixture7, basis300):
    return DesignSpace.build(fixture7, basis300)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
