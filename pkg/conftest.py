"""Shared fixtures: the default protocol, a zero-temperature bath and fast options."""

import pytest

from dmme.bath import BathParams
from dmme.controls import ProtocolParams, synthesize
from dmme.dynamics import EvolutionOptions
from dmme.invariant import eigensystem


@pytest.fixture(scope="session")
def params():
    return ProtocolParams()


@pytest.fixture(scope="session")
def protocol(params):
    return synthesize(params)


@pytest.fixture(scope="session")
def eig0(protocol):
    return eigensystem(protocol.g0)


@pytest.fixture
def bath():
    return BathParams()


@pytest.fixture
def fast_options():
    return EvolutionOptions(grid=60, method="DOP853")
