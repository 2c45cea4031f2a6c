"""
Shared fixtures for the fermatlab test suite
"""
import numpy as np
import pytest

from fermatlab.models import QuadratureConfig
from fermatlab.services.elliptic import default_context
from fermatlab.services.jets import JetAnalyzer
from fermatlab.services.nevanlinna import NevanlinnaAnalyzer
from fermatlab.services.solutions import SolutionFactory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def elliptic_context():
    return default_context()


@pytest.fixture(scope="session")
def factory(elliptic_context):
    return SolutionFactory(elliptic_context)


@pytest.fixture
def analyzer():
    return NevanlinnaAnalyzer(QuadratureConfig())


@pytest.fixture
def jet_analyzer():
    return JetAnalyzer()
