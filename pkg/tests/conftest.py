import numpy as np
import pytest

from popcone import create_app
from popcone.models.reports import SolverConfig
from popcone.services import instances


@pytest.fixture
def app():
    app = create_app()
    app.config.update({'TESTING': True})
    yield app


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cfg():
    return SolverConfig()


@pytest.fixture
def example1():
    return instances.example1()


@pytest.fixture
def example3():
    return instances.example3()


@pytest.fixture
def example3_augmented():
    return instances.example3(augmented=True)


@pytest.fixture
def univariate():
    return instances.univariate_example()
