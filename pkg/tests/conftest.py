import numpy as np
import pytest

from ouqsd.core.config import settings
from ouqsd.schemas.params import LogParetoDensity, OUParams, ParetoDensity
from ouqsd.services.eigen import build_qsd


@pytest.fixture(scope="session")
def params() -> OUParams:
    return OUParams(a=1.0)


@pytest.fixture(scope="session")
def pareto() -> ParetoDensity:
    return ParetoDensity(eta=0.5, x_m=1.0)


@pytest.fixture(scope="session")
def log_pareto() -> LogParetoDensity:
    return LogParetoDensity(eta=0.5, x_m=1.0)


@pytest.fixture(scope="session")
def nu_half(params):
    """nu_{0.5} for a = 1, the limit law from a Pareto(0.5) start"""
    return build_qsd(params, 0.5)


@pytest.fixture(scope="session")
def nu_a(params):
    return build_qsd(params, 1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def single_worker(monkeypatch):
    monkeypatch.setattr(settings, "threads", 1)
