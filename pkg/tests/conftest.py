import numpy as np
import pytest

from metacloud.marginals import ExpPowerMarginal, GaussianMarginal, ParetoMarginal
from metacloud.meta import MetaMap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pareto():
    return ParetoMarginal(1.0)


@pytest.fixture
def laplace():
    return ExpPowerMarginal(1.0)


@pytest.fixture
def gaussian():
    return GaussianMarginal()


@pytest.fixture
def standard_meta(pareto, laplace):
    return MetaMap(pareto, laplace)


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv('METACLOUD_THREADS', raising=False)
