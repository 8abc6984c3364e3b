import numpy as np
import pytest

from aigc_incentive.core import ClientAttributes, QualityModel, ServerParams, derive_learning_constants
from aigc_incentive.distributions import AttributeDistribution


@pytest.fixture
def mnist_q():
    return QualityModel(3.0, 2.45, 1.05, 0.8)


@pytest.fixture
def mnist_lp():
    return derive_learning_constants(0.01, 37.36, 5.48, 0.57, 25.0, 5, lambda_max=3.0)


@pytest.fixture
def ref_sp():
    return ServerParams(8e4, 1.0)


@pytest.fixture
def ud_dist():
    return AttributeDistribution.of_kind("UD", "UD", 0.1, 3.0)


@pytest.fixture
def two_clients():
    # type-1 and type-2 clients with equal datasize
    return [ClientAttributes(100, 1.5, 0.05), ClientAttributes(100, 2.9, 0.05)]


def random_population(rng, K, s_max=0.1, lam=3.0, d_range=(100, 300)):
    return [ClientAttributes(int(rng.integers(d_range[0], d_range[1] + 1)),
                             rng.uniform(0.01, lam * 0.98), rng.uniform(1e-3, s_max))
            for _ in range(K)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
