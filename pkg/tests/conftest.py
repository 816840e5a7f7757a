import numpy as np
import pytest

from faprec.channel import ChannelStatistics
from faprec.constellation import difference_set, enumerate_vectors, make_constellation
from faprec.infotheory import BoundContext

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def qpsk2():
    return difference_set(enumerate_vectors(make_constellation("qpsk"), 2))


@pytest.fixture(scope="session")
def stats22():
    return ChannelStatistics.exponential(2, 2, 0.8, 0.5)


@pytest.fixture(scope="session")
def ctx_factory(stats22, qpsk2):
    def make(sigma2):
        return BoundContext.from_statistics(stats22, qpsk2, sigma2)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
