import numpy as np
import pytest

from cslds import kernels


def _backends():
    out = ["python"]
    try:
        kernels._pick("cython")
    except ImportError:
        pass
    else:
        out.append("cython")
    return out


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
