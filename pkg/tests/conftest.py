import numpy as np
import pytest

from magcgo.forward import Potentials
from magcgo.geometry import build_domain


@pytest.fixture(scope="session")
def ball():
    return build_domain("ball", 1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def pot():
    return Potentials.from_strings(["0.3*x2", "-0.3*x1", "0.2*x1*x2"], "1 + 0.5*x1", "p")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, r in sorted(RESULTS.items()):
        terminalreporter.write_line(f"{'PASS' if r['passed'] else 'FAIL'} criterion {n:>2} "
                                    f"{r['title']}: {r['detail']} [{r['runtime_s']:.0f} s]")
