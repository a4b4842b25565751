import numpy as np
import pytest
from hypothesis import settings

from chaoslab.kernels import Kernel, symmetrize

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_symmetric(rng, q, n, scale=1.0):
    return symmetrize(Kernel(scale * rng.standard_normal((n,) * q)))


def random_mirror(rng, q, n):
    a = rng.standard_normal((n,) * q)
    return Kernel(0.5 * (a + np.transpose(a, tuple(reversed(range(q))))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
