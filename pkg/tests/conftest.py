import numpy as np
import pytest

from sovchain.model import ChainSpec, TwistMatrix
from sovchain.sampling import XorShift64Star

RATIONAL_TWISTS = {
    "special": [[1.3, 0.0], [0.0, 0.0]],
    "general": [[1.0, 0.4], [0.5, 0.2]],
    "identity": [[1.0, 0.0], [0.0, 1.0]],
    "generic": [[0.7, 0.3 + 0.2j], [-0.4, 1.1]],
}
TRIG_TWISTS = {
    "special": [[1.3, 0.0], [0.0, 0.0]],
    "identity": [[1.0, 0.0], [0.0, 1.0]],
    "diagonal": [[0.8, 0.0], [0.0, 1.7 - 0.3j]],
}
POLES = {1: (0.6,), 2: (1.0, -1.0), 3: (1.0, -0.5 + 0.3j, 2.0), 4: (1.0, -1.0, 0.4j, 2.0 - 0.5j)}


def make_spec(model, n, twist, nu=None):
    return ChainSpec(model, n, nu or POLES[n], TwistMatrix(twist))


@pytest.fixture
def rng():
    return XorShift64Star(2024)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1e-300, float(np.max(np.abs(b)))))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
