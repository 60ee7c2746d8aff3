import numpy as np
import pytest
from hypothesis import strategies as st

from plankton_qso import Parameters
from plankton_qso.harness import sample_parameters


def random_parameters(rng: np.random.Generator, constraints=()) -> Parameters:
    return sample_parameters(constraints, rng)


def random_point(rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(6))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tenth():
    return Parameters.uniform(0.1)


_rate = st.floats(1e-6, 1.0, allow_nan=False)
_fraction = st.floats(1e-3, 1.0 - 1e-3, allow_nan=False)


@st.composite
def valid_parameters(draw) -> Parameters:
    """Rates satisfying the simplex-invariance conditions by construction."""
    a = {f"a{i}": draw(_rate) for i in (1, 7, 8, 10, 11, 12)}
    a2, a3, a5 = (draw(_fraction) for _ in range(3))
    a["a2"], a["a3"], a["a5"] = a2, a3, a5
    a["a4"] = draw(_fraction) * (1.0 - max(a2, a3))
    a["a6"] = draw(_fraction) * (1.0 - a5)
    a["a9"] = draw(_fraction) * (1.0 - a["a8"]) if a["a8"] < 1.0 else 1e-6
    if a["a8"] + a["a9"] > 1.0:
        a["a8"] = 1.0 - a["a9"]
    return Parameters(**a)


@st.composite
def simplex_points(draw) -> np.ndarray:
    w = np.array([draw(st.floats(0.0, 1.0, allow_nan=False)) for _ in range(6)])
    if w.sum() == 0.0:
        w[draw(st.integers(0, 5))] = 1.0
    return w / w.sum()


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
