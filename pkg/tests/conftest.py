import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from oneshot_rsp.operators import ket, projector

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)


def haar_state(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def hs_state(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_state(rng, d, pure=None):
    if pure is None:
        pure = rng.random() < 0.5
    return haar_state(rng, d) if pure else hs_state(rng, d)


@st.composite
def states(draw, dims=(2, 3), pure=None):
    """Random density matrices, driven by a hypothesis-chosen seed."""
    d = draw(st.sampled_from(dims))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_state(np.random.default_rng(seed), d, pure)


@st.composite
def state_pairs(draw, dims=(2, 3), full_rank_sigma=True):
    d = draw(st.sampled_from(dims))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    rho = random_state(rng, d)
    sigma = hs_state(rng, d) if full_rank_sigma else random_state(rng, d)
    return rho, sigma


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def zero():
    return projector(ket(0, 2))


@pytest.fixture
def one():
    return projector(ket(1, 2))


@pytest.fixture
def plus():
    return projector(np.array([1, 1]) / np.sqrt(2))
