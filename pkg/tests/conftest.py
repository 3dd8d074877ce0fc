import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from wc2p.model import Params, conserved_from_primitive

settings.register_profile(
    "wc2p", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("wc2p")


@st.composite
def params_st(draw, sigma=True):
    return Params(
        beta=draw(st.floats(100.0, 1e4)),
        sigma=draw(st.floats(0.0, 20.0)) if sigma else 0.0,
        rho1=draw(st.floats(0.5, 1000.0)),
        rho2=draw(st.floats(0.5, 1000.0)),
    )


@st.composite
def state_st(draw, params, umax=3.0):
    p = draw(st.floats(-50.0, 50.0))
    u = draw(st.floats(-umax, umax))
    v = draw(st.floats(-umax, umax))
    psi = draw(st.floats(0.0, 1.0))
    return conserved_from_primitive(p, u, v, psi, params)


def random_states(rng, params, n, umax=3.0):
    p = rng.uniform(-50, 50, n)
    u = rng.uniform(-umax, umax, n)
    v = rng.uniform(-umax, umax, n)
    psi = rng.uniform(0, 1, n)
    return conserved_from_primitive(p, u, v, psi, params)


def random_params(rng):
    return Params(beta=rng.uniform(100, 1e4), sigma=rng.uniform(0, 20),
                  rho1=rng.uniform(0.5, 1000), rho2=rng.uniform(0.5, 1000))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
