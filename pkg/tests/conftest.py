import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from projsde.model import constant_model, custom_model, example_model

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_model():
    return constant_model(1.0)


@pytest.fixture
def ex_model():
    return example_model()


@pytest.fixture
def smooth_model():
    # non-constant sigma with bounded derivatives, used where the Euler strong order shows
    return custom_model("0*x", "1 + 0.5*sin(x)", "0.5*cos(x)", "-0.5*sin(x)",
                        kappa0=0.5, kappa1=1.5)


def se_of_mean(v):
    v = np.asarray(v, dtype=float).ravel()
    return v.std(ddof=1) / np.sqrt(v.size)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(LINES):
            terminalreporter.write_line(line)
