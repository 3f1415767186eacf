import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hermharm.geometry import GridSpec, build_domain

settings.register_profile(
    "numerics", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def flat2():
    return build_domain(GridSpec(2, 8), "flat")


@pytest.fixture(scope="session")
def conformal2():
    return build_domain(GridSpec(2, 8), "conformal", amplitude=0.1)


@pytest.fixture(scope="session")
def twisted2():
    """Non-diagonal Hermitian metric with imaginary off-diagonal entries."""
    return build_domain(
        GridSpec(2, 8),
        "custom",
        entries=[["exp(0.2*cos(x1))", "0.1*sin(x2+x3)"], ["0.1*sin(x2+x3)", "exp(0.1*sin(x4))"]],
        entries_imag=[["0", "0.1*cos(x1)"], ["-0.1*cos(x1)", "0"]],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
