import numpy as np
import pytest

from manifold_descent import (
    IntegratorConfig,
    MethodSpec,
    spd_quadratic,
    unit_quadratic,
)


@pytest.fixture
def unit_obj():
    return unit_quadratic(1)


@pytest.fixture
def diag_obj():
    return spd_quadratic(np.diag([1.0, 4.0]))


@pytest.fixture
def canonical_cfg():
    """The default experiment setup: RK4, h = 1e-3, horizon 10."""
    return IntegratorConfig(h=1e-3, t_max=10.0)


@pytest.fixture
def proposed():
    return MethodSpec("proposed", alpha=1.0, beta=0.9)


@pytest.fixture
def pni():
    return MethodSpec("pni", alpha=1.0, beta=0.9)
