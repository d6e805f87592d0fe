import numpy as np
import pytest

from shapemocap.body import ShapeParams, build_body


@pytest.fixture(scope="session")
def template_body():
    return build_body(ShapeParams())


@pytest.fixture(scope="session")
def half_body():
    return build_body(ShapeParams(height_scale=0.5))


@pytest.fixture()
def rng():
    return np.random.default_rng(20250810)
