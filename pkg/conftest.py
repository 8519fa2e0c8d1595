# conftest.py
"""Общие маленькие объекты для тестов BiMemLab."""

import pytest

from core.kernel_toolkit import make_exponential_kernel, make_null_kernel
from core.memory_engine import build_sgrid
from core.spatial_discretization import build_grid
from profiles import PolyBump


@pytest.fixture
def grid_1d():
    return build_grid((1.0,), (32,))


@pytest.fixture
def grid_2d():
    return build_grid((1.0, 2.0), (10, 12))


@pytest.fixture
def exp_kernel():
    return make_exponential_kernel(1.0, 1.0)


@pytest.fixture
def null_kernel():
    return make_null_kernel()


@pytest.fixture
def exp_sgrid(exp_kernel):
    return build_sgrid(exp_kernel, 1e-3)


@pytest.fixture
def bump(grid_1d):
    return PolyBump().evaluate(grid_1d)
