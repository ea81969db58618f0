import pytest

from km2d.lie_core import build_so_adjoint
from km2d.harmonics import structure_table


@pytest.fixture(scope="session")
def so3():
    return build_so_adjoint(3)


@pytest.fixture(scope="session")
def table4():
    return structure_table(4)


@pytest.fixture(scope="session")
def table8():
    return structure_table(8)
