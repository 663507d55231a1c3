from fractions import Fraction as F

import pytest

from grabforest import ReproductionLaw, parse_law


@pytest.fixture
def binary():
    """Critical binary law 0:1/2, 2:1/2."""
    return parse_law("0:1/2,2:1/2", exact=True)


@pytest.fixture
def ternary():
    return ReproductionLaw.from_mapping({0: F(1, 2), 1: F(1, 4), 2: F(1, 4)})


@pytest.fixture
def subcritical():
    return parse_law("0:0.5,1:0.3,2:0.2")
