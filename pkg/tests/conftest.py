import math

import pytest

KHZ = 2.0 * math.pi * 1e3


@pytest.fixture
def khz():
    return KHZ
