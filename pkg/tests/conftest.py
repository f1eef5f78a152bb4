import numpy as np
import pytest

from dlczqfc.dlcz import default_dephasing
from dlczqfc.params import ExperimentParams
from dlczqfc.qfc import ConversionDevice


@pytest.fixture
def params():
    return ExperimentParams()


@pytest.fixture
def deph():
    return default_dephasing()


@pytest.fixture
def device():
    return ConversionDevice()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
