import numpy as np
import pytest

from omisi.dsp import StftConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cfg():
    return StftConfig()


@pytest.fixture
def small_cfg():
    return StftConfig(win_len=16, hop=8, dft_size=32, sample_rate=1000)
