import numpy as np
import pytest

from dllapnet.io_codec import random_init
from dllapnet.model import ModelConfig
from dllapnet.spectral import SpectralConfig

TINY_SPECTRAL = SpectralConfig(n_fft=32, frame_len=16, hop=4, n_mels=6)


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        spectral=TINY_SPECTRAL,
        hidden=4,
        intermediate=6,
        num_blocks=2,
        kernel_io=3,
        kernel_dw=5,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg():
    return tiny_config()


@pytest.fixture
def tiny_weights(tiny_cfg):
    return random_init(tiny_cfg, seed=3)
