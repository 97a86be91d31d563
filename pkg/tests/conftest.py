import dataclasses

import numpy as np
import pytest

from collage.data import GeneratorConfig, generate_dataset, generate_sample


@pytest.fixture(scope="session")
def tiny_config() -> GeneratorConfig:
    return dataclasses.replace(GeneratorConfig(), num_samples=8, num_frames=64)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_config):
    samples, splits = generate_dataset(tiny_config, seed=11)
    return samples, splits


@pytest.fixture(scope="session")
def one_sample(tiny_config):
    return generate_sample(tiny_config, sample_seed=5)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
