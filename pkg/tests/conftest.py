from __future__ import annotations

from pathlib import Path

import pytest

from pipescale.artifacts import RunConfig
from pipescale.datasets import load_dataset
from pipescale.simkernel.protocol import SimulatorModel

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def toy_dataset():
    return load_dataset(DATA_DIR / "toy.csv")


@pytest.fixture()
def sim_model():
    return SimulatorModel(pass_prob=1.0, evaluator_judge_correlation=1.0, judge_noise=0.0)


@pytest.fixture()
def base_config():
    return RunConfig(pruning_ratio=0.0, branching_factor=5, seed=11, judge_repeats=1)
