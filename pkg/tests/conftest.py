import pathlib

import pytest

from rewritelab.config import DEFAULT_MODELS
from rewritelab.datasets import DatasetRecord
from rewritelab.gateway import build_gateway
from rewritelab.synthetic import LinearSyntheticEnv, SyntheticLLM, canonical_env_spec

GOLDEN_DIR = pathlib.Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir() -> pathlib.Path:
    return GOLDEN_DIR


@pytest.fixture
def toy_records() -> list[DatasetRecord]:
    return [
        DatasetRecord(id=f"q{i}", query=f"what is item {i}", references=(f"answer {i}",))
        for i in range(8)
    ]


@pytest.fixture
def synthetic_gateway():
    """(gateway, adapter) pair over the canonical 5-arm environment."""
    env = LinearSyntheticEnv(canonical_env_spec(seed=0))
    adapter = SyntheticLLM(env)
    gateway = build_gateway("synthetic", DEFAULT_MODELS, synthetic=adapter)
    return gateway, adapter
