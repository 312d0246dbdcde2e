"""Shared fixtures: tiny checked-in corpora and synthetic cluster data."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ocats.cache import Cache
from ocats.domain import EmbeddedInstance, Instance, LabelSpace

import synth

FIXTURES = Path(__file__).parent / "fixtures"
TINY_DATASET = FIXTURES / "tiny_dataset.jsonl"
TINY_EMBEDDINGS = FIXTURES / "tiny_embeddings.jsonl"


def embedded(id_: str, vector, gold=None) -> EmbeddedInstance:
    """Build an EmbeddedInstance around a unit-normalized vector."""
    vec = np.asarray(vector, dtype=np.float64)
    vec = vec / np.linalg.norm(vec)
    return EmbeddedInstance(Instance(id=id_, text=f"text {id_}", gold_label=gold), vec)


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


@pytest.fixture
def space3() -> LabelSpace:
    return LabelSpace(["alpha", "beta", "gamma"])


@pytest.fixture
def space5() -> LabelSpace:
    return LabelSpace([f"c{i}" for i in range(5)])


def filled_cache(space: LabelSpace, entries) -> Cache:
    """Cache pre-populated with (id, vector, label) triples."""
    dim = len(np.atleast_1d(entries[0][1]))
    cache = Cache(space, dim)
    for id_, vector, label in entries:
        cache.insert(embedded(id_, vector), label)
    return cache


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """Small synthetic cluster corpus shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("synth")
    return synth.write_corpus(root, n_train_per_class=25, n_test_per_class=10)


@pytest.fixture
def small_config(synth_corpus, tmp_path):
    """Fast experiment config over the shared corpus, one lambda."""
    cfg = synth.base_config(
        synth_corpus, tmp_path / "out", lambdas=[0.1], n_shuffles=2, n_trials=2
    )
    cfg["tuning"]["resolution"] = 4
    return cfg


def write_config(cfg: dict, path: Path) -> Path:
    path.write_text(json.dumps(cfg, indent=2))
    return path
