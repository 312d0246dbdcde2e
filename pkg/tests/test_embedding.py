"""Feature-hashed embedding contract: deterministic, unit-norm, language-neutral.

The frozen vectors here double as the cross-runtime anchor: any other
implementation of the same hashing scheme must reproduce them bit-for-bit
(up to its serialization's 9-significant-digit rounding).
"""

import json

import numpy as np
import pytest

from conftest import TINY_DATASET, TINY_EMBEDDINGS
from ocats.embedding import HashedEmbedder, hashed_embedding
from ocats.ingest import load_embeddings

# sha256-derived values for dim=8, seed=0; see the matching fixtures of the
# companion precompute tool
FROZEN_HELLO_WORLD_8 = np.array(
    [0.7071067811865475, 0.0, 0.0, 0.0, 0.0, 0.7071067811865475, 0.0, 0.0]
)
FROZEN_ROUTE_REQUEST_8 = np.array(
    [0.0, 0.0, 0.0, 0.0, -0.5773502691896258, 0.0, -0.5773502691896258, -0.5773502691896258]
)
FROZEN_EMPTY_8 = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])


class TestHashedEmbedding:
    def test_frozen_vectors(self):
        np.testing.assert_array_equal(
            hashed_embedding("hello world", 8, 0), FROZEN_HELLO_WORLD_8
        )
        np.testing.assert_array_equal(
            hashed_embedding("route the request", 8, 0), FROZEN_ROUTE_REQUEST_8
        )

    def test_frozen_buckets_at_dim_768(self):
        vec = hashed_embedding("hello world", 768, 0)
        nonzero = np.flatnonzero(vec)
        np.testing.assert_array_equal(nonzero, [152, 541])
        np.testing.assert_allclose(vec[nonzero], 0.7071067811865475, atol=0)

    def test_deterministic(self):
        a = hashed_embedding("the same text", 64, 3)
        b = hashed_embedding("the same text", 64, 3)
        np.testing.assert_array_equal(a, b)

    def test_unit_norm_for_random_texts(self):
        rng = np.random.default_rng(23)
        words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        for _ in range(100):
            text = " ".join(rng.choice(words, size=int(rng.integers(1, 12))))
            vec = hashed_embedding(text, int(rng.integers(4, 128)), 0)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)

    def test_tokenization_is_lowercased_alphanumeric(self):
        base = hashed_embedding("hello world", 32, 0)
        np.testing.assert_array_equal(hashed_embedding("Hello WORLD", 32, 0), base)
        np.testing.assert_array_equal(hashed_embedding("hello, world!", 32, 0), base)
        assert not np.array_equal(hashed_embedding("hello earth", 32, 0), base)

    def test_seed_changes_the_vector(self):
        assert not np.array_equal(
            hashed_embedding("hello world", 64, 0),
            hashed_embedding("hello world", 64, 1),
        )

    def test_tokenless_text_falls_back_to_a_spike(self):
        np.testing.assert_array_equal(hashed_embedding("", 8, 0), FROZEN_EMPTY_8)
        np.testing.assert_array_equal(hashed_embedding("!!! ???", 8, 0), FROZEN_EMPTY_8)

    def test_never_returns_zero_vector(self):
        rng = np.random.default_rng(29)
        words = ["a", "b", "c", "d"]
        for _ in range(200):
            text = " ".join(rng.choice(words, size=int(rng.integers(0, 6))))
            vec = hashed_embedding(text, 4, 0)
            assert np.linalg.norm(vec) > 0.0

    def test_rejects_nonpositive_dim(self):
        with pytest.raises(ValueError):
            hashed_embedding("x", 0)

    def test_result_is_read_only(self):
        vec = hashed_embedding("x", 8, 0)
        with pytest.raises(ValueError):
            vec[0] = 9.9


class TestHashedEmbedder:
    def test_callable_with_fixed_dim_and_seed(self):
        embedder = HashedEmbedder(dim=16, seed=5)
        np.testing.assert_array_equal(
            embedder("query text"), hashed_embedding("query text", 16, 5)
        )
        assert embedder("query text").shape == (16,)


class TestCheckedInFixtures:
    """The repo fixture pair is a valid precompute-tool output: same ids as
    the dataset, unit norms, values matching the hash scheme to 9 digits."""

    def test_fixture_loads_with_matching_id_set(self):
        embeddings = load_embeddings(TINY_EMBEDDINGS, normalize=False)
        dataset_ids = [
            json.loads(line)["id"] for line in TINY_DATASET.read_text().splitlines()
        ]
        assert set(embeddings) == set(dataset_ids)
        assert len(dataset_ids) == 10

    def test_fixture_vectors_are_unit_norm(self):
        embeddings = load_embeddings(TINY_EMBEDDINGS, normalize=False)
        for vec in embeddings.values():
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-6)

    def test_fixture_values_match_the_hash_scheme(self):
        embeddings = load_embeddings(TINY_EMBEDDINGS, normalize=False)
        for line in TINY_DATASET.read_text().splitlines():
            row = json.loads(line)
            expected = hashed_embedding(row["text"], 32, 0)
            np.testing.assert_allclose(embeddings[row["id"]], expected, atol=1e-8)
