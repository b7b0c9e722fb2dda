"""Testes dos provedores de embedding e do scorer padrão."""

import numpy as np
import pytest

from app.exceptions import ConfigurationError
from app.services.embeddings import (
    ExternalVectorProvider,
    HashedBagEmbedder,
    TokenOverlapScorer,
    build_provider,
    build_scorer,
    cosine,
    tokenize,
)


def test_tokenize_lowercases_and_splits():
    assert tokenize("Anti-PD1 mAb, Phase 2!") == ["anti", "pd1", "mab", "phase", "2"]


def test_hashed_bag_is_deterministic_and_normalized():
    embedder = HashedBagEmbedder(dimension=64)
    v = embedder.embed("metformin in type 2 diabetes")
    assert v.shape == (64,)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, HashedBagEmbedder(dimension=64).embed("metformin in type 2 diabetes"))
    assert not embedder.embed("").any()


def test_hashed_bag_similar_texts_score_higher():
    embedder = HashedBagEmbedder()
    a = embedder.embed("pembrolizumab melanoma adjuvant")
    b = embedder.embed("pembrolizumab melanoma")
    c = embedder.embed("insulin glargine diabetes")
    assert cosine(a, b) > cosine(a, c)


def test_cosine_with_zero_vector_is_zero():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_external_vectors_lookup(tmp_path):
    key = ExternalVectorProvider.key_for("hello")
    path = tmp_path / "vectors.csv"
    path.write_text(f"key,v0,v1\n{key},0.5,0.25\n", encoding="utf-8")
    provider = ExternalVectorProvider(path)
    assert provider.dimension == 2
    assert provider.embed("hello").tolist() == [0.5, 0.25]
    assert provider.embed("unknown").tolist() == [0.0, 0.0]
    with pytest.raises(ConfigurationError):
        ExternalVectorProvider(path, dimension=3)


def test_token_overlap_scorer():
    scorer = TokenOverlapScorer(tau=0.1)
    assert scorer.score("a b", "a b") == pytest.approx(0.9)
    assert scorer.score("a b", "c d") == pytest.approx(-0.1)
    assert scorer.score("", "") == pytest.approx(-0.1)


def test_factories_reject_unknown_names():
    assert isinstance(build_provider("hashed-bag", 16), HashedBagEmbedder)
    assert isinstance(build_scorer("token-overlap"), TokenOverlapScorer)
    with pytest.raises(ConfigurationError):
        build_provider("external")
    with pytest.raises(ConfigurationError):
        build_scorer("bert")
