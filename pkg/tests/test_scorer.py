import json
import math
import random

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halluspan.datamodel import DetectionConfig
from halluspan.errors import ProviderError, ScoringError
from halluspan.matcher import Match, MatchSet
from halluspan.scorer import (
    RemoteEmbeddingProvider,
    StubEmbeddingProvider,
    combined_score,
    deterministic_stub_provider,
    embed_texts,
    frequency_score,
    lexical_entropy,
    score_window,
    semantic_entropy,
    semantic_entropy_from_vectors,
    softmax,
)
from halluspan.segmenter import WindowSpan
from oracles import cosine, entropy, softmax_entropy, stub_embedding

WIN = WindowSpan(0, 2, 0, 9, "the river")


def matchset(texts, sample_indices=None):
    idx = sample_indices if sample_indices is not None else range(len(texts))
    pos = 0
    matches = []
    for i, text in zip(idx, texts):
        matches.append(Match(i, WindowSpan(0, len(text.split()), pos, pos + len(text), text), 0.5))
    return MatchSet(WIN, tuple(matches))


def vectors_with_cosines(sims, dim=8):
    """Unit anchor e0 and unit vectors whose cosine with it is exactly ``sims``."""
    anchor = np.zeros(dim)
    anchor[0] = 1.0
    out = []
    for k, s in enumerate(sims):
        v = np.zeros(dim)
        v[0] = s
        v[1 + k % (dim - 1)] = math.sqrt(1.0 - s * s)
        out.append(v)
    return anchor, out


def test_single_match_semantic_entropy_is_zero():
    assert semantic_entropy_from_vectors(*vectors_with_cosines([0.7])) == (0.0, 0.0)


def test_empty_match_semantic_entropy_is_maximal():
    assert semantic_entropy_from_vectors(np.ones(8), []) == (0.0, 1.0)


def test_uniform_similarities():
    h, norm = semantic_entropy_from_vectors(*vectors_with_cosines([0.3] * 4))
    assert h == pytest.approx(math.log(4), abs=1e-12)
    assert norm == pytest.approx(1.0, abs=1e-12)


def test_skewed_similarities_match_oracle():
    h, norm = semantic_entropy_from_vectors(*vectors_with_cosines([0.9, 0.1, 0.1]))
    _, h_oracle = softmax_entropy([0.9, 0.1, 0.1])
    assert h == pytest.approx(h_oracle, abs=1e-12)
    assert norm == pytest.approx(h_oracle / math.log(3), abs=1e-12)
    # frozen values from a scratch evaluation of softmax + entropy
    assert h == pytest.approx(1.0197970291952687, abs=1e-12)
    assert norm == pytest.approx(0.9282592591710477, abs=1e-12)


@pytest.mark.parametrize(
    "texts,h",
    [
        (["x", "x", "y", "y"], math.log(2)),
        (["same", "same", "same"], 0.0),
        (["a", "a", "a", "b"], 0.5623351446188083),
    ],
)
def test_lexical_entropy_examples(texts, h):
    raw, _ = lexical_entropy(matchset(texts))
    assert raw == pytest.approx(h, abs=1e-12)
    assert raw == pytest.approx(entropy([texts.count(t) for t in set(texts)]), abs=1e-12)


def test_lexical_entropy_canonicalizes():
    raw, norm = lexical_entropy(matchset(["The  River", "the river", "THE river"]))
    assert (raw, norm) == (0.0, 0.0)


def test_lexical_entropy_empty_is_maximal():
    assert lexical_entropy(MatchSet(WIN, ())) == (0.0, 1.0)


@pytest.mark.parametrize("count,expected", [(0, 1.0), (20, 0.0), (5, 0.75)])
def test_frequency_examples(count, expected):
    m = matchset(["t"] * count)
    assert frequency_score(m, 20) == expected


def test_frequency_counts_distinct_samples():
    m = matchset(["a", "b", "c"], sample_indices=[0, 0, 1])
    assert frequency_score(m, 4) == 0.5


@pytest.mark.parametrize(
    "parts,expected", [((1, 1, 1), 1.0), ((0, 0, 0), 0.0), ((0.5, 0.25, 1.0), 0.5)]
)
def test_combined_score_examples(parts, expected):
    cfg = DetectionConfig(alpha=0.4, beta=0.4, gamma=0.2)
    assert combined_score(*parts, cfg) == pytest.approx(expected, abs=1e-12)


unit = st.floats(0, 1, allow_nan=False)


@given(unit, unit, unit, unit)
def test_combined_score_monotone(a, b, c, bump):
    cfg = DetectionConfig()
    base = combined_score(a, b, c, cfg)
    assert 0.0 <= base <= 1.0 + 1e-12
    assert combined_score(max(a, bump), b, c, cfg) >= base
    assert combined_score(a, max(b, bump), c, cfg) >= base
    assert combined_score(a, b, max(c, bump), cfg) >= base


def test_empty_matchset_scores_one():
    cs = score_window(MatchSet(WIN, ()), 20, DetectionConfig(), provider=deterministic_stub_provider())
    assert (cs.semantic_norm, cs.lexical_norm, cs.frequency) == (1.0, 1.0, 1.0)
    assert cs.score == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=20))
def test_softmax_and_entropy_bounds(sims):
    p = softmax(sims)
    assert abs(p.sum() - 1.0) < 1e-9
    h, norm = semantic_entropy_from_vectors(*vectors_with_cosines(sims, dim=32))
    assert -1e-12 <= h <= math.log(len(sims)) + 1e-9
    assert 0.0 <= norm <= 1.0


def test_stub_examples():
    prov = StubEmbeddingProvider()
    a1, a2 = prov.embed("abc"), prov.embed("abc")
    assert np.array_equal(a1, a2)
    assert cosine(a1, a2) == pytest.approx(1.0, abs=1e-12)
    near = cosine(prov.embed("paris france"), prov.embed("paris in france"))
    far = cosine(prov.embed("paris france"), prov.embed("quantum flux"))
    assert near > far
    # the oracle reimplementation agrees on the same comparison
    o_near = cosine(stub_embedding("paris france"), stub_embedding("paris in france"))
    o_far = cosine(stub_embedding("paris france"), stub_embedding("quantum flux"))
    assert near == pytest.approx(o_near, abs=1e-12) and far == pytest.approx(o_far, abs=1e-12)


@given(st.text(max_size=40))
def test_stub_matches_oracle_and_is_unit_norm(text):
    v = StubEmbeddingProvider().embed(text)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-6
    assert np.allclose(v, stub_embedding(text), atol=1e-12)


def test_stub_dimension_floor():
    with pytest.raises(ValueError):
        StubEmbeddingProvider(4)
    assert StubEmbeddingProvider(8).embed("x").shape == (8,)


class _Unit:
    """A different unit-norm provider: random but fixed vectors per text."""

    name = "alt"
    dimension = 16

    def embed_batch(self, texts):
        out = []
        for t in texts:
            rng = np.random.default_rng(abs(hash(("alt", t))) % 2**32)
            v = rng.normal(size=self.dimension)
            out.append(v / np.linalg.norm(v))
        return out


def test_provider_swap_leaves_lexical_and_frequency_unchanged():
    m = matchset(["the river", "a river", "the river", "the rover"])
    cfg = DetectionConfig()
    a = score_window(m, 20, cfg, provider=StubEmbeddingProvider())
    b = score_window(m, 20, cfg, provider=_Unit())
    assert (a.lexical, a.lexical_norm, a.frequency) == (b.lexical, b.lexical_norm, b.frequency)


def test_provider_failure_raises_scoring_error():
    class Broken:
        name = "broken"
        dimension = 8

        def embed_batch(self, texts):
            raise ProviderError("down")

    m = matchset(["x y", "y z"])
    with pytest.raises(ScoringError) as err:
        semantic_entropy(WIN, m, Broken())
    assert err.value.window == WIN
    with pytest.raises(ScoringError):
        embed_texts(["a", "b"], Broken())


def test_embed_texts_batches_unique_texts_once():
    calls = []

    class Counting(StubEmbeddingProvider):
        def embed_batch(self, texts):
            calls.append(list(texts))
            return super().embed_batch(texts)

    vecs = embed_texts(["a", "b", "a", "c"], Counting())
    assert calls == [["a", "b", "c"]]
    assert set(vecs) == {"a", "b", "c"}
    assert embed_texts([], Counting()) == {}


def _embedding_transport(shape="data", dim=4, seen=None):
    def handler(request):
        body = json.loads(request.content)
        if seen is not None:
            seen.append((body, request.headers.get("authorization")))
        rng = random.Random(len(body["input"]))
        vecs = [[rng.uniform(0.1, 1.0) for _ in range(dim)] for _ in body["input"]]
        if shape == "data":
            payload = {"data": [{"index": i, "embedding": v} for i, v in reversed(list(enumerate(vecs)))]}
        else:
            payload = {"embeddings": vecs}
        return httpx.Response(200, json=payload)

    return httpx.MockTransport(handler)


@pytest.mark.parametrize("shape", ["data", "embeddings"])
def test_remote_provider_normalizes(shape):
    seen = []
    client = httpx.Client(transport=_embedding_transport(shape, seen=seen))
    prov = RemoteEmbeddingProvider(url="http://embed.test/v1", token="tok", model="m", client=client, batch_size=2)
    vecs = prov.embed_batch(["a", "b", "c"])
    assert len(vecs) == 3 and prov.dimension == 4
    assert all(abs(np.linalg.norm(v) - 1.0) < 1e-9 for v in vecs)
    assert [len(body["input"]) for body, _ in seen] == [2, 1]
    assert seen[0][0]["model"] == "m" and seen[0][1] == "Bearer tok"


def test_remote_provider_errors(monkeypatch):
    monkeypatch.delenv("HALLUSPAN_EMBEDDING_URL", raising=False)
    with pytest.raises(ProviderError):
        RemoteEmbeddingProvider()
    bad = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(ProviderError):
        RemoteEmbeddingProvider(url="http://x", client=bad).embed_batch(["a"])
    short = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"embeddings": []})))
    with pytest.raises(ProviderError):
        RemoteEmbeddingProvider(url="http://x", client=short).embed_batch(["a"])
