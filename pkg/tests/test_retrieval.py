import math
import random

import pytest

from toolchat.errors import BackendUnavailable, DimMismatch, EmptyDim, EmptyIndex
from toolchat.retrieval import (
    DeterministicEmbedder,
    EmbeddingVector,
    RemoteEmbedder,
    build_index,
    cosine,
    embed,
    retrieve,
)

from conftest import make_doc
from oracles import retrieval_scan_oracle


def test_embed_deterministic():
    backend = DeterministicEmbedder(dim=64)
    assert backend.embed("estimate the pose") == backend.embed("estimate the pose")


def test_embed_empty_is_zero_vector():
    vec = DeterministicEmbedder(dim=16).embed("")
    assert vec.values == (0.0,) * 16


def test_embed_repetition_is_parallel():
    backend = DeterministicEmbedder(dim=32)
    once = backend.embed("pose")
    twice = backend.embed("pose pose")
    assert cosine(once, twice) == 1.0


def test_embed_normalized():
    vec = DeterministicEmbedder(dim=32).embed("a few different tokens here")
    assert math.isclose(sum(v * v for v in vec.values), 1.0, rel_tol=1e-12)


def test_embedder_rejects_bad_dim():
    with pytest.raises(EmptyDim):
        DeterministicEmbedder(dim=0)


def test_cosine_identity_and_orthogonal():
    v = EmbeddingVector((1.0, 2.0, 0.0))
    assert cosine(v, v) == 1.0
    a = EmbeddingVector((1.0, 0.0))
    b = EmbeddingVector((0.0, 1.0))
    assert cosine(a, b) == 0.0


def test_cosine_hand_value():
    a = EmbeddingVector((1.0, 1.0, 0.0))
    b = EmbeddingVector((1.0, 0.0, 0.0))
    assert math.isclose(cosine(a, b), 1.0 / math.sqrt(2.0), rel_tol=1e-12)


def test_cosine_zero_norm_is_zero():
    z = EmbeddingVector((0.0, 0.0))
    assert cosine(z, EmbeddingVector((1.0, 0.0))) == 0.0


def test_cosine_dim_mismatch():
    with pytest.raises(DimMismatch):
        cosine(EmbeddingVector((1.0,)), EmbeddingVector((1.0, 2.0)))


def test_build_index_counts_and_order():
    backend = DeterministicEmbedder(dim=32)
    docs = [make_doc("A Tool", ["q1", "q2", "q3"]), make_doc("B Tool", ["q4", "q5", "q6"])]
    index = build_index(backend, docs)
    assert len(index.examples) == 6
    assert [e.query for e in index.examples] == ["q1", "q2", "q3", "q4", "q5", "q6"]
    assert index.dim == 32


def test_build_index_empty_documents():
    with pytest.raises(EmptyIndex):
        build_index(DeterministicEmbedder(dim=8), [])


def test_rebuild_index_equal():
    backend = DeterministicEmbedder(dim=32)
    docs = [make_doc("A Tool", ["alpha", "beta"])]
    assert build_index(backend, docs) == build_index(backend, docs)


def test_retrieve_exact_match_ranks_first():
    backend = DeterministicEmbedder(dim=64)
    docs = [make_doc("A Tool", ["estimate the pose", "segment the person", "caption the photo"])]
    index = build_index(backend, docs)
    ranked = retrieve(index, "segment the person", k=3)
    assert ranked[0][0].query == "segment the person"
    assert ranked[0][1] == 1.0
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_retrieve_k_capped():
    backend = DeterministicEmbedder(dim=32)
    index = build_index(backend, [make_doc("A Tool", ["x", "y"])])
    assert len(retrieve(index, "x", k=10)) == 2


def test_retrieve_empty_index():
    index = build_index(DeterministicEmbedder(dim=8), [make_doc("A Tool", ["x"])])
    empty = type(index)(examples=(), backend_id=index.backend_id, dim=8, backend=index.backend)
    with pytest.raises(EmptyIndex):
        retrieve(empty, "x")


def test_retrieve_matches_brute_force_scan():
    backend = DeterministicEmbedder(dim=64)
    docs = [
        make_doc("A Tool", ["estimate the pose", "how tall is she", "detect contact"]),
        make_doc("B Tool", ["make the photo snowy", "caption the image", "segment the man"]),
    ]
    index = build_index(backend, docs)
    stored = [(pos, list(ex.embedding.values)) for pos, ex in enumerate(index.examples)]
    vocab = ["pose", "photo", "snowy", "tall", "contact", "image", "man", "the", "a", "detect"]
    rng = random.Random(7)
    for _ in range(50):
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 6)))
        ranked = retrieve(index, query, k=len(index.examples))
        got = [index.examples.index(ex) for ex, _ in ranked]
        want, _ = retrieval_scan_oracle(
            lambda text: list(backend.embed(text).values), stored, query
        )
        assert got == want, query


def test_permutation_stability_up_to_ties():
    backend = DeterministicEmbedder(dim=64)
    docs_fwd = [make_doc("A Tool", ["alpha beta", "gamma delta"]), make_doc("B Tool", ["epsilon zeta"])]
    docs_rev = [make_doc("B Tool", ["epsilon zeta"]), make_doc("A Tool", ["alpha beta", "gamma delta"])]
    fwd = build_index(backend, docs_fwd)
    rev = build_index(backend, docs_rev)
    query = "alpha zeta"
    scores_fwd = sorted(s for _, s in retrieve(fwd, query, k=3))
    scores_rev = sorted(s for _, s in retrieve(rev, query, k=3))
    assert scores_fwd == pytest.approx(scores_rev, abs=1e-12)


def test_remote_embedder_happy_path(stub_server):
    def handler(body):
        assert body["model"] == "embed-model"
        return 200, {"data": [{"embedding": [1.0, 0.0]} for _ in body["input"]]}

    server = stub_server({"/v1/embeddings": handler})
    backend = RemoteEmbedder(endpoint=f"{server.url}/v1/embeddings", model="embed-model")
    vecs = backend.embed_many(["a", "b"])
    assert [v.values for v in vecs] == [(1.0, 0.0), (1.0, 0.0)]


def test_remote_embedder_error_status(stub_server):
    server = stub_server({"/v1/embeddings": lambda body: (500, {"error": "boom"})})
    backend = RemoteEmbedder(endpoint=f"{server.url}/v1/embeddings", model="m")
    with pytest.raises(BackendUnavailable) as err:
        backend.embed("x")
    assert err.value.status == 500


def test_embed_helper_rejects_empty_vector():
    class BadBackend:
        backend_id = "bad"

        def embed(self, text):
            return EmbeddingVector(())

    with pytest.raises(EmptyDim):
        embed(BadBackend(), "x")
