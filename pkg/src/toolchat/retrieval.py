"""Query retrieval over tool documents.

Embeds user queries and the stored document queries, then returns the nearest
question-answer pair so the planner prompt can carry it as an in-context
example.  Corpora are small (thousands of entries at most) so retrieval is an
exhaustive cosine scan; no approximate index is needed.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

import requests

from .errors import BackendUnavailable, BackendTimeout, DimMismatch, EmptyDim, EmptyIndex
from .invocation import ToolInvocation
from .registry import ToolDocument

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class IndexedExample:
    tool_name: str
    query: str
    gold: ToolInvocation
    embedding: EmbeddingVector


@dataclass(frozen=True)
class RetrievalIndex:
    examples: tuple[IndexedExample, ...]
    backend_id: str
    dim: int
    backend: object = field(compare=False, repr=False, default=None)


class DeterministicEmbedder:
    """Offline embedding backend: hashed term-frequency vectors.

    Lowercases, splits on non-alphanumerics, hashes each token into one of
    ``dim`` buckets, counts, and L2-normalizes.  A pure function of the text;
    the zero vector (empty text) stays zero.
    """

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise EmptyDim(f"dim must be positive, got {dim}")
        self.dim = dim
        self.backend_id = f"hashed-tf-{dim}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> EmbeddingVector:
        counts = [0.0] * self.dim
        for token in _TOKEN_SPLIT.split(text.lower()):
            if token:
                counts[self._bucket(token)] += 1.0
        norm = math.sqrt(sum(c * c for c in counts))
        if norm > 0:
            counts = [c / norm for c in counts]
        return EmbeddingVector(values=tuple(counts))

    def embed_many(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """Client for an OpenAI-compatible embedding endpoint.

    POSTs ``{"input": [texts], "model": name}`` and expects
    ``{"data": [{"embedding": [...]}]}`` in input order.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()
        self.backend_id = f"remote:{model}"

    def embed_many(self, texts: list[str]) -> list[EmbeddingVector]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.session.post(
                self.endpoint,
                json={"input": texts, "model": self.model},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.Timeout as e:
            raise BackendTimeout(str(e)) from None
        except requests.RequestException as e:
            raise BackendUnavailable(str(e)) from None
        if resp.status_code != 200:
            raise BackendUnavailable(f"embedding endpoint returned {resp.status_code}", resp.status_code)
        try:
            data = resp.json()["data"]
            vectors = [EmbeddingVector(tuple(float(x) for x in item["embedding"])) for item in data]
        except (KeyError, TypeError, ValueError) as e:
            raise BackendUnavailable(f"malformed embedding response: {e}") from None
        if len(vectors) != len(texts):
            raise BackendUnavailable("embedding response count does not match input")
        for v in vectors:
            if v.dim == 0:
                raise EmptyDim("embedding backend returned a zero-dimensional vector")
        return vectors

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_many([text])[0]


def embed(backend, text: str) -> EmbeddingVector:
    """Embed ``text`` with the given backend; result values are always finite."""
    vec = backend.embed(text)
    if vec.dim == 0:
        raise EmptyDim("backend produced an empty vector")
    if not all(math.isfinite(v) for v in vec.values):
        raise BackendUnavailable("backend produced non-finite embedding values")
    return vec


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; 0 when either vector has zero norm."""
    if a.dim != b.dim:
        raise DimMismatch(f"{a.dim} != {b.dim}")
    na = math.sqrt(sum(x * x for x in a.values))
    nb = math.sqrt(sum(x * x for x in b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    if a.values == b.values:
        return 1.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (na * nb)))


def build_index(backend, documents: list[ToolDocument]) -> RetrievalIndex:
    """Embed every stored query; index order is document order then pair order."""
    if not documents:
        raise EmptyIndex("cannot build an index over zero documents")
    entries = [(doc.tool_name, pair) for doc in documents for pair in doc.qa_pairs]
    vectors = backend.embed_many([pair.query for _, pair in entries])
    examples = tuple(
        IndexedExample(tool_name=name, query=pair.query, gold=pair.gold, embedding=vec)
        for (name, pair), vec in zip(entries, vectors)
    )
    dim = examples[0].embedding.dim if examples else 0
    for ex in examples:
        if ex.embedding.dim != dim:
            raise DimMismatch(f"inconsistent dims in index: {ex.embedding.dim} != {dim}")
    return RetrievalIndex(examples=examples, backend_id=backend.backend_id, dim=dim, backend=backend)


def retrieve(
    index: RetrievalIndex, query: str, k: int = 1
) -> list[tuple[IndexedExample, float]]:
    """Top-k stored examples by cosine to the embedded query.

    Descending score; ties broken by lower index position; k is capped at the
    index size.
    """
    if not index.examples:
        raise EmptyIndex("retrieve on an empty index")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    qvec = embed(index.backend, query)
    scored = [
        (pos, ex, cosine(qvec, ex.embedding)) for pos, ex in enumerate(index.examples)
    ]
    scored.sort(key=lambda t: (-t[2], t[0]))
    return [(ex, score) for _, ex, score in scored[: min(k, len(scored))]]
