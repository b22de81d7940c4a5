"""Conversational retrieval: BM25, embedding providers, chat pooling, kNN, Hit@K."""

from __future__ import annotations

import hashlib
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol

import httpx
import numpy as np

from .music_db import MusicDatabase, TrackRecord
from .utterances import DialogueRecord


class RetrievalError(ValueError):
    pass


_TOKEN = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric; no stemming or stopwords."""
    return _TOKEN.findall(text.lower())


def track_document(track: TrackRecord, include_tags: bool = False) -> str:
    """Lexical description of a track; optionally appends its tag values."""
    doc = f"{track.title} by {track.artist_name}"
    if include_tags:
        doc += " " + " ".join(t.value for t in sorted(track.tags))
    return doc


class Bm25Index:
    """Okapi BM25 over a document map, with the non-negative ln(1 + .) IDF."""

    def __init__(self, documents: dict[str, str], k1: float = 1.2, b: float = 0.75):
        if not documents:
            raise RetrievalError("cannot build BM25 index over zero documents")
        self.k1 = k1
        self.b = b
        self.term_freqs: dict[str, Counter] = {}
        self.doc_lens: dict[str, int] = {}
        self.df: Counter = Counter()
        for doc_id, text in documents.items():
            toks = tokenize(text)
            self.term_freqs[doc_id] = Counter(toks)
            self.doc_lens[doc_id] = len(toks)
            for term in set(toks):
                self.df[term] += 1
        self.n_docs = len(documents)
        self.avg_len = sum(self.doc_lens.values()) / self.n_docs

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        """Top-k documents by BM25 score, descending, ties by ascending id.

        Zero-score documents are excluded.
        """
        q_terms = tokenize(query)
        scores: dict[str, float] = {}
        for term in q_terms:
            if term not in self.df:
                continue
            w_idf = self.idf(term)
            for doc_id, tf in self.term_freqs.items():
                f = tf.get(term, 0)
                if f == 0:
                    continue
                length = self.doc_lens[doc_id]
                denom = f + self.k1 * (1 - self.b + self.b * length / self.avg_len)
                scores[doc_id] = scores.get(doc_id, 0.0) + w_idf * f * (self.k1 + 1) / denom
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(doc_id, s) for doc_id, s in ranked[:k] if s > 0]


def build_bm25(db: MusicDatabase, include_tags: bool = False, **kwargs) -> Bm25Index:
    return Bm25Index(
        {tid: track_document(t, include_tags) for tid, t in db.tracks.items()}, **kwargs
    )


class EmbeddingProvider(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_track(self, track: TrackRecord) -> np.ndarray: ...


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        raise RetrievalError("vector norm too small to normalize")
    return vec / norm


class HashEmbeddingProvider:
    """Deterministic test provider: per-token Gaussian vectors summed and normalized."""

    def __init__(self, dim: int = 64, include_tags: bool = True):
        if dim < 1:
            raise RetrievalError("dim must be >= 1")
        self.dim = dim
        self.include_tags = include_tags
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            seed = int.from_bytes(digest, "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            raise RetrievalError("cannot embed empty text")
        total = np.zeros(self.dim)
        for token in tokenize(text):
            total += self._token_vector(token)
        return _unit(total)

    def embed_track(self, track: TrackRecord) -> np.ndarray:
        return self.embed_text(track_document(track, include_tags=self.include_tags))


EMB_MAGIC = b"EMB1"


def write_embeddings(path: str, dim: int, vectors: Iterable[tuple[str, np.ndarray]]) -> int:
    """Write the binary embedding file: "EMB1", u32 dim, then (u16 id len, id, f32 x dim)."""
    n = 0
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", dim))
        for item_id, vec in vectors:
            raw = item_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise RetrievalError(f"id too long: {item_id[:32]}...")
            if vec.shape != (dim,):
                raise RetrievalError(f"vector for {item_id!r} has wrong dim")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())
            n += 1
    return n


def read_embeddings(path: str) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != EMB_MAGIC:
            raise RetrievalError(f"bad magic bytes {magic!r}")
        (dim,) = struct.unpack("<I", fh.read(4))
        vectors: dict[str, np.ndarray] = {}
        while True:
            head = fh.read(2)
            if not head:
                break
            (id_len,) = struct.unpack("<H", head)
            item_id = fh.read(id_len).decode("utf-8")
            raw = fh.read(4 * dim)
            if len(raw) != 4 * dim:
                raise RetrievalError(f"truncated vector for {item_id!r}")
            vectors[item_id] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return dim, vectors


class FileEmbeddingProvider:
    """Precomputed vectors keyed by exact text / track id."""

    def __init__(self, path: str):
        self.dim, self._vectors = read_embeddings(path)

    def embed_text(self, text: str) -> np.ndarray:
        if text not in self._vectors:
            raise RetrievalError(f"no precomputed vector for text {text[:64]!r}")
        return _unit(self._vectors[text])

    def embed_track(self, track: TrackRecord) -> np.ndarray:
        if track.track_id not in self._vectors:
            raise RetrievalError(f"no precomputed vector for track {track.track_id!r}")
        return _unit(self._vectors[track.track_id])


class RemoteEmbeddingProvider:
    """POSTs text to an HTTP endpoint and expects a float array back."""

    def __init__(self, endpoint: str, dim: int, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.dim = dim
        self._client = client or httpx.Client(timeout=30.0)

    def embed_text(self, text: str) -> np.ndarray:
        resp = self._client.post(self.endpoint, json={"text": text})
        resp.raise_for_status()
        vec = np.asarray(resp.json()["embedding"], dtype=np.float64)
        if vec.shape != (self.dim,):
            raise RetrievalError("remote embedding has wrong dimension")
        return _unit(vec)

    def embed_track(self, track: TrackRecord) -> np.ndarray:
        return self.embed_text(track_document(track, include_tags=True))


@dataclass
class ChatState:
    """Accumulated history vectors plus the current query vector."""

    current_query: Optional[np.ndarray] = None
    history: list[tuple[str, np.ndarray]] = field(default_factory=list)  # kind in {query,response,music}

    def add(self, kind: str, vec: np.ndarray) -> None:
        if kind not in ("query", "response", "music"):
            raise RetrievalError(f"unknown history kind {kind!r}")
        self.history.append((kind, vec))


def chat_embedding(state: ChatState) -> np.ndarray:
    """Mean of the current query and all history vectors, re-normalized."""
    if state.current_query is None:
        raise RetrievalError("chat state has no current query vector")
    vectors = [state.current_query] + [v for _, v in state.history]
    mean = np.mean(vectors, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-12:
        raise RetrievalError("degenerate chat state: pooled vector has near-zero norm")
    return mean / norm


def knn_search(
    query: np.ndarray, items: dict[str, np.ndarray], k: int
) -> list[tuple[str, float]]:
    """Exact top-k by cosine (dot product of unit vectors), ties by ascending id."""
    if not items:
        raise RetrievalError("empty item set")
    if k < 1:
        raise RetrievalError("k must be >= 1")
    ids = sorted(items)
    matrix = np.stack([items[i] for i in ids])
    scores = matrix @ query
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    return [(ids[j], float(scores[j])) for j in order[:k]]


def hit_at_k(ranked: list[str], relevant: set[str], k: int) -> dict[str, float]:
    """any_hit: 1 iff top-k intersects relevant; recall: |top-k ∩ relevant| / |relevant|."""
    if not relevant:
        raise RetrievalError("relevant set must be nonempty")
    if k < 1:
        raise RetrievalError("k must be >= 1")
    hits = len(set(ranked[:k]) & relevant)
    return {"any_hit": 1.0 if hits else 0.0, "recall": hits / len(relevant)}


class DenseRetriever:
    """Chat-pooled dense retrieval over a fixed item-vector matrix."""

    def __init__(self, provider: EmbeddingProvider, item_vectors: dict[str, np.ndarray]):
        for item_id, vec in item_vectors.items():
            if vec.shape != (provider.dim,):
                raise RetrievalError(f"item {item_id!r} vector dim mismatch")
        self.provider = provider
        self.item_vectors = item_vectors

    def retrieve(self, state: ChatState, k: int) -> list[tuple[str, float]]:
        return knn_search(chat_embedding(state), self.item_vectors, k)


def build_item_vectors(db: MusicDatabase, provider: EmbeddingProvider) -> dict[str, np.ndarray]:
    return {tid: provider.embed_track(t) for tid, t in db.tracks.items()}


def evaluate_dataset(
    dialogues: list[DialogueRecord],
    retriever: DenseRetriever,
    ks: list[int],
) -> dict:
    """Per-turn chat-pooled retrieval scored against each turn's linked tracks.

    History for turn t holds the query, response, and mean ground-truth music
    vectors of turns 1..t-1.
    """
    max_k = max(ks)
    any_hit = {k: [] for k in ks}
    recall = {k: [] for k in ks}
    provider = retriever.provider
    n_turns = 0
    for record in dialogues:
        state = ChatState()
        for turn in record.turns:
            if not turn.track_ids:
                raise RetrievalError(
                    f"dialogue {record.dialogue_id} turn {turn.turn_index} has no tracks"
                )
            state.current_query = provider.embed_text(turn.user_query)
            ranked = [tid for tid, _ in retriever.retrieve(state, max_k)]
            relevant = set(turn.track_ids)
            for k in ks:
                metrics = hit_at_k(ranked, relevant, k)
                any_hit[k].append(metrics["any_hit"])
                recall[k].append(metrics["recall"])
            n_turns += 1
            state.add("query", state.current_query)
            state.add("response", provider.embed_text(turn.system_response))
            music = [retriever.item_vectors[tid] for tid in turn.track_ids]
            state.add("music", _unit(np.mean(music, axis=0)))
            state.current_query = None
    return {
        "ks": list(ks),
        "any_hit": {str(k): float(np.mean(any_hit[k])) for k in ks},
        "recall": {str(k): float(np.mean(recall[k])) for k in ks},
        "n_turns": n_turns,
        "n_dialogues": len(dialogues),
    }
