"""HTTP service for interactive conversational retrieval sessions."""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .music_db import MusicDatabase
from .retrieval import (
    Bm25Index,
    ChatState,
    EmbeddingProvider,
    RetrievalError,
    build_bm25,
    chat_embedding,
    knn_search,
)

SESSION_TTL_SECONDS = 3600.0


@dataclass
class Session:
    session_id: str
    retriever: str  # "bm25" | "dense"
    created_at: float
    query_history: list[str] = field(default_factory=list)
    query_vectors: list[np.ndarray] = field(default_factory=list)
    turn_results: list[list[str]] = field(default_factory=list)
    feedback: list[dict] = field(default_factory=list)
    disliked: set[str] = field(default_factory=set)
    turn_index: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSessionBody(BaseModel):
    retriever: str


class TurnBody(BaseModel):
    text: str
    k: int = 10


class FeedbackBody(BaseModel):
    track_id: str
    liked: bool


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    db: MusicDatabase,
    provider: Optional[EmbeddingProvider] = None,
    item_vectors: Optional[dict[str, np.ndarray]] = None,
    bm25: Optional[Bm25Index] = None,
    static_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="musicdialog retrieval service")
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    bm25 = bm25 or build_bm25(db)

    def _evict_expired() -> None:
        now = time.monotonic()
        with sessions_lock:
            for sid in [s for s, sess in sessions.items() if now - sess.created_at > SESSION_TTL_SECONDS]:
                del sessions[sid]

    def _get_session(session_id: str) -> Optional[Session]:
        _evict_expired()
        with sessions_lock:
            return sessions.get(session_id)

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if body.retriever not in ("bm25", "dense"):
            return _error(400, f"unknown retriever {body.retriever!r}")
        if body.retriever == "dense" and (provider is None or item_vectors is None):
            return _error(400, "dense retriever requires loaded embeddings")
        session = Session(
            session_id=secrets.token_urlsafe(16),
            retriever=body.retriever,
            created_at=time.monotonic(),
        )
        with sessions_lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id}

    @app.post("/api/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnBody):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if not body.text.strip():
            return _error(400, "text must be nonempty")
        if body.k < 1:
            return _error(400, "k must be >= 1")
        with session.lock:
            if session.retriever == "dense":
                try:
                    query_vec = provider.embed_text(body.text)
                    state = ChatState(current_query=query_vec)
                    for vec in session.query_vectors:
                        state.add("query", vec)
                    # per prior turn, pool its returned tracks minus disliked ones
                    for result_ids in session.turn_results:
                        kept = [
                            item_vectors[tid]
                            for tid in result_ids
                            if tid not in session.disliked
                        ]
                        if kept:
                            mean = np.mean(kept, axis=0)
                            norm = float(np.linalg.norm(mean))
                            if norm > 1e-12:
                                state.add("music", mean / norm)
                    ranked = knn_search(chat_embedding(state), item_vectors, body.k)
                except RetrievalError as exc:
                    return _error(400, str(exc))
                session.query_vectors.append(query_vec)
            else:
                query = " ".join(session.query_history + [body.text])
                ranked = bm25.search(query, body.k)

            session.turn_index += 1
            session.query_history.append(body.text)
            session.turn_results.append([tid for tid, _ in ranked])
            results = [
                {
                    "track_id": tid,
                    "title": db.tracks[tid].title,
                    "artist_name": db.tracks[tid].artist_name,
                    "score": round(score, 6),
                }
                for tid, score in ranked
            ]
            return {"turn_index": session.turn_index, "results": results}

    @app.post("/api/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackBody):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if body.track_id not in db.tracks:
            return _error(404, f"unknown track {body.track_id!r}")
        with session.lock:
            session.feedback.append(
                {
                    "track_id": body.track_id,
                    "liked": body.liked,
                    "turn_index": session.turn_index,
                }
            )
            if body.liked:
                session.disliked.discard(body.track_id)
            else:
                session.disliked.add(body.track_id)
        return {"ok": True}

    @app.get("/api/tracks/{track_id}")
    def get_track(track_id: str):
        track = db.tracks.get(track_id)
        if track is None:
            return _error(404, f"unknown track {track_id!r}")
        return track.as_dict()

    @app.exception_handler(404)
    async def not_found(_request, _exc):
        return _error(404, "not found")

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
