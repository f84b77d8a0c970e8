"""Session-oriented HTTP service over the chat pipeline.

Endpoints::

    POST /v1/sessions                    -> {"id": ...}
    POST /v1/sessions/{id}/messages      -> server-sent TurnEvent stream
    POST /v1/artifacts                   -> {"image_id": ...}   (raw bytes body)
    GET  /v1/catalog                     -> tool list
    GET  /health                         -> {"status": "ok"}

One turn may be in flight per session; a second message while busy gets 409.
Session history is appended atomically when the turn's answer event has been
emitted.  With ``persist_dir`` set, every event is also appended to one JSONL
file per session.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .artifacts import ArtifactStore
from .pipeline import ChatPipeline, TurnEvent
from .registry import catalog_to_json


@dataclass
class Session:
    id: str
    history: list[tuple[str, str]] = field(default_factory=list)
    images: list[str] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    busy: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self) -> Session:
        session = Session(id=uuid.uuid4().hex)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)


def _sse(event: TurnEvent) -> str:
    return f"data: {json.dumps(event.as_dict(), ensure_ascii=False)}\n\n"


def create_app(
    pipeline: ChatPipeline,
    store: SessionStore | None = None,
    artifact_store: ArtifactStore | None = None,
    persist_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="toolchat")
    sessions = store or SessionStore()
    artifacts = artifact_store or ArtifactStore(Path(persist_dir or ".") / "artifacts")
    persist_path = Path(persist_dir) if persist_dir else None
    if persist_path:
        persist_path.mkdir(parents=True, exist_ok=True)

    app.state.sessions = sessions
    app.state.pipeline = pipeline
    app.state.artifacts = artifacts

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/catalog")
    def catalog():
        return {"tools": catalog_to_json(pipeline.catalog)["tools"]}

    @app.post("/v1/sessions")
    def create_session():
        session = sessions.create()
        return {"id": session.id}

    @app.post("/v1/artifacts")
    async def upload_artifact(request: Request):
        data = await request.body()
        if not data:
            return JSONResponse({"error": "empty upload"}, status_code=400)
        suffix = ".png"
        name = request.headers.get("x-filename", "")
        if "." in name:
            suffix = "." + name.rsplit(".", 1)[1]
        return {"image_id": artifacts.put(data, suffix=suffix)}

    @app.post("/v1/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": "session not found"}, status_code=404)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        text = body.get("text", "")
        if not text:
            return JSONResponse({"error": "message text must be non-empty"}, status_code=400)
        image_ids = list(body.get("image_ids", []))

        with session.lock:
            if session.busy:
                return JSONResponse({"error": "a turn is already in flight"}, status_code=409)
            session.busy = True
            session.images.extend(image_ids)
            images = tuple(session.images)
            history = tuple(session.history)

        def stream():
            answer_text = None
            log = None
            if persist_path:
                log = (persist_path / f"{session_id}.events.jsonl").open("a", encoding="utf-8")
            try:
                for event in pipeline.run_turn(text, images=images, history=history):
                    if event.kind == "answer":
                        answer_text = event.payload.get("text", "")
                    if log:
                        log.write(json.dumps({"ts": time.time(), **event.as_dict()}) + "\n")
                    yield _sse(event)
            finally:
                if log:
                    log.close()
                with session.lock:
                    session.history.append(("user", text))
                    if answer_text is not None:
                        session.history.append(("assistant", answer_text))
                    session.updated = time.time()
                    session.busy = False

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
