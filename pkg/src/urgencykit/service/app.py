"""HTTP service hosting urgency scoring and active-labeling sessions.

Scoring runs against an immutable loaded ensemble, so concurrent requests
are safe. Session mutations serialize through a per-session lock; status
and batch reads see the last committed state.
"""

from __future__ import annotations

import json
import os
import threading
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..active import ActiveSession, LabelSubmissionError, NoModelError, Schedule
from ..config import PipelineConfig
from ..ensemble import EnsembleModel, Featurizer
from ..preprocess import Message
from . import schemas

VERDICTS = {0: "non_urgent", 1: "urgent"}


class SessionStore:
    def __init__(self, pool: list[Message], featurizer: Featurizer,
                 config: PipelineConfig, sessions_dir: str | None):
        self.pool = pool
        self.featurizer = featurizer
        self.config = config
        self.sessions_dir = sessions_dir
        self._sessions: dict[str, tuple[ActiveSession, threading.Lock]] = {}
        self._create_lock = threading.Lock()

    def create(self, seed: int | None, schedule: Schedule | None) -> ActiveSession:
        cfg = self.config
        schedule = schedule or Schedule(
            cfg.active.seed_size, cfg.active.batch_size, cfg.active.target_total
        )
        with self._create_lock:
            session_id = uuid.uuid4().hex[:12]
            log_path = None
            if self.sessions_dir:
                os.makedirs(self.sessions_dir, exist_ok=True)
                log_path = os.path.join(self.sessions_dir, f"{session_id}.jsonl")
            session = ActiveSession(
                pool=self.pool,
                schedule=schedule,
                featurizer=self.featurizer,
                seed=cfg.seed if seed is None else seed,
                session_id=session_id,
                log_path=log_path,
                reg_grid=tuple(cfg.classifier.reg_grid),
                cv_folds=cfg.classifier.cv_folds,
                mode=cfg.classifier.mode,
                rules=cfg.drop_rules(),
            )
            self._sessions[session.session_id] = (session, threading.Lock())
        return session

    def get(self, session_id: str) -> tuple[ActiveSession, threading.Lock]:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")


def create_app(
    model: EnsembleModel | None = None,
    pool: list[Message] | None = None,
    featurizer: Featurizer | None = None,
    config: PipelineConfig | None = None,
    sessions_dir: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    """Build the service; pass a fitted model for scoring and/or a pool plus
    featurizer for labeling sessions. ``ui_dir`` serves the static labeling
    frontend at the root path."""
    config = config or PipelineConfig()
    app = FastAPI(title="urgencykit", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = None
    if pool is not None:
        if featurizer is None:
            raise ValueError("sessions need a featurizer (at minimum manual features)")
        store = SessionStore(pool, featurizer, config, sessions_dir)
    app.state.model = model
    app.state.store = store

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(
            status="ok",
            model_loaded=app.state.model is not None,
            pool_size=len(store.pool) if store else None,
        )

    @app.post("/v1/score", response_model=schemas.ScoreResponse)
    def score(request: schemas.ScoreRequest):
        m: EnsembleModel | None = app.state.model
        if m is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        results = []
        for i, text in enumerate(request.texts):
            s = m.score(Message(id=str(i), text=text))
            results.append(
                schemas.ScoredText(score=s, verdict=VERDICTS[int(s > m.threshold)])
            )
        return schemas.ScoreResponse(results=results)

    def _require_store() -> SessionStore:
        if store is None:
            raise HTTPException(status_code=503, detail="no labeling pool configured")
        return store

    @app.post("/v1/sessions", response_model=schemas.SessionStatus)
    def create_session(request: schemas.CreateSessionRequest):
        st = _require_store()
        schedule = None
        if request.schedule is not None:
            b = request.schedule
            try:
                schedule = Schedule(b.seed_size, b.batch_size, b.target_total)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        try:
            session = st.create(request.seed, schedule)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.SessionStatus(**session.status())

    @app.get("/v1/sessions/{session_id}/status", response_model=schemas.SessionStatus)
    def session_status(session_id: str):
        session, _ = _require_store().get(session_id)
        return schemas.SessionStatus(**session.status())

    @app.get("/v1/sessions/{session_id}/batch", response_model=schemas.BatchResponse)
    def pending_batch(session_id: str):
        session, _ = _require_store().get(session_id)
        scores = session.pending_scores()
        return schemas.BatchResponse(
            session_id=session.session_id,
            round=session.round,
            model_version=session.model_version,
            messages=[
                schemas.PendingMessage(id=m.id, text=m.text, score=scores[m.id])
                for m in session.pending_batch()
            ],
        )

    @app.post("/v1/sessions/{session_id}/labels", response_model=schemas.SessionStatus)
    def submit_labels(session_id: str, request: schemas.SubmitLabelsRequest):
        session, lock = _require_store().get(session_id)
        with lock:
            try:
                status = session.submit_labels([(l.id, l.label) for l in request.labels])
            except LabelSubmissionError as exc:
                raise HTTPException(
                    status_code=409, detail={"message": str(exc), "ids": exc.ids}
                )
            except NoModelError as exc:
                raise HTTPException(status_code=409, detail={"message": str(exc), "ids": []})
        return schemas.SessionStatus(**status)

    @app.get("/v1/sessions/{session_id}/export", response_class=PlainTextResponse)
    def export_labeled(session_id: str):
        session, _ = _require_store().get(session_id)
        lines = [
            json.dumps({"id": m.id, "text": m.text, "label": m.label})
            for m in session.export_labeled()
        ]
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""),
                                 media_type="application/x-ndjson")

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
