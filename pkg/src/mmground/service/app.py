"""HTTP/JSON protocol for interactive grounding sessions."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..catalog import Catalog, load_catalog
from ..model.io import load_model
from .engine import SessionEngine, SessionNotFound

logger = logging.getLogger("mmground.service")


class CreateSessionRequest(BaseModel):
    seed: Optional[int] = None


class UtteranceRequest(BaseModel):
    text: str


def create_app(engine: SessionEngine, static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mmground session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        result = engine.create_session(seed=req.seed)
        logger.info("created session %s (seed=%s)", result["session_id"], result["seed"])
        return result

    @app.get("/sessions/{session_id}/screen")
    def get_screen(session_id: str):
        try:
            return engine.get_screen(session_id)
        except SessionNotFound:
            if engine.recover_session(session_id):
                return engine.get_screen(session_id)
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        try:
            return {"transcript": engine.get_transcript(session_id)}
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/sessions/{session_id}/utterance")
    def utterance(session_id: str, req: UtteranceRequest):
        try:
            response = engine.handle_utterance(session_id, req.text)
        except SessionNotFound:
            if engine.recover_session(session_id):
                response = engine.handle_utterance(session_id, req.text)
            else:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        logger.info("session %s: %r -> %s", session_id, req.text[:60], response["text"][:60])
        return response

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="demo")

    return app


def build_engine(
    checkpoint_path: str,
    catalog_path: str,
    clarify_margin: float = 0.1,
    n_products: int = 3,
    state_dir: Optional[str] = None,
) -> SessionEngine:
    model = load_model(checkpoint_path)
    catalog = load_catalog(catalog_path)
    return SessionEngine(
        model,
        catalog,
        n_products=n_products,
        clarify_margin=clarify_margin,
        state_dir=state_dir,
    )


def serve(
    checkpoint_path: str,
    catalog_path: str,
    host: str = "127.0.0.1",
    port: int = 8130,
    clarify_margin: float = 0.1,
    static_dir: Optional[str] = None,
    state_dir: Optional[str] = None,
) -> None:
    import uvicorn

    engine = build_engine(
        checkpoint_path, catalog_path, clarify_margin=clarify_margin, state_dir=state_dir
    )
    app = create_app(engine, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
