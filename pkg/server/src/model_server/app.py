"""HTTP surface over a :class:`~model_server.engine.ModelEngine`.

Five routes, mirroring what the simulator's remote backend speaks:

    GET  /health     -> {ok, model, dim, ...}
    POST /embed      {texts}                 -> {dim, vectors}
    POST /generate   {text, n, seed, dropout} -> {summaries}
    POST /finetune   {pairs, seed, reset}    -> {state_version}
    POST /summarize  {texts}                 -> {summaries}

The engine's lock serializes model access, so concurrent requests
queue instead of racing over train/eval mode and the torch RNG. A
second finetune arriving while one is running is rejected with 409
rather than queued: training takes minutes on real models, and the
client's timeout would lapse long before its turn came.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .engine import ModelEngine, TrainingError


class Pair(BaseModel):
    source: str
    summary: str


class EmbedRequest(BaseModel):
    texts: list[str]


class GenerateRequest(BaseModel):
    text: str
    n: int = Field(ge=1)
    seed: int = 0
    dropout: bool = True


class FinetuneRequest(BaseModel):
    pairs: list[Pair] = Field(min_length=1)
    seed: int = 0
    reset: bool = True


class SummarizeRequest(BaseModel):
    texts: list[str]


def create_app(engine: ModelEngine) -> FastAPI:
    app = FastAPI(title="model-server", version="0.1.0")
    app.state.engine = engine
    app.state.finetune_gate = threading.Lock()

    @app.get("/health")
    def health() -> dict:
        with engine.lock:
            return engine.health()

    @app.post("/embed")
    def embed(req: EmbedRequest) -> dict:
        with engine.lock:
            dim, vectors = engine.embed(req.texts)
        return {"dim": dim, "vectors": vectors}

    @app.post("/generate")
    def generate(req: GenerateRequest) -> dict:
        with engine.lock:
            summaries = engine.generate(req.text, req.n, req.seed, dropout=req.dropout)
        return {"summaries": summaries}

    @app.post("/finetune")
    def finetune(req: FinetuneRequest) -> dict:
        if not app.state.finetune_gate.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="another finetune is in progress")
        try:
            with engine.lock:
                version = engine.finetune(
                    [(p.source, p.summary) for p in req.pairs], req.seed, reset=req.reset
                )
        except TrainingError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        finally:
            app.state.finetune_gate.release()
        return {"state_version": version}

    @app.post("/summarize")
    def summarize(req: SummarizeRequest) -> dict:
        with engine.lock:
            summaries = engine.summarize(req.texts)
        return {"summaries": summaries}

    return app
