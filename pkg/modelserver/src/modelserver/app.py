"""FastAPI application wiring the /v1 protocol to the model registry.

Request handling is parallel across endpoints up to ``max_inflight``;
each model runs serialized behind its own lock. Overload answers 429 with a
Retry-After header, malformed bodies answer 400 naming the offending field.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .config import ServerConfig
from .models import ModelRegistry
from .schemas import (
    EmbedRequest,
    EmbedResponse,
    GenerateRequest,
    GenerateResponse,
    NliRequest,
    NliResponse,
    QaRequest,
    QaResponse,
    QgRequest,
    QgResponse,
    SpanItem,
    SpansRequest,
    SpansResponse,
)


class Overloaded(Exception):
    pass


class _Gate:
    """Bounded in-flight counter; raises instead of queueing when full."""

    def __init__(self, limit: int):
        self._slots = threading.BoundedSemaphore(limit)

    def __enter__(self):
        if not self._slots.acquire(blocking=False):
            raise Overloaded
        return self

    def __exit__(self, *exc):
        self._slots.release()
        return False


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    registry = ModelRegistry.from_config(config)
    app = FastAPI(title="modelserver", version="0.1.0")
    app.state.registry = registry
    app.state.gate = _Gate(config.max_inflight)
    locks = {name: threading.Lock() for name in ModelRegistry.ENDPOINTS}

    def run(endpoint: str, fn):
        with app.state.gate:
            with locks[endpoint]:
                return fn(registry[endpoint].impl)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        fields = [".".join(str(p) for p in e["loc"] if p != "body") for e in errors]
        return JSONResponse(
            status_code=400,
            content={"error": "validation", "fields": fields or ["body"]},
        )

    @app.exception_handler(Overloaded)
    async def overload_handler(request: Request, exc: Overloaded):
        return JSONResponse(
            status_code=429,
            content={"error": "overloaded"},
            headers={"Retry-After": "1"},
        )

    @app.post("/v1/qg", response_model=QgResponse)
    def qg(req: QgRequest):
        if not (req.answer_start < req.answer_end <= len(req.sentence)):
            return JSONResponse(
                status_code=400,
                content={"error": "validation", "fields": ["answer_start", "answer_end"]},
            )
        question = run("qg", lambda m: m(req.sentence, req.answer_start, req.answer_end))
        return QgResponse(question=question)

    @app.post("/v1/qa", response_model=QaResponse)
    def qa(req: QaRequest):
        answer, unanswerable, confidence = run("qa", lambda m: m(req.question, req.context))
        return QaResponse(answer=answer, unanswerable=unanswerable,
                          confidence=max(0.0, min(1.0, confidence)))

    @app.post("/v1/nli", response_model=NliResponse)
    def nli(req: NliRequest):
        label, probs = run("nli", lambda m: m(req.premise, req.hypothesis))
        return NliResponse(label=label, probs=probs)

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest):
        if len(req.texts) > registry["embed"].max_batch:
            return JSONResponse(status_code=400,
                                content={"error": "validation", "fields": ["texts"]})
        vectors = run("embed", lambda m: m(req.texts, req.mode))
        dim = getattr(registry["embed"].impl, "dim", None)
        if dim is None:
            dim = _infer_dim(vectors, req.mode)
        return EmbedResponse(vectors=vectors, dim=dim)

    @app.post("/v1/spans", response_model=SpansResponse)
    def spans(req: SpansRequest):
        pairs = run("spans", lambda m: m(req.sentence))
        return SpansResponse(spans=[SpanItem(start=s, end=e) for s, e in pairs])

    @app.post("/v1/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        if len(req.inputs) > registry["generate"].max_batch:
            return JSONResponse(status_code=400,
                                content={"error": "validation", "fields": ["inputs"]})
        text = run("generate", lambda m: m(req.inputs, req.max_tokens))
        return GenerateResponse(text=text)

    return app


def _infer_dim(vectors: list, mode: str) -> int:
    for entry in vectors:
        if mode == "sequence" and entry:
            return len(entry)
        if mode == "token":
            for vec in entry:
                return len(vec)
    return 0
