"""Request/response schemas for the /v1 protocol.

NLI probabilities are ordered [entailment, neutral, contradiction].
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class QgRequest(BaseModel):
    sentence: str
    answer_start: int = Field(ge=0)
    answer_end: int = Field(ge=0)


class QgResponse(BaseModel):
    question: str


class QaRequest(BaseModel):
    question: str
    context: str


class QaResponse(BaseModel):
    answer: str
    unanswerable: bool
    confidence: float = Field(ge=0.0, le=1.0)


class NliRequest(BaseModel):
    premise: str
    hypothesis: str


class NliResponse(BaseModel):
    label: Literal["entailment", "neutral", "contradiction"]
    probs: list[float] = Field(min_length=3, max_length=3)


class EmbedRequest(BaseModel):
    texts: list[str]
    mode: Literal["token", "sequence"] = "token"


class EmbedResponse(BaseModel):
    vectors: list
    dim: int


class SpanItem(BaseModel):
    start: int
    end: int


class SpansRequest(BaseModel):
    sentence: str


class SpansResponse(BaseModel):
    spans: list[SpanItem]


class GenerateRequest(BaseModel):
    inputs: list[str]
    max_tokens: int = Field(gt=0, default=256)


class GenerateResponse(BaseModel):
    text: str
