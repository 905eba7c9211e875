"""Pluggable model-service boundary.

Every neural sub-model (question generation, question answering, NLI,
embeddings, span extraction, free generation) is reached through a small
callable bundle. The bundle is backed either by deterministic in-process
mocks or by a remote HTTP service speaking the ``/v1`` JSON protocol:

    POST /v1/qg       {"sentence": str, "answer_start": int, "answer_end": int}
                      -> {"question": str}
    POST /v1/qa       {"question": str, "context": str}
                      -> {"answer": str, "unanswerable": bool, "confidence": float}
    POST /v1/nli      {"premise": str, "hypothesis": str}
                      -> {"label": str, "probs": [float, float, float]}
    POST /v1/embed    {"texts": [str], "mode": "token"|"sequence"}
                      -> {"vectors": ..., "dim": int}
    POST /v1/spans    {"sentence": str} -> {"spans": [{"start": int, "end": int}]}
    POST /v1/generate {"inputs": [str], "max_tokens": int} -> {"text": str}

NLI probabilities are ordered [entailment, neutral, contradiction].
"""

from __future__ import annotations

import hashlib
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import requests

from .corpus import (
    key_words,
    span_candidates,
    split_sentences,
    tokenize,
    tokenize_with_offsets,
)
from .textmetrics import harmonic

BACKEND_URL_ENV = "KEYTEXT_BACKEND_URL"

NLI_LABELS = ("entailment", "neutral", "contradiction")

# Marker the mock question generator uses to blank the answer span.
BLANK = "___"
_QG_PREFIX = "What is the answer mentioned in: "


class BackendError(RuntimeError):
    """Transport-level failure talking to a backend endpoint."""

    def __init__(self, endpoint: str, message: str):
        super().__init__(f"{endpoint}: {message}")
        self.endpoint = endpoint


class ProtocolError(ValueError):
    """The backend answered, but the payload violated the /v1 schema."""

    def __init__(self, endpoint: str, field_name: str, message: str = ""):
        super().__init__(f"{endpoint}: bad field '{field_name}' {message}".rstrip())
        self.endpoint = endpoint
        self.field = field_name


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "mock"
    timeout: float = 30.0
    max_concurrency: int = 4
    retries: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @property
    def is_mock(self) -> bool:
        return self.base_url == "mock"


@dataclass(frozen=True)
class NliVerdict:
    label: str
    probs: tuple[float, float, float]

    def __post_init__(self):
        if self.label not in NLI_LABELS:
            raise ValueError(f"unknown NLI label {self.label!r}")
        if abs(sum(self.probs) - 1.0) > 1e-6:
            raise ValueError("NLI probabilities must sum to 1")
        if NLI_LABELS[int(np.argmax(self.probs))] != self.label:
            raise ValueError("label must be the argmax of probs")


class QaResult(NamedTuple):
    answer: str
    unanswerable: bool
    confidence: float


# ---------------------------------------------------------------------------
# Mock backends: pure deterministic functions, stable across processes.
# ---------------------------------------------------------------------------


def mock_qg(sentence: str, start: int, end: int) -> str:
    if not (0 <= start < end <= len(sentence)):
        raise ValueError("answer span outside sentence")
    return f"{_QG_PREFIX}{sentence[:start]}{BLANK}{sentence[end:]}?"


def _is_word(token: str) -> bool:
    return any(ch.isalnum() for ch in token)


_PLAIN_QUESTION_STOPS = frozenset(
    "what who when where which whom whose how is are was were did does do the a an of in".split()
)


def _question_core(question: str) -> tuple[list[str], frozenset]:
    """Word tokens of the question that describe the sought content, plus the
    token set to ignore on the context side so both sides score alike."""
    if question.startswith(_QG_PREFIX) and question.endswith("?"):
        body = question[len(_QG_PREFIX) : -1]
        return [t for t in tokenize(body) if t != BLANK and _is_word(t)], frozenset((BLANK,))
    core = [t for t in tokenize(question) if t not in _PLAIN_QUESTION_STOPS and _is_word(t)]
    return core, _PLAIN_QUESTION_STOPS


def _overlap_f1(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    overlap = sum((a & b).values())
    return harmonic(overlap / sum(a.values()), overlap / sum(b.values()))


@dataclass(frozen=True)
class MockQA:
    """Sliding-window lexical reader.

    Scores each candidate window of each context sentence by how well the
    rest of that sentence (the window removed) overlaps the question, which
    answers cloze questions produced by :func:`mock_qg` exactly and plain
    questions approximately. Best score below ``threshold`` means
    unanswerable.
    """

    threshold: float = 0.3
    max_window: int = 10

    def __call__(self, question: str, context: str) -> QaResult:
        if not context.strip():
            return QaResult("", True, 0.0)
        core_tokens, ignore = _question_core(question)
        core = Counter(core_tokens)
        sentences = split_sentences(context) or [context.strip()]
        # Best candidate by (score desc, sentence idx, start, window length).
        found = None

        def scoreable(tok: str) -> bool:
            # Punctuation is excluded from scoring: it is shared by nearly
            # every sentence and would let unrelated contexts look answerable.
            return _is_word(tok) and tok not in ignore

        for si, sent in enumerate(sentences):
            toks = tokenize_with_offsets(sent)
            if not toks:
                continue
            words = [t[0] for t in toks]
            total = Counter(w for w in words if scoreable(w))
            for i in range(len(toks)):
                window = Counter()
                for j in range(i + 1, min(len(toks), i + self.max_window) + 1):
                    if scoreable(words[j - 1]):
                        window[words[j - 1]] += 1
                    complement = total - window
                    score = _overlap_f1(complement, core)
                    key = (-score, si, i, j - i)
                    if found is None or key < found[0]:
                        surface = sent[toks[i][1] : toks[j - 1][2]]
                        found = (key, surface, score)
        if found is None:
            return QaResult("", True, 0.0)
        _, surface, score = found
        if score < self.threshold:
            return QaResult("", True, score)
        return QaResult(surface, False, score)


def mock_nli(premise: str, hypothesis: str) -> NliVerdict:
    """Lexical-heuristic NLI.

    Exact token match is entailment; when both strings share a non-empty
    token prefix (the question) and the remainders are token-disjoint, it is
    contradiction; everything else is neutral.
    """
    p = tokenize(premise)
    h = tokenize(hypothesis)
    if p == h:
        return NliVerdict("entailment", (0.98, 0.01, 0.01))
    shared = 0
    for a, b in zip(p, h):
        if a != b:
            break
        shared += 1
    p_rest = Counter(p[shared:])
    h_rest = Counter(h[shared:])
    if shared > 0 and p_rest and h_rest and not (p_rest & h_rest):
        return NliVerdict("contradiction", (0.01, 0.01, 0.98))
    return NliVerdict("neutral", (0.01, 0.98, 0.01))


MOCK_EMBED_DIM = 8192


def _token_vector(token: str, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.float32)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    v[int.from_bytes(digest, "big") % dim] = 1.0
    return v


def mock_embed(texts: list[str], mode: str = "token"):
    """Hashed one-hot token embeddings: identical tokens map to identical
    vectors, distinct tokens are orthogonal up to hash collisions."""
    if mode not in ("token", "sequence"):
        raise ValueError(f"unknown embed mode {mode!r}")
    out = []
    for text in texts:
        vecs = [_token_vector(t, MOCK_EMBED_DIM) for t in tokenize(text)]
        if mode == "token":
            out.append(vecs)
        else:
            if vecs:
                mean = np.mean(vecs, axis=0)
                norm = np.linalg.norm(mean)
                out.append(mean / norm if norm > 0 else mean)
            else:
                out.append(np.zeros(MOCK_EMBED_DIM, dtype=np.float32))
    return out


def mock_spans(sentence: str) -> list[tuple[int, int]]:
    return span_candidates(sentence)


@dataclass(frozen=True)
class MockGenerate:
    """Echo generator: concatenates the prompts and truncates to the token
    budget, so truncation is visible to the caller."""

    def __call__(self, inputs: list[str], max_tokens: int) -> str:
        text = "\n".join(inputs)
        pieces = text.split()
        if len(pieces) > max_tokens:
            return " ".join(pieces[:max_tokens])
        return text


def mock_key_question(entity: str, key: str) -> str:
    return f"What is the {key_words(key)} of {entity}?"


# ---------------------------------------------------------------------------
# Remote client.
# ---------------------------------------------------------------------------


class RemoteClient:
    """Thin /v1 HTTP client with a concurrency bound and bounded retries.

    Shareable across threads; at most ``config.max_concurrency`` requests are
    in flight at any time.
    """

    def __init__(self, config: BackendConfig):
        if config.is_mock:
            raise ValueError("RemoteClient needs a real base URL")
        self.config = config
        self._session = requests.Session()
        self._gate = threading.BoundedSemaphore(config.max_concurrency)

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + endpoint
        last_error: Exception | None = None
        for _ in range(self.config.retries + 1):
            with self._gate:
                try:
                    resp = self._session.post(url, json=payload, timeout=self.config.timeout)
                    resp.raise_for_status()
                    return resp.json()
                except (requests.RequestException, ValueError) as exc:
                    last_error = exc
        raise BackendError(endpoint, f"request failed after {self.config.retries + 1} attempts: {last_error}")

    @staticmethod
    def _require(obj: dict, endpoint: str, field_name: str, kind):
        if field_name not in obj:
            raise ProtocolError(endpoint, field_name, "missing")
        value = obj[field_name]
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            raise ProtocolError(endpoint, field_name, f"expected {kind}")
        return value

    def qg(self, sentence: str, start: int, end: int) -> str:
        obj = self._post("/v1/qg", {"sentence": sentence, "answer_start": start, "answer_end": end})
        return self._require(obj, "/v1/qg", "question", str)

    def qa(self, question: str, context: str) -> QaResult:
        obj = self._post("/v1/qa", {"question": question, "context": context})
        return QaResult(
            self._require(obj, "/v1/qa", "answer", str),
            self._require(obj, "/v1/qa", "unanswerable", bool),
            self._require(obj, "/v1/qa", "confidence", float),
        )

    def nli(self, premise: str, hypothesis: str) -> NliVerdict:
        obj = self._post("/v1/nli", {"premise": premise, "hypothesis": hypothesis})
        label = self._require(obj, "/v1/nli", "label", str)
        probs = self._require(obj, "/v1/nli", "probs", list)
        if len(probs) != 3:
            raise ProtocolError("/v1/nli", "probs", "expected 3 probabilities")
        try:
            return NliVerdict(label, tuple(float(p) for p in probs))
        except (TypeError, ValueError) as exc:
            raise ProtocolError("/v1/nli", "probs", str(exc)) from exc

    def embed(self, texts: list[str], mode: str = "token"):
        obj = self._post("/v1/embed", {"texts": texts, "mode": mode})
        vectors = self._require(obj, "/v1/embed", "vectors", list)
        self._require(obj, "/v1/embed", "dim", int)
        if mode == "token":
            return [[np.asarray(v, dtype=float) for v in text_vecs] for text_vecs in vectors]
        return [np.asarray(v, dtype=float) for v in vectors]

    def spans(self, sentence: str) -> list[tuple[int, int]]:
        obj = self._post("/v1/spans", {"sentence": sentence})
        spans = self._require(obj, "/v1/spans", "spans", list)
        out = []
        for s in spans:
            if not isinstance(s, dict) or "start" not in s or "end" not in s:
                raise ProtocolError("/v1/spans", "spans", "entries need start/end")
            out.append((int(s["start"]), int(s["end"])))
        return out

    def generate(self, inputs: list[str], max_tokens: int) -> str:
        obj = self._post("/v1/generate", {"inputs": inputs, "max_tokens": max_tokens})
        return self._require(obj, "/v1/generate", "text", str)

    def key_question(self, entity: str, key: str) -> str:
        # Key-to-question goes through the QG endpoint on a synthesized cloze.
        sentence = f"The {key_words(key)} of {entity} is unknown."
        start = sentence.rindex("unknown")
        return self.qg(sentence, start, start + len("unknown"))


@dataclass
class Backends:
    """Callable bundle the evaluation and generation code programs against."""

    qg: Callable[[str, int, int], str]
    qa: Callable[[str, str], QaResult]
    nli: Callable[[str, str], NliVerdict] | None
    embed: Callable[[list[str], str], list]
    spans: Callable[[str], list[tuple[int, int]]] | None
    generate: Callable[[list[str], int], str]
    key_question: Callable[[str, str], str]
    config: BackendConfig = field(default_factory=BackendConfig)

    @classmethod
    def mock(cls, qa_threshold: float = 0.3) -> "Backends":
        return cls(
            qg=mock_qg,
            qa=MockQA(threshold=qa_threshold),
            nli=mock_nli,
            embed=mock_embed,
            spans=mock_spans,
            generate=MockGenerate(),
            key_question=mock_key_question,
            config=BackendConfig(),
        )

    @classmethod
    def remote(cls, config: BackendConfig) -> "Backends":
        client = RemoteClient(config)
        return cls(
            qg=client.qg,
            qa=client.qa,
            nli=client.nli,
            embed=client.embed,
            spans=client.spans,
            generate=client.generate,
            key_question=client.key_question,
            config=config,
        )

    @classmethod
    def from_spec(cls, spec: str, **kwargs) -> "Backends":
        """Build a bundle from a CLI-style spec: "mock" or a base URL."""
        if spec == "mock":
            return cls.mock(**kwargs)
        return cls.remote(BackendConfig(base_url=spec))
