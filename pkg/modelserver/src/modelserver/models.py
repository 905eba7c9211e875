"""Model implementations behind the /v1 endpoints.

Two identifier schemes are supported:

* ``builtin:<name>`` — deterministic, dependency-light reference models that
  honor the protocol exactly (hash embeddings, lexical QA/NLI, template QG,
  and an index-sequence generator for ranking-style prompts).
* ``hf:<model-id>`` — transformer checkpoints loaded through the
  ``transformers`` pipelines; loading failures abort startup.

Every model is deterministic in inference mode: identical requests yield
identical outputs within one process.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

_WORD_RE = re.compile(r"\w+|[^\w\s]")
_SENT_RE = re.compile(r"[^.!?]+[.!?]?")

_STOPS = frozenset(
    "what who when where which how is are was were did does do the a an of in on at "
    "to for from by with as and or mr mrs ms dr".split()
)


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _content(tokens: list[str]) -> list[str]:
    return [t for t in tokens if t.isalnum() and t not in _STOPS]


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENT_RE.findall(text) if s.strip()]


_SUFFIXES = ("ings", "ists", "ist", "ing", "ers", "er", "ed", "es", "s", "al")


def _stem(token: str) -> str:
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) > len(suffix) + 2:
            token = token[: -len(suffix)]
            break
    if token.endswith("e") and len(token) > 3:
        token = token[:-1]
    return token


class TemplateQG:
    """Cloze-style question templating; ``beam_size`` is accepted for parity
    with seq2seq decoders but the template is decoding-free."""

    def __init__(self, beam_size: int = 1):
        self.beam_size = beam_size

    def __call__(self, sentence: str, start: int, end: int) -> str:
        masked = f"{sentence[:start]}[MASK]{sentence[end:]}"
        return f'What fills the blank in "{masked}"?'


class OverlapQA:
    """Lexical extractive reader.

    The best context sentence by content-word overlap with the question is
    selected; the answer is the longest run of its tokens absent from the
    question. The no-answer score is 1 - overlap; when it dominates the
    answer score the question is unanswerable.
    """

    max_answer_tokens = 8

    def __call__(self, question: str, context: str) -> tuple[str, bool, float]:
        q_content = set(_content(_tokens(question)))
        best_score, best_sentence = 0.0, ""
        for sentence in _sentences(context):
            s_content = _content(_tokens(sentence))
            if not s_content or not q_content:
                continue
            overlap = len(q_content & set(s_content)) / len(q_content)
            if overlap > best_score:
                best_score, best_sentence = overlap, sentence
        no_answer = 1.0 - best_score
        if no_answer >= best_score or not best_sentence:
            return "", True, best_score
        answer = self._novel_run(best_sentence, q_content)
        if not answer:
            return "", True, best_score
        return answer, False, best_score

    def _novel_run(self, sentence: str, q_content: set) -> str:
        spans = [(m.group(), m.start(), m.end()) for m in _WORD_RE.finditer(sentence)]
        best = (0, 0, 0)  # length, start char, end char
        run_start = None
        count = 0
        for tok, s, e in spans + [(".", len(sentence), len(sentence))]:
            novel = tok.lower().isalnum() and tok.lower() not in q_content and tok.lower() not in _STOPS
            if novel:
                if run_start is None:
                    run_start = s
                count += 1
                if count > best[0]:
                    best = (count, run_start, e)
            else:
                run_start = None
                count = 0
        length, start, end = best
        if length == 0:
            return ""
        answer = sentence[start:end]
        toks = answer.split()
        if len(toks) > self.max_answer_tokens:
            answer = " ".join(toks[: self.max_answer_tokens])
        return answer


class RuleNLI:
    """Stemmed-containment entailment heuristic over a shared token prefix.

    After removing the longest common token prefix (the question, in
    answer-matching usage), a hypothesis remainder whose stems are contained
    in the premise remainder is entailed; disjoint non-empty remainders
    contradict; anything else is neutral.
    """

    def __call__(self, premise: str, hypothesis: str) -> tuple[str, list[float]]:
        p, h = _tokens(premise), _tokens(hypothesis)
        if p == h:
            return "entailment", [0.94, 0.04, 0.02]
        shared = 0
        for a, b in zip(p, h):
            if a != b:
                break
            shared += 1
        p_stems = {_stem(t) for t in p[shared:] if t.isalnum()}
        h_stems = {_stem(t) for t in h[shared:] if t.isalnum()}
        if h_stems and h_stems <= p_stems:
            return "entailment", [0.90, 0.07, 0.03]
        if shared > 0 and p_stems and h_stems and not (p_stems & h_stems):
            return "contradiction", [0.03, 0.07, 0.90]
        return "neutral", [0.08, 0.84, 0.08]


class HashEmbed:
    """Deterministic hashed token embeddings (two signed buckets per token)."""

    def __init__(self, dim: int = 384):
        self.dim = dim

    def _vector(self, token: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.float32)
        for salt in (b"a", b"b"):
            digest = hashlib.blake2b(salt + token.encode("utf-8"), digest_size=8).digest()
            bucket = int.from_bytes(digest, "big")
            v[bucket % self.dim] += 1.0 if bucket >> 63 & 1 else -1.0
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    def __call__(self, texts: list[str], mode: str) -> list:
        out = []
        for text in texts:
            vecs = [self._vector(t) for t in _tokens(text)]
            if mode == "token":
                out.append([v.tolist() for v in vecs])
            elif vecs:
                mean = np.mean(vecs, axis=0)
                norm = np.linalg.norm(mean)
                out.append((mean / norm if norm > 0 else mean).tolist())
            else:
                out.append(np.zeros(self.dim, dtype=np.float32).tolist())
        return out


class RegexSpans:
    """Capitalized runs and number runs as answer-span candidates."""

    def __call__(self, sentence: str) -> list[tuple[int, int]]:
        spans = []
        for m in re.finditer(r"(?:[A-Z][\w'-]*)(?:\s+[A-Z][\w'-]*)*", sentence):
            spans.append((m.start(), m.end()))
        for m in re.finditer(r"\d[\d,./-]*(?:\s+\d[\d,./-]*)*", sentence):
            spans.append((m.start(), m.end()))
        spans.sort()
        deduped, seen = [], set()
        for s, e in spans:
            surface = sentence[s:e]
            if surface not in seen:
                seen.add(surface)
                deduped.append((s, e))
        return deduped


_RANK_REQUEST_RE = re.compile(
    r"^question: (?P<query>.*?) index: (?P<index>\d+) context: (?P<context>.*)$",
    re.DOTALL,
)


class Seq2SeqStub:
    """Deterministic stand-in for the seq2seq generation endpoint.

    Ranking-style prompt sets (one serialized query+passage per input, each
    carrying an ``index:`` marker) are answered with a whitespace-separated
    passage index sequence ordered by query/passage content overlap.
    Everything else echoes the concatenated inputs up to the token budget.
    """

    def __call__(self, inputs: list[str], max_tokens: int) -> str:
        parsed = [_RANK_REQUEST_RE.match(text) for text in inputs]
        if inputs and all(parsed):
            scored = []
            for m in parsed:
                query = set(_content(_tokens(m.group("query"))))
                passage = set(_content(_tokens(m.group("context"))))
                overlap = len(query & passage) / len(query) if query else 0.0
                scored.append((-overlap, int(m.group("index"))))
            scored.sort()
            indices = [str(i) for _, i in scored]
            return " ".join(indices[:max_tokens])
        text = "\n".join(inputs)
        pieces = text.split()
        if len(pieces) > max_tokens:
            return " ".join(pieces[:max_tokens])
        return text


_BUILTINS = {
    "builtin:qg-template": lambda cfg: TemplateQG(beam_size=cfg.beam_size),
    "builtin:qa-overlap": lambda cfg: OverlapQA(),
    "builtin:nli-rules": lambda cfg: RuleNLI(),
    "builtin:embed-hash": lambda cfg: HashEmbed(),
    "builtin:spans-regex": lambda cfg: RegexSpans(),
    "builtin:seq2seq-stub": lambda cfg: Seq2SeqStub(),
}


def _load_hf(endpoint: str, model_id: str, cfg) -> object:
    try:
        from . import hf_models
    except ImportError as exc:  # pragma: no cover - transformers missing
        raise RuntimeError(f"cannot load {model_id}: transformers unavailable ({exc})") from exc
    return hf_models.load(endpoint, model_id, device=cfg.device, beam_size=cfg.beam_size)


@dataclass
class LoadedModel:
    identifier: str
    device: str
    max_batch: int
    impl: object


@dataclass
class ModelRegistry:
    """Resolves every /v1 endpoint to exactly one loaded model.

    Construction loads everything eagerly so a bad identifier fails startup
    instead of the first request.
    """

    models: dict[str, LoadedModel] = field(default_factory=dict)

    ENDPOINTS = ("qg", "qa", "nli", "embed", "spans", "generate")

    @classmethod
    def from_config(cls, cfg) -> "ModelRegistry":
        models = {}
        for endpoint in cls.ENDPOINTS:
            identifier = cfg.endpoints[endpoint]
            if identifier.startswith("builtin:"):
                if identifier not in _BUILTINS:
                    raise RuntimeError(f"unknown builtin model {identifier!r} for /v1/{endpoint}")
                impl = _BUILTINS[identifier](cfg)
            elif identifier.startswith("hf:"):
                impl = _load_hf(endpoint, identifier[3:], cfg)
            else:
                raise RuntimeError(f"unknown model identifier scheme in {identifier!r}")
            models[endpoint] = LoadedModel(identifier, cfg.device, cfg.max_batch, impl)
        return cls(models)

    def __getitem__(self, endpoint: str) -> LoadedModel:
        return self.models[endpoint]
