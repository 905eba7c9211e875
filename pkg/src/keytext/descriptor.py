"""Description generation: the extractive QA baseline and the serialization
contract for abstractive generation through the generate backend.

The extractive path is faithful by construction: its output is a
concatenation of sentences copied verbatim from grounding passages.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .backends import Backends
from .corpus import Instance, split_sentences, tokenize
from .rankers import RankedPassages

log = logging.getLogger(__name__)

PASSAGE_SEP = " [SEP] "
DEFAULT_MAX_INPUT_TOKENS = 512


@dataclass(frozen=True)
class GenerationRequest:
    instance: Instance
    ranked: RankedPassages
    k: int = 10

    def __post_init__(self):
        if self.k > len(self.ranked.order):
            raise ValueError("k exceeds the number of ranked passages")


def serialize_input(req: GenerationRequest) -> str:
    """Byte-exact generation input: entity, title, keys, top-k passages."""
    inst = req.instance
    fkeys = " ".join(k for k, _ in inst.factual_keys)
    tkeys = " ".join(inst.topical_keys)
    docs = PASSAGE_SEP.join(inst.passages[i] for i in req.ranked.order[: req.k])
    return f"[Entity] {inst.entity} [Title] {inst.title} [Keys] {fkeys} + {tkeys} [docs] {docs}"


_INPUT_RE = re.compile(
    r"^\[Entity\] (.*?) \[Title\] (.*?) \[Keys\] (.*?) \+ (.*?) \[docs\] (.*)$",
    re.DOTALL,
)


def parse_serialized_input(text: str) -> dict:
    """Inverse of :func:`serialize_input`.

    Keys are recovered as whitespace tokens (multi-word keys come back as
    their token sequence), passages by splitting on the passage separator.
    """
    m = _INPUT_RE.match(text)
    if not m:
        raise ValueError("not a serialized generation input")
    return {
        "entity": m.group(1),
        "title": m.group(2),
        "factual_keys": m.group(3).split(),
        "topical_keys": m.group(4).split(),
        "passages": m.group(5).split(PASSAGE_SEP) if m.group(5) else [],
    }


def extractive_generate(instance: Instance, backends: Backends) -> str:
    """QA-driven extractive baseline.

    For every factual key, a question is formed from (entity, key) and
    answered over each grounding passage independently; the sentence holding
    the most confident answer is copied to the output. Sentences are emitted
    in key order, deduplicated. Confidence ties break toward the lower
    passage index.
    """
    if not instance.factual_keys:
        raise ValueError("extractive generation needs at least one factual key")
    sentences: list[str] = []
    seen: set[str] = set()
    answered_any = False
    for key, _ in instance.factual_keys:
        question = backends.key_question(instance.entity, key)
        best = None  # (confidence, passage index, answer)
        for idx, passage in enumerate(instance.passages):
            result = backends.qa(question, passage)
            if result.unanswerable:
                continue
            if best is None or result.confidence > best[0] + 1e-12:
                best = (result.confidence, idx, result.answer)
        if best is None:
            continue
        answered_any = True
        _, idx, answer = best
        sentence = _sentence_containing(instance.passages[idx], answer)
        if sentence and sentence not in seen:
            seen.add(sentence)
            sentences.append(sentence)
    if not answered_any:
        log.warning("extractive baseline: every question was unanswerable for %r", instance.entity)
        return ""
    return " ".join(sentences)


def _sentence_containing(passage: str, answer: str) -> str:
    """The passage sentence containing the answer; falls back to the sentence
    with the highest token overlap when the answer is not a verbatim slice."""
    parts = split_sentences(passage) or [passage.strip()]
    for sent in parts:
        if answer in sent:
            return sent
    answer_tokens = set(tokenize(answer))
    return max(parts, key=lambda s: (len(answer_tokens & set(tokenize(s))), -parts.index(s)))


def abstractive_generate(req: GenerationRequest, backends: Backends,
                         max_tokens: int = 256,
                         max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS) -> str:
    """Serialize the request, send it to the generate backend, and return the
    backend text verbatim.

    Inputs longer than the backend token budget are logged before sending;
    whatever the backend returns (including truncations) is surfaced as-is.
    """
    text = serialize_input(req)
    n_tokens = len(tokenize(text))
    if n_tokens > max_input_tokens:
        log.warning(
            "generation input is %d tokens, over the %d-token backend budget; "
            "the backend may truncate", n_tokens, max_input_tokens,
        )
    return backends.generate([text], max_tokens)
