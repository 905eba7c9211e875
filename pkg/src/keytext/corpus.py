"""Data model and deterministic text plumbing shared by the whole toolkit.

The tokenizer defined here is the single tokenization contract for every
lexical metric in the package: lowercase, punctuation as standalone tokens,
and the possessive clitic ``'s`` kept as its own token.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable

TokenSeq = list[str]


class SchemaError(ValueError):
    """Raised when a JSONL record is malformed or missing a required field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line = line
        self.field = field


# Curly quotes and accent marks that appear in web-crawled text and must be
# folded to a plain apostrophe before the 's rule can fire.
_APOSTROPHE_TRANS = str.maketrans({c: "'" for c in "‘’‚‛`´"})

# Possessive clitic first, then word runs, then single non-space symbols.
_TOKEN_RE = re.compile(r"'s\b|\w+|[^\w\s]")

_TOKEN_WITH_POS_RE = _TOKEN_RE


def tokenize(text: str) -> TokenSeq:
    """Normalize and split text into lowercase tokens.

    Punctuation characters become standalone tokens and ``'s`` stays a single
    token, so joined output re-tokenizes to itself.
    """
    if not text:
        return []
    text = unicodedata.normalize("NFKC", text).translate(_APOSTROPHE_TRANS).lower()
    return _TOKEN_RE.findall(text)


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Like :func:`tokenize` but keeps (start, end) character offsets into the
    original string.

    Offsets are only guaranteed to line up when normalization does not change
    string length, which holds for the ASCII-ish inputs the mocks operate on.
    """
    if not text:
        return []
    folded = text.translate(_APOSTROPHE_TRANS).lower()
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(folded)]


@dataclass(frozen=True)
class FactualTriple:
    """An (entity, key, value) fact used as QA grounding and PARENT table."""

    entity: str
    key: str
    value: str

    def __post_init__(self):
        for name in ("entity", "key", "value"):
            if not getattr(self, name).strip():
                raise ValueError(f"FactualTriple.{name} must be non-empty")


_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_WS_RE = re.compile(r"\s+")


def key_words(key: str) -> str:
    """Split an attribute key into space-separated lowercase words.

    Handles both underscore style (``place_of_burial``) and camel case
    (``placeOfBurial``).
    """
    key = key.replace("_", " ")
    key = _CAMEL_RE.sub(" ", key)
    return _WS_RE.sub(" ", key).strip().lower()


def linearize_triple(triple: FactualTriple) -> str:
    """Render a triple as plain text: entity verbatim, key words, value lowercased."""
    return f"{triple.entity} {key_words(triple.key)} {triple.value.lower()}"


@dataclass(frozen=True)
class Instance:
    """One dataset row: an entity, guiding keys, grounding passages, and the
    gold description."""

    entity: str
    title: str
    factual_keys: list[tuple[str, str]]
    topical_keys: list[str]
    passages: list[str]
    reference: str

    def __post_init__(self):
        if not self.entity.strip():
            raise ValueError("Instance.entity must be non-empty")
        if not self.reference.strip():
            raise ValueError("Instance.reference must be non-empty")
        if len(self.passages) < 1:
            raise ValueError("Instance.passages must contain at least one passage")
        for i, p in enumerate(self.passages):
            if not unicodedata.normalize("NFKC", p).strip():
                raise ValueError(f"Instance.passages[{i}] is empty after normalization")

    def triples(self) -> list[FactualTriple]:
        return [FactualTriple(self.entity, k, v) for k, v in self.factual_keys]


_INSTANCE_FIELDS = ("entity", "title", "factual_keys", "topical_keys", "passages", "reference")


def _instance_from_obj(obj: dict, line: int) -> Instance:
    if not isinstance(obj, dict):
        raise SchemaError(f"line {line}: expected a JSON object", line=line)
    for field in _INSTANCE_FIELDS:
        if field not in obj:
            raise SchemaError(f"line {line}: missing required field '{field}'", line=line, field=field)
    try:
        factual = [(p["key"], p["value"]) for p in obj["factual_keys"]]
    except (TypeError, KeyError) as exc:
        raise SchemaError(
            f"line {line}: factual_keys entries must be objects with 'key' and 'value'",
            line=line,
            field="factual_keys",
        ) from exc
    try:
        return Instance(
            entity=obj["entity"],
            title=obj["title"],
            factual_keys=factual,
            topical_keys=list(obj["topical_keys"]),
            passages=list(obj["passages"]),
            reference=obj["reference"],
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"line {line}: {exc}", line=line) from exc


def read_instances(path) -> list[Instance]:
    """Read a JSONL instance file; errors carry the 1-based line number."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON: {exc.msg}", line=line_no) from exc
            instances.append(_instance_from_obj(obj, line_no))
    return instances


def instance_to_obj(inst: Instance) -> dict:
    return {
        "entity": inst.entity,
        "title": inst.title,
        "factual_keys": [{"key": k, "value": v} for k, v in inst.factual_keys],
        "topical_keys": list(inst.topical_keys),
        "passages": list(inst.passages),
        "reference": inst.reference,
    }


def write_instances(instances: Iterable[Instance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_obj(inst), ensure_ascii=False))
            fh.write("\n")


# Tokens that end a sentence only when not preceded by a known abbreviation.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc",
    "e.g", "i.e", "cf", "fig", "no", "al", "gen", "col", "lt", "capt",
    "rev", "hon", "u.s", "u.k", "inc", "ltd", "co",
}

_SENT_END_RE = re.compile(r"[.!?]+(?=\s|$)")
_TRAILING_WORD_RE = re.compile(r"([\w.]*\w)\.$")


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitting with an abbreviation guard list.

    The returned sentences are stripped slices of the input, so joining them
    reproduces the input modulo whitespace.
    """
    if not text.strip():
        return []
    sentences = []
    start = 0
    for m in _SENT_END_RE.finditer(text):
        chunk = text[start : m.end()]
        if m.group().startswith("."):
            word = _TRAILING_WORD_RE.search(chunk.rstrip())
            if word and word.group(1).lower() in _ABBREVIATIONS:
                continue
        if chunk.strip():
            sentences.append(chunk.strip())
        start = m.end()
    tail = text[start:]
    if tail.strip():
        sentences.append(tail.strip())
    return sentences


# ---------------------------------------------------------------------------
# Rule-based answer-span candidates (shared by the MAFE fallback and the mock
# span backend): capitalized runs, numbers/dates, stopword-delimited chunks.
# ---------------------------------------------------------------------------

_STOPWORDS = frozenset(
    """a an the and or but if then than so of in on at to for from by with as is are was
    were be been being am do does did have has had will would can could shall should may
    might must it its it's he she they them his her their this that these those there
    here not no nor who whom whose which what when where why how all any both each few
    more most other some such only own same very s t just don now i you we us our your
    me my him also into over under between about against during before after above below
    up down out off again further once""".split()
)

_NUMBERY_RE = re.compile(r"\d")


def _is_capitalized(tok: str) -> bool:
    return tok[:1].isupper()


def span_candidates(sentence: str) -> list[tuple[int, int]]:
    """Return (start, end) character offsets of answer-span candidates.

    Candidates are maximal capitalized-token runs, tokens containing digits
    (dates and quantities, with joining punctuation), and runs of lowercase
    non-stopword tokens. Ordered by start offset, deduplicated by surface.
    """
    raw = [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(sentence)]
    if not raw:
        return []

    spans: list[tuple[int, int]] = []

    def flush(run: list[tuple[str, int, int]]):
        if run:
            spans.append((run[0][1], run[-1][2]))

    # Capitalized runs (sentence-initial included; lone capitalized stopwords
    # such as "It" or "The" are ignored).
    run: list[tuple[str, int, int]] = []
    for tok, s, e in raw:
        if _is_capitalized(tok):
            run.append((tok, s, e))
        else:
            if len(run) > 1 or (len(run) == 1 and run[0][0].lower() not in _STOPWORDS):
                flush(run)
            run = []
    if len(run) > 1 or (len(run) == 1 and run[0][0].lower() not in _STOPWORDS):
        flush(run)

    # Number/date runs: digit-bearing tokens plus separating commas inside
    # patterns like "December 30 , 1995" are covered by extending through
    # adjacent number tokens and a single comma.
    i = 0
    while i < len(raw):
        tok, s, e = raw[i]
        if _NUMBERY_RE.search(tok):
            j = i
            end = e
            while j + 1 < len(raw):
                nxt = raw[j + 1]
                if _NUMBERY_RE.search(nxt[0]):
                    j += 1
                    end = nxt[2]
                elif nxt[0] == "," and j + 2 < len(raw) and _NUMBERY_RE.search(raw[j + 2][0]):
                    j += 2
                    end = raw[j][2]
                else:
                    break
            spans.append((s, end))
            i = j + 1
        else:
            i += 1

    # Stopword-delimited lowercase chunks (noun-ish content words).
    run = []
    for tok, s, e in raw:
        lowered = tok.lower()
        wordish = tok[:1].isalpha() and not _is_capitalized(tok)
        if wordish and lowered not in _STOPWORDS:
            run.append((tok, s, e))
        else:
            flush(run)
            run = []
    flush(run)

    spans.sort()
    seen: set[str] = set()
    out = []
    for s, e in spans:
        surface = sentence[s:e]
        if surface not in seen:
            seen.add(surface)
            out.append((s, e))
    return out
