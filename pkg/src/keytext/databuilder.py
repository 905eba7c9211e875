"""Distant-supervision dataset construction.

Raw per-section records (entity, section text, infobox pairs, hyperlink type
tuples, candidate passages) are turned into instances by aligning key-value
pairs with the section text, deriving topical keys from hyperlink types, and
dropping entities whose key-value pairs are not grounded well enough in the
candidate passages.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .corpus import Instance, SchemaError, tokenize
from .textmetrics import bertscore_from_vectors, rouge_l

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RawSectionRecord:
    entity: str
    article_title: str
    section_title: str
    section_text: str
    infobox_pairs: list[tuple[str, str]]
    hyperlink_instanceof: list[tuple[str, str]]
    passages: list[str]

    def __post_init__(self):
        if not self.section_text.strip():
            raise ValueError("section_text must be non-empty")


@dataclass(frozen=True)
class AlignmentScore:
    bertscore_precision: float
    rougeL_precision: float

    def __post_init__(self):
        for name in ("bertscore_precision", "rougeL_precision"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of range: {v}")


@dataclass(frozen=True)
class BuildConfig:
    bert_threshold: float = 0.82
    rougeL_threshold: float = 0.25
    grounding_threshold: float = 0.82


def score_kv_alignment(pair: tuple[str, str], section_text: str, embed) -> AlignmentScore:
    """Alignment of one key-value pair with a section.

    The candidate is the "key value" concatenation; semantic similarity is
    BERTScore precision of the candidate against the section (every candidate
    token must find support), lexical overlap is ROUGE-L precision of the
    candidate tokens against the section tokens.
    """
    key, value = pair
    if not key.strip() or not value.strip():
        raise ValueError("key and value must be non-empty")
    if embed is None:
        raise RuntimeError("embedding backend required for alignment scoring")
    candidate = f"{key} {value}"
    cand_vecs, section_vecs = embed([candidate, section_text], "token")
    if len(cand_vecs) == 0 or len(section_vecs) == 0:
        bs_precision = 0.0
    else:
        bs_precision = bertscore_from_vectors(cand_vecs, section_vecs).precision
    rl_precision = rouge_l(tokenize(candidate), tokenize(section_text)).precision
    return AlignmentScore(bs_precision, rl_precision)


def keep_pair(score: AlignmentScore, cfg: BuildConfig) -> bool:
    """Both thresholds are strict: a pair exactly at a threshold is dropped."""
    return (score.bertscore_precision > cfg.bert_threshold
            and score.rougeL_precision > cfg.rougeL_threshold)


def select_factual_keys(record: RawSectionRecord, embed,
                        cfg: BuildConfig | None = None) -> list[tuple[str, str]]:
    cfg = cfg or BuildConfig()
    return [
        pair for pair in record.infobox_pairs
        if keep_pair(score_kv_alignment(pair, record.section_text, embed), cfg)
    ]


def derive_topical_keys(record: RawSectionRecord) -> list[str]:
    """Instance-of/subclass-of values of hyperlinks whose anchor text occurs
    in the section, in order of first appearance, case-folded, deduplicated."""
    positions = []
    for anchor, value in record.hyperlink_instanceof:
        pos = record.section_text.find(anchor)
        if pos >= 0:
            positions.append((pos, value.casefold()))
    positions.sort(key=lambda t: t[0])
    seen = set()
    keys = []
    for _, value in positions:
        if value not in seen:
            seen.add(value)
            keys.append(value)
    return keys


def _pair_grounding(pair: tuple[str, str], passages: list[str], embed) -> float:
    """BERTScore recall of the pair against the passages: the best, over
    passages, fraction of pair tokens recovered in the passage."""
    key, value = pair
    pair_vecs = embed([f"{key} {value}"], "token")[0]
    if len(pair_vecs) == 0:
        return 0.0
    best = 0.0
    for passage in passages:
        passage_vecs = embed([passage], "token")[0]
        if len(passage_vecs) == 0:
            continue
        best = max(best, bertscore_from_vectors(passage_vecs, pair_vecs).recall)
    return best


def filter_entity(records: list[RawSectionRecord], embed,
                  cfg: BuildConfig | None = None) -> bool:
    """Keep an entity when the mean grounding score of its selected key-value
    pairs reaches the grounding threshold.

    Entities with no selected pairs are kept with a warning: there is no
    evidence either way.
    """
    cfg = cfg or BuildConfig()
    if embed is None:
        raise RuntimeError("embedding backend required for grounding filter")
    scores = []
    for record in records:
        for pair in select_factual_keys(record, embed, cfg):
            scores.append(_pair_grounding(pair, record.passages, embed))
    if not scores:
        entity = records[0].entity if records else "?"
        log.warning("entity %r has no selected key-value pairs; keeping it", entity)
        return True
    return sum(scores) / len(scores) >= cfg.grounding_threshold


def build(records: list[RawSectionRecord], embed,
          cfg: BuildConfig | None = None) -> list[Instance]:
    """Compose selection, topical-key derivation, and the grounding filter
    into instances; output order follows input order."""
    cfg = cfg or BuildConfig()
    by_entity: dict[str, list[RawSectionRecord]] = {}
    for record in records:
        by_entity.setdefault(record.entity, []).append(record)
    kept = {e: filter_entity(rs, embed, cfg) for e, rs in by_entity.items()}
    instances = []
    for record in records:
        if not kept[record.entity]:
            continue
        instances.append(Instance(
            entity=record.entity,
            title=record.section_title,
            factual_keys=select_factual_keys(record, embed, cfg),
            topical_keys=derive_topical_keys(record),
            passages=list(record.passages),
            reference=record.section_text,
        ))
    return instances


def stats(instances: list[Instance]) -> dict:
    """Dataset summary: counts and average lengths/key counts in tokens."""
    n = len(instances)
    if n == 0:
        return {
            "instances": 0,
            "avg_output_len": 0.0,
            "avg_passage_len": 0.0,
            "avg_topical_keys": 0.0,
            "avg_factual_keys": 0.0,
        }
    passage_lens = [len(tokenize(p)) for inst in instances for p in inst.passages]
    return {
        "instances": n,
        "avg_output_len": sum(len(tokenize(i.reference)) for i in instances) / n,
        "avg_passage_len": sum(passage_lens) / len(passage_lens) if passage_lens else 0.0,
        "avg_topical_keys": sum(len(i.topical_keys) for i in instances) / n,
        "avg_factual_keys": sum(len(i.factual_keys) for i in instances) / n,
    }


_RAW_FIELDS = ("entity", "article_title", "section_title", "section_text",
               "infobox_pairs", "hyperlink_instanceof", "passages")


def read_raw_records(path) -> list[RawSectionRecord]:
    """Read raw-record JSONL; errors carry the 1-based line number."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON: {exc.msg}", line=line_no) from exc
            for field_name in _RAW_FIELDS:
                if field_name not in obj:
                    raise SchemaError(
                        f"line {line_no}: missing required field '{field_name}'",
                        line=line_no, field=field_name,
                    )
            try:
                records.append(RawSectionRecord(
                    entity=obj["entity"],
                    article_title=obj["article_title"],
                    section_title=obj["section_title"],
                    section_text=obj["section_text"],
                    infobox_pairs=[(p["key"], p["value"]) for p in obj["infobox_pairs"]],
                    hyperlink_instanceof=[(h["anchor"], h["value"]) for h in obj["hyperlink_instanceof"]],
                    passages=list(obj["passages"]),
                ))
            except (TypeError, KeyError, ValueError) as exc:
                raise SchemaError(f"line {line_no}: {exc}", line=line_no) from exc
    return records
