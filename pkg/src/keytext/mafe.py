"""Multi-aspect factuality evaluation (MAFE).

Questions are generated from spans of the reference and from factual triples
(recall side) or from spans of the hypothesis (precision side), answered by a
QA backend against the opposite text, and the predicted answers are matched
against the gold spans. Recall is the mean item score over reference/triple
questions; precision is the mean over hypothesis questions, where each item
takes the better of its reference-context and triple-context answers.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backends import Backends, QaResult
from .corpus import FactualTriple, linearize_triple, span_candidates, split_sentences
from .textmetrics import bertscore_from_vectors, harmonic, token_f1

SOURCE_REFERENCE = "reference_sentence"
SOURCE_TRIPLE = "factual_triple"
SOURCE_HYPOTHESIS = "hypothesis_sentence"


@dataclass(frozen=True)
class AnswerSpan:
    sentence: str
    start: int
    end: int
    surface: str

    def __post_init__(self):
        if self.sentence[self.start : self.end] != self.surface:
            raise ValueError("surface must equal the sentence slice")
        if not self.surface:
            raise ValueError("span must be non-empty")


@dataclass(frozen=True)
class QAItem:
    question: str
    gold_answer: str
    source: str
    context_used: str


@dataclass(frozen=True)
class MafeItem:
    side: str  # "recall" | "precision"
    source: str
    question: str
    gold: str
    predicted: str
    score: float
    unanswerable: bool

    def to_obj(self) -> dict:
        return {
            "side": self.side,
            "source": self.source,
            "question": self.question,
            "gold": self.gold,
            "predicted": self.predicted,
            "score": self.score,
            "unanswerable": self.unanswerable,
        }


@dataclass(frozen=True)
class MafeReport:
    recall: float
    precision: float
    f1: float
    items: list[MafeItem]
    flags: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "flags": list(self.flags),
            "items": [it.to_obj() for it in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), ensure_ascii=False)


@dataclass(frozen=True)
class MafeConfig:
    max_spans_per_sentence: int = 8
    filter_questions: bool = False
    filter_threshold: float = 0.5
    jobs: int = 1


def extract_spans(sentence: str, backends: Backends | None = None,
                  max_spans: int = 8) -> list[AnswerSpan]:
    """Answer-span candidates of one sentence, deduplicated by surface and
    ordered by start offset; capped at ``max_spans``."""
    if backends is not None and backends.spans is not None:
        raw = backends.spans(sentence)
    else:
        raw = span_candidates(sentence)
    spans = []
    seen = set()
    for start, end in sorted(raw):
        surface = sentence[start:end]
        if not surface or surface in seen:
            continue
        seen.add(surface)
        spans.append(AnswerSpan(sentence, start, end, surface))
        if len(spans) >= max_spans:
            break
    return spans


def generate_question(sentence: str, span: AnswerSpan, backends: Backends) -> str:
    if span.sentence != sentence or sentence[span.start : span.end] != span.surface:
        raise ValueError("span does not lie in the sentence")
    return backends.qg(sentence, span.start, span.end)


def answer_question(question: str, context: str, backends: Backends) -> QaResult:
    if not question.strip():
        raise ValueError("question must be non-empty")
    return backends.qa(question, context)


def match_answers(question: str, gold: str, predicted: str, backends: Backends) -> float:
    """Score a predicted answer against the gold answer in [0, 1].

    With an NLI backend the two answers are each appended to the question to
    form premise and hypothesis: entailment scores 1, contradiction 0, and
    neutral falls back to BERTScore F1 of the answer strings under the
    embedding backend. Without NLI, token F1 of the answers.
    """
    if not predicted.strip():
        return 0.0
    if backends.nli is None:
        return token_f1(gold, predicted)
    verdict = backends.nli(f"{question} {gold}", f"{question} {predicted}")
    if verdict.label == "entailment":
        return 1.0
    if verdict.label == "contradiction":
        return 0.0
    gold_vecs, pred_vecs = backends.embed([gold, predicted], "token")
    if len(gold_vecs) == 0 or len(pred_vecs) == 0:
        return 0.0
    return bertscore_from_vectors(pred_vecs, gold_vecs).f1


def triples_context(triples: list[FactualTriple]) -> str:
    """Concatenation of all linearized triples, period-separated so the QA
    reader can localize each fact."""
    return ". ".join(linearize_triple(t) for t in triples) + ("." if triples else "")


def _triple_question(triple: FactualTriple, backends: Backends) -> QAItem:
    lin = linearize_triple(triple)
    value = triple.value.lower()
    start = len(lin) - len(value)
    question = backends.qg(lin, start, len(lin))
    return QAItem(question, triple.value, SOURCE_TRIPLE, lin)


def _recall_questions(reference: str, triples: list[FactualTriple],
                      backends: Backends, cfg: MafeConfig) -> list[QAItem]:
    items = []
    for sentence in split_sentences(reference):
        for span in extract_spans(sentence, backends, cfg.max_spans_per_sentence):
            q = generate_question(sentence, span, backends)
            items.append(QAItem(q, span.surface, SOURCE_REFERENCE, sentence))
    for triple in triples:
        items.append(_triple_question(triple, backends))
    return items


def _precision_questions(hypothesis: str, backends: Backends, cfg: MafeConfig) -> list[QAItem]:
    items = []
    for sentence in split_sentences(hypothesis):
        for span in extract_spans(sentence, backends, cfg.max_spans_per_sentence):
            q = generate_question(sentence, span, backends)
            items.append(QAItem(q, span.surface, SOURCE_HYPOTHESIS, sentence))
    return items


def _map_ordered(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _passes_roundtrip(item: QAItem, backends: Backends, cfg: MafeConfig) -> bool:
    result = backends.qa(item.question, item.context_used)
    if result.unanswerable:
        return False
    return match_answers(item.question, item.gold_answer, result.answer, backends) >= cfg.filter_threshold


def mafe_recall(hypothesis: str, reference: str, triples: list[FactualTriple],
                backends: Backends, cfg: MafeConfig | None = None
                ) -> tuple[float, list[MafeItem], list[str]]:
    """Mean over reference/triple questions of the answer-match score when
    answered from the hypothesis; unanswerable items score 0."""
    if not reference.strip():
        raise ValueError("reference must be non-empty")
    cfg = cfg or MafeConfig()
    questions = _recall_questions(reference, triples, backends, cfg)
    if cfg.filter_questions:
        questions = [q for q in questions if _passes_roundtrip(q, backends, cfg)]
    flags = []
    if not questions:
        return 0.0, [], ["no_recall_questions"]

    def score_one(item: QAItem) -> MafeItem:
        result = answer_question(item.question, hypothesis, backends)
        if result.unanswerable:
            return MafeItem("recall", item.source, item.question, item.gold_answer, "", 0.0, True)
        s = match_answers(item.question, item.gold_answer, result.answer, backends)
        return MafeItem("recall", item.source, item.question, item.gold_answer, result.answer, s, False)

    items = _map_ordered(score_one, questions, cfg.jobs)
    return sum(it.score for it in items) / len(items), items, flags


def mafe_precision(hypothesis: str, reference: str, triples: list[FactualTriple],
                   backends: Backends, cfg: MafeConfig | None = None
                   ) -> tuple[float, list[MafeItem], list[str]]:
    """Mean over hypothesis questions of the best match against answers drawn
    from the reference or from the concatenated linearized triples.

    An empty hypothesis (no questions) scores 0 and is flagged rather than
    treated as vacuously precise.
    """
    cfg = cfg or MafeConfig()
    questions = _precision_questions(hypothesis, backends, cfg)
    if cfg.filter_questions:
        questions = [q for q in questions if _passes_roundtrip(q, backends, cfg)]
    if not questions:
        return 0.0, [], ["empty_hypothesis"]
    context_triples = triples_context(triples)

    def score_one(item: QAItem) -> MafeItem:
        best_score = 0.0
        best_answer = ""
        answered = False
        for context in (reference, context_triples):
            if not context:
                continue
            result = backends.qa(item.question, context)
            if result.unanswerable:
                continue
            answered = True
            s = match_answers(item.question, item.gold_answer, result.answer, backends)
            if s > best_score:
                best_score, best_answer = s, result.answer
            elif not best_answer:
                best_answer = result.answer
        return MafeItem("precision", item.source, item.question, item.gold_answer,
                        best_answer, best_score, not answered)

    items = _map_ordered(score_one, questions, cfg.jobs)
    return sum(it.score for it in items) / len(items), items, []


def mafe_f1(recall: float, precision: float) -> float:
    for name, v in (("recall", recall), ("precision", precision)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} out of range: {v}")
    return harmonic(precision, recall)


def evaluate(hypothesis: str, reference: str, triples: list[FactualTriple],
             backends: Backends, cfg: MafeConfig | None = None) -> MafeReport:
    """Full MAFE evaluation of one hypothesis."""
    cfg = cfg or MafeConfig()
    recall, r_items, r_flags = mafe_recall(hypothesis, reference, triples, backends, cfg)
    precision, p_items, p_flags = mafe_precision(hypothesis, reference, triples, backends, cfg)
    return MafeReport(
        recall=recall,
        precision=precision,
        f1=mafe_f1(recall, precision),
        items=r_items + p_items,
        flags=r_flags + p_flags,
    )
