"""Deterministic surface metrics: ROUGE-n, ROUGE-L, BLEU, token-level F1,
BERTScore over caller-supplied vectors, and a table-aware PARENT-style metric.

All functions are pure and operate on the shared tokenization contract from
:mod:`keytext.corpus`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import FactualTriple, TokenSeq, linearize_triple, tokenize


def harmonic(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class MetricScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "MetricScore":
        for name, v in (("precision", precision), ("recall", recall)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of range: {v}")
        return cls(precision, recall, harmonic(precision, recall))


def ngram_counts(tokens: TokenSeq, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> MetricScore:
    """Clipped n-gram overlap; precision over candidate n-grams, recall over
    reference n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    overlap = sum((cand & ref).values())
    p = overlap / sum(cand.values()) if cand else 0.0
    r = overlap / sum(ref.values()) if ref else 0.0
    return MetricScore.from_pr(p, r)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> MetricScore:
    lcs = lcs_length(candidate, reference)
    p = lcs / len(candidate) if candidate else 0.0
    r = lcs / len(reference) if reference else 0.0
    return MetricScore.from_pr(p, r)


def bleu(candidates: list[TokenSeq], references: list[TokenSeq], max_n: int = 4,
         smooth: bool = False) -> float:
    """Corpus-level BLEU with a single reference per candidate.

    Unsmoothed by default: any modified precision of zero makes the score
    zero. ``smooth=True`` applies add-one smoothing to every order, for desk
    experiments on tiny corpora.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    if not candidates:
        return 0.0
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        matched = 0
        total = 0
        for cand, ref in zip(candidates, references):
            cc = ngram_counts(cand, n)
            rc = ngram_counts(ref, n)
            matched += sum((cc & rc).values())
            total += sum(cc.values())
        if smooth:
            matched += 1
            total += 1
        if matched == 0 or total == 0:
            return 0.0
        log_sum += math.log(matched / total)
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(log_sum / max_n)


def token_f1(gold: str, predicted: str) -> float:
    """Multiset token overlap F1 between two raw strings."""
    g = Counter(tokenize(gold))
    p = Counter(tokenize(predicted))
    if not g and not p:
        return 1.0
    if not g or not p:
        return 0.0
    overlap = sum((g & p).values())
    return harmonic(overlap / sum(p.values()), overlap / sum(g.values()))


def _cosine_matrix(cand: np.ndarray, ref: np.ndarray) -> np.ndarray:
    cn = np.linalg.norm(cand, axis=1, keepdims=True)
    rn = np.linalg.norm(ref, axis=1, keepdims=True)
    # Zero-norm vectors contribute zero similarity instead of NaN.
    cand = np.divide(cand, cn, out=np.zeros_like(cand, dtype=float), where=cn > 0)
    ref = np.divide(ref, rn, out=np.zeros_like(ref, dtype=float), where=rn > 0)
    return cand @ ref.T


def bertscore_from_vectors(cand_vecs, ref_vecs) -> MetricScore:
    """Greedy-matching BERTScore over pre-computed token vectors.

    Precision is the mean over candidate tokens of the best cosine similarity
    to any reference token; recall is symmetric. No importance weighting.
    """
    cand = np.asarray(cand_vecs, dtype=float)
    ref = np.asarray(ref_vecs, dtype=float)
    if cand.ndim != 2 or ref.ndim != 2 or cand.shape[0] == 0 or ref.shape[0] == 0:
        raise ValueError("each side needs at least one vector")
    if cand.shape[1] != ref.shape[1]:
        raise ValueError(f"vector dims differ: {cand.shape[1]} vs {ref.shape[1]}")
    sims = _cosine_matrix(cand, ref)
    p = float(np.clip(sims.max(axis=1), 0.0, 1.0).mean())
    r = float(np.clip(sims.max(axis=0), 0.0, 1.0).mean())
    return MetricScore.from_pr(min(p, 1.0), min(r, 1.0))


def _geomean(values: list[float]) -> float:
    if not values:
        return 0.0
    if any(v <= 0.0 for v in values):
        return 0.0
    return math.exp(sum(math.log(v) for v in values) / len(values))


def parent(candidate: TokenSeq, reference: TokenSeq, triples: list[FactualTriple],
           lam: float = 0.5, max_n: int = 2,
           entailment_fn: Callable[[tuple[str, ...]], float] | None = None) -> MetricScore:
    """PARENT-style metric rewarding overlap with both the reference and the
    linearized triple table.

    The default entailment model is word overlap: the probability that an
    n-gram is supported by the table is the fraction of its tokens occurring
    in the union of linearized-triple tokens. A co-occurrence model can be
    supplied via ``entailment_fn``.

    Precision per order credits each candidate n-gram with
    max(clipped reference match, entailment probability) and takes the
    geometric mean across orders. Recall is R_ref^lam * R_table^(1-lam):
    R_ref is the entailment-weighted reference n-gram recall (geometric mean
    across orders; orders whose weighted mass is zero fall back to unweighted
    recall, so with an empty table the metric reduces to pure reference
    PARENT); R_table is the fraction of triple-value token sequences whose
    LCS ratio with the candidate is at least 0.5, vacuously 1 with no triples.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    table_tokens: set[str] = set()
    value_seqs: list[TokenSeq] = []
    for t in triples:
        table_tokens.update(tokenize(linearize_triple(t)))
        value_seqs.append(tokenize(t.value))

    if entailment_fn is None:
        def entailment_fn(gram: tuple[str, ...]) -> float:
            return sum(tok in table_tokens for tok in gram) / len(gram)

    precisions = []
    recalls = []
    for n in range(1, max_n + 1):
        cand_counts = ngram_counts(candidate, n)
        ref_counts = ngram_counts(reference, n)
        if cand_counts:
            total = sum(cand_counts.values())
            num = sum(
                c * max(min(1.0, ref_counts.get(g, 0) / c), entailment_fn(g))
                for g, c in cand_counts.items()
            )
            precisions.append(num / total)
        if ref_counts:
            weights = {g: entailment_fn(g) for g in ref_counts}
            denom = sum(c * weights[g] for g, c in ref_counts.items())
            if denom > 0:
                num = sum(
                    min(c, cand_counts.get(g, 0)) * weights[g]
                    for g, c in ref_counts.items()
                )
            else:
                denom = sum(ref_counts.values())
                num = sum(min(c, cand_counts.get(g, 0)) for g, c in ref_counts.items())
            recalls.append(num / denom)

    precision = _geomean(precisions)
    r_ref = _geomean(recalls)
    if value_seqs:
        hits = sum(
            1 for seq in value_seqs
            if seq and lcs_length(seq, candidate) / len(seq) >= 0.5
        )
        r_table = hits / len(value_seqs)
    else:
        r_table = 1.0
    recall = (r_ref ** lam) * (r_table ** (1.0 - lam))
    return MetricScore.from_pr(precision, recall)
