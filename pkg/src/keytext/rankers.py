"""Passage rankers and Recall@k evaluation.

Four rankers share the RankedPassages output contract:

* bigram-recall oracle against the reference (also the silver supervision),
* tf-idf scoring of the serialized query against each passage,
* a trainable dense bi-encoder (hashed features, two linear projections into
  a shared 128-d space, in-batch contrastive cross-entropy), and
* a greedy sequential ranker balancing relevance against redundancy, fitted
  on the silver sequences; the neural sequence ranker is reached through the
  generate backend using the serialized request format below.

All ties break toward the lower passage index.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Instance, TokenSeq, tokenize
from .textmetrics import rouge_n

EMBED_DIM = 128


@dataclass(frozen=True)
class Query:
    entity: str
    title: str
    keys: list[str]

    @classmethod
    def from_instance(cls, inst: Instance) -> "Query":
        keys = [k for k, _ in inst.factual_keys] + list(inst.topical_keys)
        return cls(inst.entity, inst.title, keys)

    def serialize(self) -> str:
        return " ".join([self.entity, self.title, *self.keys])


@dataclass(frozen=True)
class RankedPassages:
    order: list[int]
    scores: list[float]
    k: int

    def __post_init__(self):
        if len(self.order) != len(self.scores):
            raise ValueError("order and scores must align")
        if len(set(self.order)) != len(self.order):
            raise ValueError("passage indices must be unique")
        if any(b > a + 1e-12 for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError("scores must be non-increasing")


def _take_top(scores: list[float], k: int) -> RankedPassages:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[: min(k, len(scores))]
    return RankedPassages(order, [float(scores[i]) for i in order], k)


def rank_rouge2_oracle(instance: Instance, k: int) -> RankedPassages:
    """Oracle ranking by bigram recall of each passage against the reference."""
    ref = tokenize(instance.reference)
    scores = [rouge_n(tokenize(p), ref, 2).recall for p in instance.passages]
    return _take_top(scores, k)


def silver_sequence(instance: Instance, k: int) -> list[int]:
    """Supervision signal for sequential rankers: the oracle order."""
    return rank_rouge2_oracle(instance, k).order


def _idf(passages_tokens: list[TokenSeq]) -> dict[str, float]:
    n = len(passages_tokens)
    df = Counter()
    for toks in passages_tokens:
        df.update(set(toks))
    return {t: math.log((n + 1) / (df[t] + 1)) + 1.0 for t in df}


def rank_tfidf(instance: Instance, k: int) -> RankedPassages:
    """Sum of tf * idf over query tokens, idf over the instance's own passages."""
    query_tokens = tokenize(Query.from_instance(instance).serialize())
    passages_tokens = [tokenize(p) for p in instance.passages]
    idf = _idf(passages_tokens)
    scores = []
    for toks in passages_tokens:
        tf = Counter(toks)
        scores.append(sum(tf[t] * idf[t] for t in query_tokens if t in tf))
    return _take_top(scores, k)


# ---------------------------------------------------------------------------
# Dense bi-encoder ranker.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureConfig:
    """Hashed bag features: word n-grams plus character n-grams."""

    hash_dim: int = 2048
    word_orders: tuple[int, ...] = (1,)
    char_orders: tuple[int, ...] = (3,)

    def __post_init__(self):
        if self.hash_dim < 2:
            raise ValueError("hash_dim must be >= 2")


def _bucket(kind: str, gram: str, dim: int) -> int:
    digest = hashlib.blake2b(f"{kind}:{gram}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def featurize(text: str, cfg: FeatureConfig) -> np.ndarray:
    """L2-normalized hashed feature vector of a text."""
    v = np.zeros(cfg.hash_dim, dtype=np.float64)
    tokens = tokenize(text)
    for n in cfg.word_orders:
        for i in range(len(tokens) - n + 1):
            v[_bucket(f"w{n}", " ".join(tokens[i : i + n]), cfg.hash_dim)] += 1.0
    joined = " ".join(tokens)
    for n in cfg.char_orders:
        for i in range(len(joined) - n + 1):
            v[_bucket(f"c{n}", joined[i : i + n], cfg.hash_dim)] += 1.0
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


@dataclass(frozen=True)
class DenseRankerModel:
    query_projection: np.ndarray  # (hash_dim, EMBED_DIM)
    passage_projection: np.ndarray
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        qs, ps = self.query_projection.shape, self.passage_projection.shape
        if qs != (self.feature_config.hash_dim, EMBED_DIM) or ps != qs:
            raise ValueError(f"projection shapes must be ({self.feature_config.hash_dim}, {EMBED_DIM})")

    def encode_query(self, text: str) -> np.ndarray:
        return featurize(text, self.feature_config) @ self.query_projection

    def encode_passage(self, text: str) -> np.ndarray:
        return featurize(text, self.feature_config) @ self.passage_projection


def init_dense_model(cfg: FeatureConfig | None = None, seed: int = 0, scale: float = 0.1) -> DenseRankerModel:
    cfg = cfg or FeatureConfig()
    rng = np.random.default_rng(seed)
    shape = (cfg.hash_dim, EMBED_DIM)
    return DenseRankerModel(
        rng.normal(0.0, scale, shape),
        rng.normal(0.0, scale, shape),
        cfg,
    )


def in_batch_ce_loss(q_vecs: np.ndarray, r_vecs: np.ndarray) -> float:
    """Mean per-pair contrastive cross-entropy with in-batch negatives.

    Row i of the score matrix q_i . r_j is a softmax over the batch; the loss
    is -log of the diagonal probability, averaged over pairs.
    """
    scores = np.asarray(q_vecs) @ np.asarray(r_vecs).T
    m = scores.max(axis=1, keepdims=True)
    lse = m.squeeze(1) + np.log(np.exp(scores - m).sum(axis=1))
    return float(np.mean(lse - np.diag(scores)))


def _loss_and_grads(wq, wr, x, y):
    q = x @ wq
    r = y @ wr
    scores = q @ r.T
    m = scores.max(axis=1, keepdims=True)
    exp = np.exp(scores - m)
    probs = exp / exp.sum(axis=1, keepdims=True)
    b = scores.shape[0]
    loss = float(np.mean(m.squeeze(1) + np.log(exp.sum(axis=1)) - np.diag(scores)))
    g = (probs - np.eye(b)) / b
    grad_wq = x.T @ (g @ r)
    grad_wr = y.T @ (g.T @ q)
    return loss, grad_wq, grad_wr


def dense_train(pairs: list[tuple[Query, str]], batch_size: int = 32, lr: float = 0.5,
                epochs: int = 10, cfg: FeatureConfig | None = None, seed: int = 0,
                init: DenseRankerModel | None = None) -> tuple[DenseRankerModel, list[float]]:
    """Contrastive training of the two projection matrices by plain SGD.

    Returns the trained model and the per-epoch mean per-pair loss trace.
    """
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2 (a batch needs in-batch negatives)")
    if len(pairs) < 2:
        raise ValueError("need at least 2 training pairs")
    model = init or init_dense_model(cfg, seed=seed)
    cfg = model.feature_config
    x = np.stack([featurize(q.serialize(), cfg) for q, _ in pairs])
    y = np.stack([featurize(ref, cfg) for _, ref in pairs])
    wq = model.query_projection.copy()
    wr = model.passage_projection.copy()
    rng = np.random.default_rng(seed)
    trace = []
    for epoch in range(epochs):
        perm = rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(perm), batch_size):
            idx = perm[start : start + batch_size]
            if len(idx) < 2:
                continue  # a trailing singleton has no negatives
            loss, gq, gr = _loss_and_grads(wq, wr, x[idx], y[idx])
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}: {loss}"
                )
            wq -= lr * gq
            wr -= lr * gr
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return DenseRankerModel(wq, wr, cfg), trace


def dense_rank(model: DenseRankerModel, instance: Instance, k: int) -> RankedPassages:
    q = model.encode_query(Query.from_instance(instance).serialize())
    scores = [float(model.encode_passage(p) @ q) for p in instance.passages]
    return _take_top(scores, k)


# ---------------------------------------------------------------------------
# Sequential (relevance vs redundancy) ranker.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeqRankerModel:
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")


def _tfidf_vectors(instance: Instance) -> tuple[dict[str, float], list[dict[str, float]]]:
    passages_tokens = [tokenize(p) for p in instance.passages]
    idf = _idf(passages_tokens)
    query_tokens = tokenize(Query.from_instance(instance).serialize())

    def vec(tokens: TokenSeq) -> dict[str, float]:
        tf = Counter(tokens)
        return {t: c * idf.get(t, 1.0) for t, c in tf.items()}

    return vec(query_tokens), [vec(toks) for toks in passages_tokens]


def _cos(a: dict[str, float], b: dict[str, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    dot = sum(v * b[t] for t, v in a.items() if t in b)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb) if na > 0 and nb > 0 else 0.0


def seq_rank(model: SeqRankerModel, instance: Instance, k: int) -> RankedPassages:
    """Greedy sequential selection: relevance minus worst-case redundancy
    against already-selected passages, both as tf-idf cosines."""
    qv, pvs = _tfidf_vectors(instance)
    n = len(pvs)
    rel = [_cos(qv, pv) for pv in pvs]
    selected: list[int] = []
    scores: list[float] = []
    remaining = list(range(n))
    while remaining and len(selected) < min(k, n):
        best_i = None
        best_score = None
        for i in remaining:
            redundancy = max((_cos(pvs[i], pvs[s]) for s in selected), default=0.0)
            score = model.alpha * rel[i] - model.beta * redundancy
            if best_score is None or score > best_score + 1e-12:
                best_i, best_score = i, score
        selected.append(best_i)
        scores.append(float(best_score))
        remaining.remove(best_i)
    return RankedPassages(selected, scores, k)


def recall_at_k(predicted: RankedPassages, oracle: RankedPassages, k: int) -> float:
    """Fraction of the oracle's top-k indices recovered in the predicted top-k."""
    top_p = set(predicted.order[:k])
    top_o = set(oracle.order[:k])
    denom = min(k, len(oracle.order))
    if denom == 0:
        return 0.0
    return len(top_p & top_o) / denom


def seq_fit(train: list[Instance], k: int, grid: list[tuple[float, float]]) -> SeqRankerModel:
    """Grid search (alpha, beta) maximizing mean Recall@k against the silver
    sequences; the first maximizer in grid order wins."""
    if not train:
        raise ValueError("training set must be non-empty")
    if not grid:
        raise ValueError("parameter grid must be non-empty")
    oracles = [rank_rouge2_oracle(inst, k) for inst in train]
    best_model = None
    best_score = -1.0
    for alpha, beta in grid:
        model = SeqRankerModel(alpha, beta)
        score = float(np.mean([
            recall_at_k(seq_rank(model, inst, k), oracle, k)
            for inst, oracle in zip(train, oracles)
        ]))
        if score > best_score + 1e-12:
            best_model, best_score = model, score
    return best_model


# ---------------------------------------------------------------------------
# Neural sequence ranker via the generate backend.
# ---------------------------------------------------------------------------


def serialize_ranker_input(instance: Instance, index: int) -> str:
    """Request text for one passage of the neural index-sequence ranker."""
    fkeys = " ".join(k for k, _ in instance.factual_keys)
    tkeys = " ".join(instance.topical_keys)
    return (
        f"question: [Entity] {instance.entity} [Title] {instance.title} "
        f"[Keys] {fkeys} + {tkeys} index: {index} context: {instance.passages[index]}"
    )


_RANKER_INPUT_RE = re.compile(
    r"^question: \[Entity\] (.*?) \[Title\] (.*?) \[Keys\] (.*?) \+ (.*?) "
    r"index: (\d+) context: (.*)$",
    re.DOTALL,
)


def parse_ranker_input(text: str) -> dict:
    m = _RANKER_INPUT_RE.match(text)
    if not m:
        raise ValueError("not a ranker request string")
    return {
        "entity": m.group(1),
        "title": m.group(2),
        "factual_keys": m.group(3).split(),
        "topical_keys": m.group(4).split(),
        "index": int(m.group(5)),
        "passage": m.group(6),
    }


def parse_index_sequence(text: str, n_passages: int, k: int) -> list[int]:
    """Recover a top-k index list from backend output.

    The backend contract is a whitespace-separated index sequence, but the
    parser is defensive: integers are extracted in order, deduplicated,
    out-of-range values dropped, and missing slots filled by ascending index.
    """
    seen: set[int] = set()
    order: list[int] = []
    for tok in re.findall(r"\d+", text):
        i = int(tok)
        if 0 <= i < n_passages and i not in seen:
            seen.add(i)
            order.append(i)
        if len(order) >= min(k, n_passages):
            return order
    for i in range(n_passages):
        if len(order) >= min(k, n_passages):
            break
        if i not in seen:
            seen.add(i)
            order.append(i)
    return order


def neural_rank(instance: Instance, k: int, backends, max_tokens: int | None = None) -> RankedPassages:
    """Rank through the generate backend using the serialized request format.

    All per-passage request strings go out in one call; the returned text is
    parsed as an index sequence.
    """
    requests_text = [serialize_ranker_input(instance, i) for i in range(len(instance.passages))]
    if max_tokens is None:
        max_tokens = max(64, 4 * len(instance.passages))
    text = backends.generate(requests_text, max_tokens)
    order = parse_index_sequence(text, len(instance.passages), k)
    scores = [1.0 / (pos + 1) for pos in range(len(order))]
    return RankedPassages(order, scores, k)


# ---------------------------------------------------------------------------
# Model persistence.
# ---------------------------------------------------------------------------


def save_dense_model(model: DenseRankerModel, path) -> None:
    cfg = model.feature_config
    np.savez(
        path,
        query_projection=model.query_projection,
        passage_projection=model.passage_projection,
        hash_dim=cfg.hash_dim,
        word_orders=np.asarray(cfg.word_orders),
        char_orders=np.asarray(cfg.char_orders),
    )


def load_dense_model(path) -> DenseRankerModel:
    data = np.load(path)
    cfg = FeatureConfig(
        hash_dim=int(data["hash_dim"]),
        word_orders=tuple(int(x) for x in data["word_orders"]),
        char_orders=tuple(int(x) for x in data["char_orders"]),
    )
    return DenseRankerModel(data["query_projection"], data["passage_projection"], cfg)


def save_seq_model(model: SeqRankerModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"alpha": model.alpha, "beta": model.beta}, fh)


def load_seq_model(path) -> SeqRankerModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return SeqRankerModel(float(obj["alpha"]), float(obj["beta"]))
