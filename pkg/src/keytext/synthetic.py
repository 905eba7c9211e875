"""Deterministic synthetic corpora for desk-scale experiments and tests.

Each generator builds instances from per-topic exclusive vocabularies so
lexical signals stay unambiguous: identity instances keep every generated
question answerable by exactly one sentence, the topic corpus is linearly
separable for the dense ranker, and the redundancy corpus floods raw tf-idf
with token spam while keeping the oracle top-k clean.
"""

from __future__ import annotations

import numpy as np

from .corpus import Instance

_LETTERS = "bcdfghjklmnpqrstvwz"


def word(rng: np.random.Generator, length: int = 6) -> str:
    return "".join(_LETTERS[i] for i in rng.integers(0, len(_LETTERS), length))


def make_identity_instance(seed: int = 0, n_triples: int = 2) -> Instance:
    """Instance whose reference is the period-joined linearization of its own
    triples, with per-triple vocabulary kept disjoint so every cloze question
    has a unique best answer."""
    rng = np.random.default_rng(seed)
    entity = f"{word(rng).capitalize()} {word(rng).capitalize()}"
    pairs = []
    sentences = []
    for _ in range(n_triples):
        key = f"{word(rng)} of {word(rng)}"
        value = word(rng).capitalize()
        pairs.append((key, value))
        sentences.append(f"{entity} {key} {value}.")
    reference = " ".join(sentences)
    passages = [reference] + [f"{word(rng)} {word(rng)} {word(rng)}." for _ in range(3)]
    return Instance(entity, "Overview", pairs, [word(rng)], passages, reference)


def make_topic_corpus(n_topics: int = 64, n_passages: int = 12, seed: int = 11
                      ) -> list[Instance]:
    """One instance per topic with an exclusive 8-word vocabulary.

    Passages 0..4 carry graded bigram overlap with the reference (so the
    oracle ranking over them is strict); the rest are drawn from other
    topics' vocabularies.
    """
    rng = np.random.default_rng(seed)
    vocab = [[word(rng) for _ in range(8)] for _ in range(n_topics)]
    instances = []
    for t in range(n_topics):
        ws = vocab[t]
        entity = ws[0].capitalize()
        reference = " ".join(ws) + "."
        passages = []
        for j in range(5):
            kept = ws[: 8 - j]
            filler = [word(rng) for _ in range(j)]
            passages.append(" ".join(kept + filler) + ".")
        while len(passages) < n_passages:
            other = vocab[int(rng.integers(0, n_topics))]
            if other is ws:
                continue
            picks = rng.choice(8, size=4, replace=False)
            passages.append(" ".join(other[i] for i in picks) + ".")
        instances.append(Instance(
            entity=entity,
            title=ws[1],
            factual_keys=[(ws[2], ws[6]), (ws[3], ws[7])],
            topical_keys=[ws[4], ws[5]],
            passages=passages,
            reference=reference,
        ))
    return instances


def make_redundancy_corpus(n_instances: int = 16, n_aspects: int = 10,
                           n_spam: int = 20, n_dups: int = 6, n_offtopic: int = 4,
                           noise_keys: int = 3, spam_reps: int = 7,
                           seed: int = 23) -> list[Instance]:
    """Corpus with deliberate passage redundancy, 40 passages per instance.

    Each reference covers ``n_aspects`` aspect sentences with exclusive
    vocabularies; passages 0..n_aspects-1 restate one aspect each and form
    the oracle top-10 (duplicates tie but lose on index). Two decoy blocks
    follow: token-spam passages that repeat a few query-only noise words
    (raw tf * idf rewards the repetition, cosine and the dense encoder do
    not), and verbatim duplicates of the first aspect passage (the dense
    ranker scores them identically to the original, while the sequential
    ranker's redundancy penalty suppresses them after one pick).
    """
    rng = np.random.default_rng(seed)
    instances = []
    for _ in range(n_instances):
        aspects = [[word(rng) for _ in range(4)] for _ in range(n_aspects)]
        noise = [word(rng) for _ in range(noise_keys)]
        entity = word(rng).capitalize()
        reference = " ".join(" ".join(a) + "." for a in aspects)
        passages = [" ".join(a) + " " + word(rng) + "." for a in aspects]
        for _ in range(n_spam):
            passages.append(" ".join(noise * spam_reps) + ".")
        for _ in range(n_dups):
            passages.append(passages[0])
        for _ in range(n_offtopic):
            passages.append(" ".join(word(rng) for _ in range(5)) + ".")
        instances.append(Instance(
            entity=entity,
            title=aspects[0][0],
            factual_keys=[(a[0], a[1]) for a in aspects[: n_aspects // 2]],
            topical_keys=[a[0] for a in aspects[n_aspects // 2 :]] + noise,
            passages=passages,
            reference=reference,
        ))
    return instances
