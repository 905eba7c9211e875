import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keytext.backends import Backends
from keytext.corpus import Instance
from keytext.rankers import (
    FeatureConfig,
    Query,
    RankedPassages,
    SeqRankerModel,
    dense_rank,
    dense_train,
    featurize,
    in_batch_ce_loss,
    init_dense_model,
    load_dense_model,
    load_seq_model,
    neural_rank,
    parse_index_sequence,
    parse_ranker_input,
    rank_rouge2_oracle,
    rank_tfidf,
    recall_at_k,
    save_dense_model,
    save_seq_model,
    seq_fit,
    seq_rank,
    serialize_ranker_input,
    silver_sequence,
)
from keytext.rankers import _loss_and_grads


def make_instance(passages, reference="a b c d", keys=(("k", "v"),)):
    return Instance("Ent", "Title", list(keys), [], passages, reference)


class TestQuery:
    def test_serialization(self):
        q = Query("E name", "T", ["k1", "k2"])
        assert q.serialize() == "E name T k1 k2"

    def test_from_instance_orders_factual_then_topical(self):
        inst = Instance("E", "T", [("f1", "v"), ("f2", "v")], ["t1"], ["p"], "r")
        assert Query.from_instance(inst).keys == ["f1", "f2", "t1"]


class TestRankedPassages:
    def test_rejects_duplicate_indices(self):
        with pytest.raises(ValueError):
            RankedPassages([0, 0], [1.0, 0.5], 2)

    def test_rejects_increasing_scores(self):
        with pytest.raises(ValueError):
            RankedPassages([0, 1], [0.5, 1.0], 2)

    def test_rejects_misaligned(self):
        with pytest.raises(ValueError):
            RankedPassages([0], [1.0, 0.5], 2)


class TestRouge2Oracle:
    def test_reference_copy_ranks_first(self):
        inst = make_instance(["x y z", "a b c d"], reference="a b c d")
        ranked = rank_rouge2_oracle(inst, 2)
        assert ranked.order[0] == 1
        assert ranked.scores[0] == pytest.approx(1.0)

    def test_two_passages(self):
        inst = make_instance(["a b c", "x y"], reference="a b c")
        ranked = rank_rouge2_oracle(inst, 2)
        assert ranked.order == [0, 1]
        assert ranked.scores == [1.0, 0.0]

    def test_graded_fractions(self):
        # reference bigrams: ab bc cd (3); overlaps 2/3, 1/3, 0.
        inst = make_instance(["a b c x", "c d q", "q r s"], reference="a b c d")
        ranked = rank_rouge2_oracle(inst, 3)
        assert ranked.order == [0, 1, 2]
        assert ranked.scores == pytest.approx([2 / 3, 1 / 3, 0.0])

    def test_silver_sequence_matches(self):
        inst = make_instance(["a b c x", "c d q", "q r s"], reference="a b c d")
        assert silver_sequence(inst, 3) == rank_rouge2_oracle(inst, 3).order


class TestTfidf:
    def test_unique_term_wins(self):
        inst = Instance("zkey", "T", [], [], ["zkey here once", "nothing relevant"], "r")
        assert rank_tfidf(inst, 2).order[0] == 0

    def test_absent_terms_tie_to_index_order(self):
        inst = Instance("qq", "ww", [], [], ["aa bb", "cc dd"], "r")
        ranked = rank_tfidf(inst, 2)
        assert ranked.order == [0, 1]
        assert ranked.scores == [0.0, 0.0]

    def test_term_frequency_ratio(self):
        # term in both passages (df=2, N=2): idf = ln(3/3) + 1 = 1; tf 2 vs 1.
        inst = Instance("term", "", [], [], ["term term", "term other"], "r")
        ranked = rank_tfidf(inst, 2)
        assert ranked.scores[0] == pytest.approx(2.0)
        assert ranked.scores[1] == pytest.approx(1.0)


class TestDenseLoss:
    def test_orthonormal_batch_fixture(self):
        q = np.eye(4, 8)
        expected = -math.log(math.e / (math.e + 3))
        assert in_batch_ce_loss(q, q) == pytest.approx(expected, abs=1e-6)

    def test_batch_size_one_rejected(self):
        with pytest.raises(ValueError):
            dense_train([(Query("a", "b", []), "x")] * 4, batch_size=1)

    def test_too_few_pairs_rejected(self):
        with pytest.raises(ValueError):
            dense_train([(Query("a", "b", []), "x")], batch_size=2)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for trial in range(20):
            h, d, b = 10, 4, 3
            x = rng.normal(size=(b, h))
            y = rng.normal(size=(b, h))
            wq = rng.normal(size=(h, d)) * 0.3
            wr = rng.normal(size=(h, d)) * 0.3
            _, gq, gr = _loss_and_grads(wq, wr, x, y)
            eps = 1e-6
            for w, g, side in ((wq, gq, "q"), (wr, gr, "r")):
                i, j = rng.integers(h), rng.integers(d)
                plus, minus = w.copy(), w.copy()
                plus[i, j] += eps
                minus[i, j] -= eps
                if side == "q":
                    lp = _loss_and_grads(plus, wr, x, y)[0]
                    lm = _loss_and_grads(minus, wr, x, y)[0]
                else:
                    lp = _loss_and_grads(wq, plus, x, y)[0]
                    lm = _loss_and_grads(wq, minus, x, y)[0]
                fd = (lp - lm) / (2 * eps)
                worst = max(worst, abs(fd - g[i, j]) / max(abs(fd), 1e-8))
        assert worst < 1e-4

    def test_non_finite_loss_aborts(self):
        pairs = [(Query(f"e{i}", "t", []), f"ref {i}") for i in range(4)]
        big = init_dense_model(FeatureConfig(hash_dim=64), seed=0, scale=1e200)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(RuntimeError, match="non-finite"):
                dense_train(pairs, batch_size=2, lr=0.1, epochs=1, init=big)


class TestDenseRank:
    def test_zero_projections_give_index_order(self):
        cfg = FeatureConfig(hash_dim=64)
        model = init_dense_model(cfg, seed=0, scale=0.0)
        inst = make_instance(["p one", "p two", "p three"])
        ranked = dense_rank(model, inst, 3)
        assert ranked.order == [0, 1, 2]

    def test_matching_encoding_ranks_first(self, topic_corpus):
        pairs = [(Query.from_instance(i), i.reference) for i in topic_corpus]
        model, _ = dense_train(pairs, batch_size=16, lr=1.0, epochs=10,
                               cfg=FeatureConfig(hash_dim=2048), seed=0)
        inst = topic_corpus[0]
        # passage 0 restates the reference; it should rank on top.
        assert dense_rank(model, inst, 3).order[0] == 0

    def test_loss_strictly_decreases_first_epoch(self, topic_corpus):
        pairs = [(Query.from_instance(i), i.reference) for i in topic_corpus]
        _, trace = dense_train(pairs, batch_size=16, lr=1.0, epochs=3,
                               cfg=FeatureConfig(hash_dim=2048), seed=1)
        assert trace[1] < trace[0]

    def test_save_load_round_trip(self, tmp_path):
        model = init_dense_model(FeatureConfig(hash_dim=128), seed=3)
        path = tmp_path / "dense.npz"
        save_dense_model(model, path)
        again = load_dense_model(path)
        assert np.array_equal(model.query_projection, again.query_projection)
        assert again.feature_config == model.feature_config


class TestSeqRank:
    def test_beta_zero_is_relevance_sort(self):
        from keytext.rankers import _cos, _tfidf_vectors

        inst = Instance("aa", "bb", [], [], ["aa bb xx", "aa yy", "zz ww"], "r")
        qv, pvs = _tfidf_vectors(inst)
        relevance = [_cos(qv, pv) for pv in pvs]
        expected = sorted(range(3), key=lambda i: (-relevance[i], i))
        ranked = seq_rank(SeqRankerModel(1.0, 0.0), inst, 3)
        assert ranked.order == expected
        # The independent-ranking argmax agrees with the greedy first pick.
        assert ranked.order[0] == max(range(3), key=lambda i: (relevance[i], -i))

    def test_duplicate_suppressed_with_large_beta(self):
        # Passage 1 duplicates passage 0; with a large beta the second pick
        # must be the best non-duplicate.
        inst = Instance("aa bb", "", [], [], ["aa bb cc", "aa bb cc", "aa dd"], "r")
        ranked = seq_rank(SeqRankerModel(1.0, 5.0), inst, 2)
        assert ranked.order == [0, 2]

    def test_k_one_is_argmax(self):
        inst = Instance("aa", "", [], [], ["zz", "aa aa", "aa"], "r")
        ranked = seq_rank(SeqRankerModel(1.0, 0.7), inst, 1)
        assert len(ranked.order) == 1

    def test_negative_params_rejected(self):
        with pytest.raises(ValueError):
            SeqRankerModel(-1.0, 0.0)


class TestSeqFit:
    def test_single_grid_point(self, redundancy_corpus):
        model = seq_fit(redundancy_corpus[:2], 5, [(2.0, 0.125)])
        assert (model.alpha, model.beta) == (2.0, 0.125)

    def test_empty_grid_rejected(self, redundancy_corpus):
        with pytest.raises(ValueError):
            seq_fit(redundancy_corpus[:2], 5, [])

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            seq_fit([], 5, [(1.0, 0.0)])

    def test_redundancy_never_helps_selects_beta_zero(self):
        # Duplicates of the best passage share its oracle score, so the
        # oracle keeps them; suppressing them can only hurt.
        insts = []
        for tag in ("aa", "bb", "cc"):
            passages = [f"{tag} top pick one", f"{tag} top pick one", f"{tag} other thing"]
            insts.append(Instance(tag, "", [], [], passages, f"{tag} top pick one"))
        model = seq_fit(insts, 2, [(1.0, 0.0), (1.0, 0.5)])
        assert model.beta == 0.0


class TestRecallAtK:
    def test_identical(self):
        r = RankedPassages([0, 1, 2], [3.0, 2.0, 1.0], 3)
        assert recall_at_k(r, r, 3) == 1.0

    def test_disjoint(self):
        a = RankedPassages([0, 1], [2.0, 1.0], 2)
        b = RankedPassages([2, 3], [2.0, 1.0], 2)
        assert recall_at_k(a, b, 2) == 0.0

    def test_k_beyond_n_uses_min(self):
        a = RankedPassages([0, 1], [2.0, 1.0], 10)
        b = RankedPassages([1, 0], [2.0, 1.0], 10)
        assert recall_at_k(a, b, 10) == 1.0

    def test_oracle_self_recall(self, redundancy_corpus):
        for k in (1, 5, 10):
            oracle = rank_rouge2_oracle(redundancy_corpus[0], k)
            assert recall_at_k(oracle, oracle, k) == 1.0


passage_lists = st.lists(
    st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6).map(" ".join),
    min_size=1, max_size=6,
)


class TestRankerInvariants:
    @given(passage_lists, st.integers(1, 8))
    @settings(max_examples=40, deadline=None)
    def test_unique_indices_and_sorted_scores(self, passages, k):
        inst = Instance("a c", "e", [("b", "x")], ["d"], passages, "a b c d e")
        for ranked in (
            rank_rouge2_oracle(inst, k),
            rank_tfidf(inst, k),
            seq_rank(SeqRankerModel(1.0, 0.3), inst, k),
        ):
            assert len(ranked.order) == min(k, len(passages))
            assert len(set(ranked.order)) == len(ranked.order)
            assert all(0 <= i < len(passages) for i in ranked.order)
            assert all(a >= b - 1e-12 for a, b in zip(ranked.scores, ranked.scores[1:]))


class TestNeuralRank:
    def test_serialization_format(self):
        inst = Instance("E nt", "T tl", [("k1", "v1"), ("k2", "v2")], ["t1"],
                        ["first passage", "second passage"], "ref")
        text = serialize_ranker_input(inst, 1)
        assert text == (
            "question: [Entity] E nt [Title] T tl [Keys] k1 k2 + t1 "
            "index: 1 context: second passage"
        )
        parsed = parse_ranker_input(text)
        assert parsed["entity"] == "E nt"
        assert parsed["index"] == 1
        assert parsed["passage"] == "second passage"

    def test_empty_keys_round_trip(self):
        inst = Instance("E", "T", [], [], ["p0"], "ref")
        parsed = parse_ranker_input(serialize_ranker_input(inst, 0))
        assert parsed["factual_keys"] == []
        assert parsed["topical_keys"] == []

    def test_parse_index_sequence_dedup_and_fill(self):
        assert parse_index_sequence("2 2 0 9", 4, 4) == [2, 0, 1, 3]

    def test_neural_rank_via_echo_mock(self):
        inst = Instance("E", "T", [("k", "v")], [], ["pa", "pb", "pc"], "ref")
        ranked = neural_rank(inst, 2, Backends.mock())
        assert len(ranked.order) == 2
        assert len(set(ranked.order)) == 2

    def test_seq_model_save_load(self, tmp_path):
        save_seq_model(SeqRankerModel(1.5, 0.25), tmp_path / "m.json")
        model = load_seq_model(tmp_path / "m.json")
        assert (model.alpha, model.beta) == (1.5, 0.25)
