import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keytext.backends import mock_embed
from keytext.corpus import Instance
from keytext.databuilder import (
    AlignmentScore,
    BuildConfig,
    RawSectionRecord,
    build,
    derive_topical_keys,
    filter_entity,
    keep_pair,
    read_raw_records,
    score_kv_alignment,
    select_factual_keys,
    stats,
)


def record(section="The plant grows tall in summer.", pairs=(), hyperlinks=(),
           passages=("Some passage text.",), entity="Ent"):
    return RawSectionRecord(
        entity=entity,
        article_title="Article",
        section_title="Section",
        section_text=section,
        infobox_pairs=list(pairs),
        hyperlink_instanceof=list(hyperlinks),
        passages=list(passages),
    )


class TestScoreAlignment:
    def test_verbatim_pair_scores_one(self):
        rec = record(section="The height value reached nine metres that year.")
        score = score_kv_alignment(("height", "nine metres"), rec.section_text, mock_embed)
        assert score.bertscore_precision == pytest.approx(1.0)

    def test_disjoint_pair_rouge_zero(self):
        score = score_kv_alignment(("alpha", "bravo"), "completely different words here", mock_embed)
        assert score.rougeL_precision == 0.0

    def test_hand_lcs_third(self):
        # candidate tokens [birth, date, 1961]; only "1961" appears.
        score = score_kv_alignment(("birth", "date 1961"), "He was born in 1961.", mock_embed)
        assert score.rougeL_precision == pytest.approx(1 / 3)

    def test_requires_embedder(self):
        with pytest.raises(RuntimeError):
            score_kv_alignment(("k", "v"), "text", None)

    def test_empty_pair_rejected(self):
        with pytest.raises(ValueError):
            score_kv_alignment((" ", "v"), "text", mock_embed)


class TestThresholds:
    CFG = BuildConfig()

    def test_kept_fixture(self):
        assert keep_pair(AlignmentScore(0.90, 0.30), self.CFG)

    def test_dropped_low_rouge(self):
        assert not keep_pair(AlignmentScore(0.90, 0.10), self.CFG)

    def test_boundary_is_strict(self):
        assert not keep_pair(AlignmentScore(0.82, 0.25), self.CFG)

    def test_both_conditions_required(self):
        assert not keep_pair(AlignmentScore(0.70, 0.90), self.CFG)

    @given(
        st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), max_size=30),
        st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.2), st.floats(0, 0.2),
    )
    @settings(max_examples=100)
    def test_threshold_monotonicity(self, scores, b0, r0, db, dr):
        lo = BuildConfig(bert_threshold=b0, rougeL_threshold=r0)
        hi = BuildConfig(bert_threshold=min(1.0, b0 + db), rougeL_threshold=min(1.0, r0 + dr))
        kept_lo = {i for i, (b, r) in enumerate(scores) if keep_pair(AlignmentScore(b, r), lo)}
        kept_hi = {i for i, (b, r) in enumerate(scores) if keep_pair(AlignmentScore(b, r), hi)}
        assert kept_hi <= kept_lo


class TestSelectFactualKeys:
    def test_verbatim_selected_absent_dropped(self):
        rec = record(
            section="The tower height reached nine metres during spring renovations nearby.",
            pairs=[("height", "nine metres"), ("architect", "Unmentioned Person")],
        )
        selected = select_factual_keys(rec, mock_embed)
        assert ("height", "nine metres") in selected
        assert ("architect", "Unmentioned Person") not in selected

    def test_randomized_monotonicity_over_records(self):
        rng = np.random.default_rng(99)
        vocab = [f"w{i}" for i in range(40)]
        lo = BuildConfig(bert_threshold=0.4, rougeL_threshold=0.1)
        hi = BuildConfig(bert_threshold=0.7, rougeL_threshold=0.3)
        for _ in range(200):
            words = rng.choice(vocab, size=8, replace=False)
            section = " ".join(words) + "."
            pair = (str(rng.choice(vocab)), " ".join(rng.choice(vocab, size=2)))
            rec = record(section=section, pairs=[pair])
            kept_lo = select_factual_keys(rec, mock_embed, lo)
            kept_hi = select_factual_keys(rec, mock_embed, hi)
            assert set(kept_hi) <= set(kept_lo)


class TestTopicalKeys:
    def test_hyperlink_value_becomes_key(self):
        rec = record(
            section="She was born at Kapiolani Medical Center in Honolulu.",
            hyperlinks=[("Kapiolani Medical Center", "Hospital")],
        )
        assert derive_topical_keys(rec) == ["hospital"]

    def test_no_hyperlinks(self):
        assert derive_topical_keys(record()) == []

    def test_duplicates_folded(self):
        rec = record(
            section="Between Springfield and Shelbyville lies a river.",
            hyperlinks=[("Springfield", "city"), ("Shelbyville", "City")],
        )
        assert derive_topical_keys(rec) == ["city"]

    def test_anchor_not_in_section_ignored(self):
        rec = record(hyperlinks=[("Nowhere Anchor", "village")])
        assert derive_topical_keys(rec) == []

    def test_order_of_first_appearance(self):
        rec = record(
            section="The lake borders the forest near the lake shore.",
            hyperlinks=[("forest", "woodland"), ("lake", "body of water")],
        )
        assert derive_topical_keys(rec) == ["body of water", "woodland"]


class TestFilterEntity:
    def test_grounded_entity_kept(self):
        rec = record(
            section="The tower height reached nine metres in total.",
            pairs=[("height", "nine metres")],
            passages=["Reports say the height is nine metres exactly."],
        )
        assert filter_entity([rec], mock_embed) is True

    def test_ungrounded_entity_dropped(self):
        rec = record(
            section="The tower height reached nine metres in total.",
            pairs=[("height", "nine metres")],
            passages=["Entirely unrelated passage about cooking pasta."],
        )
        assert filter_entity([rec], mock_embed) is False

    def test_half_grounded_dropped(self):
        rec = record(
            section="The tower height reached nine metres and the roof color was deep crimson.",
            pairs=[("height", "nine metres"), ("color", "deep crimson")],
            passages=["Reports say the height is nine metres exactly."],
        )
        # height pair fully grounded (1.0), color pair absent (0.0): mean 0.5.
        assert filter_entity([rec], mock_embed) is False

    def test_no_selected_pairs_kept_with_warning(self, caplog):
        rec = record(pairs=[])
        with caplog.at_level("WARNING"):
            assert filter_entity([rec], mock_embed) is True
        assert "no selected key-value pairs" in caplog.text


class TestBuildAndStats:
    def test_build_produces_valid_instances(self):
        rec1 = record(
            entity="Tower",
            section="The tower height reached nine metres in total at the site.",
            pairs=[("height", "nine metres")],
            hyperlinks=[("site", "location")],
            passages=["The height is nine metres they say.", "Another passage here."],
        )
        rec2 = record(
            entity="Dropped",
            section="The bridge span crossed forty metres over water.",
            pairs=[("span", "forty metres")],
            passages=["Nothing related at all appears in this text."],
        )
        instances = build([rec1, rec2], mock_embed)
        assert [i.entity for i in instances] == ["Tower"]
        inst = instances[0]
        assert inst.factual_keys == [("height", "nine metres")]
        assert inst.topical_keys == ["location"]
        assert inst.reference == rec1.section_text

    def test_build_deterministic(self):
        rec = record(
            entity="Tower",
            section="The tower height reached nine metres in total.",
            pairs=[("height", "nine metres")],
            passages=["The height is nine metres they say."],
        )
        a = build([rec], mock_embed)
        b = build([rec], mock_embed)
        assert a == b

    def test_stats_empty(self):
        summary = stats([])
        assert summary["instances"] == 0
        assert summary["avg_output_len"] == 0.0

    def test_stats_counts(self):
        inst = Instance("E", "T", [("a", "1"), ("b", "2"), ("c", "3")], ["x", "y"],
                        ["one two three", "four five"], "ref text here")
        summary = stats([inst])
        assert summary["instances"] == 1
        assert summary["avg_factual_keys"] == 3
        assert summary["avg_topical_keys"] == 2
        assert summary["avg_output_len"] == 3
        assert summary["avg_passage_len"] == pytest.approx(2.5)


class TestRawRecordIO:
    def test_round_trip(self, tmp_path):
        import json

        obj = {
            "entity": "E", "article_title": "A", "section_title": "S",
            "section_text": "Some text.", "infobox_pairs": [{"key": "k", "value": "v"}],
            "hyperlink_instanceof": [{"anchor": "a", "value": "city"}],
            "passages": ["p1", "p2"],
        }
        path = tmp_path / "raw.jsonl"
        path.write_text(json.dumps(obj) + "\n")
        records = read_raw_records(path)
        assert records[0].entity == "E"
        assert records[0].infobox_pairs == [("k", "v")]

    def test_missing_field(self, tmp_path):
        path = tmp_path / "raw.jsonl"
        path.write_text('{"entity": "E"}\n')
        with pytest.raises(Exception) as err:
            read_raw_records(path)
        assert "article_title" in str(err.value)
