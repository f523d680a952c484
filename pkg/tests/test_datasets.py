import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wic_toolkit import (
    POS_UNKNOWN,
    Corpus,
    DataFormatError,
    GoldJoinError,
    MergeError,
    SpanValidationError,
    SplitConfig,
    SplitError,
    WicPair,
    load_corpus,
    load_mclwic,
    load_superglue_wic,
    merge,
    save_corpus,
    split_by_lemma,
    validate_pair,
)
from wic_toolkit.datasets import save_split_manifest
from wic_toolkit.synthetic import make_corpus, write_mclwic_files

from conftest import make_pair


# --- loading -----------------------------------------------------------------


def test_load_mclwic_joins_gold(mclwic_files):
    data, gold = mclwic_files
    corpus = load_mclwic(data, gold)
    assert len(corpus) == 2
    p = corpus.pairs[0]
    assert p.id == "training.en-en.1"
    assert p.span1 == (9, 13)  # string offsets coerced
    assert p.target1() == "play"
    assert p.label is False
    assert corpus.pairs[1].target2() == "bank"


def test_load_mclwic_without_gold_is_unlabeled(mclwic_files):
    data, _ = mclwic_files
    corpus = load_mclwic(data)
    assert all(p.label is None for p in corpus)


def test_gold_join_is_exact_both_ways(mclwic_files, tmp_path):
    data, _ = mclwic_files
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps([{"id": "training.en-en.1", "tag": "F"}]))
    with pytest.raises(GoldJoinError, match="training.en-en.2"):
        load_mclwic(data, missing)

    extra = tmp_path / "extra.json"
    extra.write_text(
        json.dumps(
            [
                {"id": "training.en-en.1", "tag": "F"},
                {"id": "training.en-en.2", "tag": "F"},
                {"id": "training.en-en.99", "tag": "T"},
            ]
        )
    )
    with pytest.raises(GoldJoinError, match="training.en-en.99"):
        load_mclwic(data, extra)


def test_bad_gold_tag_rejected(mclwic_files, tmp_path):
    data, _ = mclwic_files
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps(
            [
                {"id": "training.en-en.1", "tag": "yes"},
                {"id": "training.en-en.2", "tag": "F"},
            ]
        )
    )
    with pytest.raises(DataFormatError, match="'T' or 'F'"):
        load_mclwic(data, bad)


def test_malformed_json_names_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("[{\"id\": ")
    with pytest.raises(DataFormatError, match="broken.json"):
        load_mclwic(broken)


def test_load_superglue(superglue_file):
    corpus = load_superglue_wic(superglue_file)
    assert corpus.ids() == ["wic.0", "wic.1"]
    p = corpus.pairs[0]
    assert p.lemma == "board"
    assert p.pos == POS_UNKNOWN
    assert p.label is False
    assert p.target1() == "board"
    assert corpus.pairs[1].target1() == "circulates"


def test_superglue_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"word": "a"}\nnot json\n')
    with pytest.raises(DataFormatError, match=":1"):
        load_superglue_wic(path)


# --- span validation ---------------------------------------------------------


def test_span_bounds_checked():
    with pytest.raises(SpanValidationError, match="t.0"):
        validate_pair(make_pair(0, sp1=(4, 99)))
    with pytest.raises(SpanValidationError):
        validate_pair(make_pair(0, sp1=(8, 4)))
    with pytest.raises(SpanValidationError):
        validate_pair(make_pair(0, sp1=(4, 4)))


def test_span_whitespace_edges_rejected():
    # span covering "bank " (trailing space)
    with pytest.raises(SpanValidationError, match="whitespace"):
        validate_pair(make_pair(0, sp1=(4, 9)))


def test_duplicate_ids_rejected_at_load(tmp_path):
    rec = {
        "id": "x.1", "lemma": "a", "pos": "NOUN",
        "sentence1": "a b", "sentence2": "b a",
        "start1": 0, "end1": 1, "start2": 2, "end2": 3,
    }
    path = tmp_path / "dup.json"
    path.write_text(json.dumps([rec, rec]))
    with pytest.raises(DataFormatError, match="duplicate id"):
        load_mclwic(path)


# --- merge -------------------------------------------------------------------


def test_merge_preserves_order_and_pairs(tiny_corpus):
    other = Corpus(pairs=(make_pair(10, "run"),), source="other")
    merged = merge([tiny_corpus, other])
    assert merged.source == "merged"
    assert merged.ids() == tiny_corpus.ids() + ["t.10"]
    # pairs are kept verbatim
    assert merged.pairs[0] is tiny_corpus.pairs[0]


def test_merge_rejects_duplicate_ids(tiny_corpus):
    with pytest.raises(MergeError, match="t.0"):
        merge([tiny_corpus, Corpus(pairs=(make_pair(0),), source="again")])


# --- lemma split -------------------------------------------------------------


def test_split_sides_are_lemma_disjoint_and_conserve_ids(tiny_corpus):
    train, val = split_by_lemma(tiny_corpus, SplitConfig(train_fraction=0.5, seed=3))
    assert train.lemmas().isdisjoint(val.lemmas())
    assert sorted(train.ids() + val.ids()) == sorted(tiny_corpus.ids())
    assert len(train) > 0 and len(val) > 0


def test_split_is_deterministic(tiny_corpus):
    cfg = SplitConfig(train_fraction=0.5, seed=7)
    a = split_by_lemma(tiny_corpus, cfg)
    b = split_by_lemma(tiny_corpus, cfg)
    assert a[0].ids() == b[0].ids() and a[1].ids() == b[1].ids()


def test_split_prefix_rule_matches_reference(tiny_corpus):
    # Reference computation: shuffle the sorted lemma list with the same
    # seeded generator, then take the smallest prefix reaching the target.
    cfg = SplitConfig(train_fraction=0.5, seed=11)
    lemmas = sorted({p.lemma for p in tiny_corpus})
    random.Random(11).shuffle(lemmas)
    counts = {l: sum(p.lemma == l for p in tiny_corpus) for l in lemmas}
    total, cum, prefix = len(tiny_corpus), 0, set()
    for lemma in lemmas:
        prefix.add(lemma)
        cum += counts[lemma]
        if cum >= 0.5 * total - 1e-9:
            break
    train, _ = split_by_lemma(tiny_corpus, cfg)
    assert train.lemmas() == prefix


def test_split_single_lemma_fails():
    corpus = Corpus(pairs=(make_pair(0), make_pair(1)), source="x")
    with pytest.raises(SplitError, match="single lemma"):
        split_by_lemma(corpus, SplitConfig(train_fraction=0.5, seed=0))


def test_split_fraction_consuming_all_lemmas_fails(tiny_corpus):
    with pytest.raises(SplitError, match="every lemma"):
        split_by_lemma(tiny_corpus, SplitConfig(train_fraction=0.999, seed=0))


def test_split_fraction_validated():
    with pytest.raises(ValueError):
        SplitConfig(train_fraction=1.0)
    with pytest.raises(ValueError):
        SplitConfig(train_fraction=0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), fraction=st.floats(0.2, 0.9))
def test_split_invariants_hold_for_any_seed(seed, fraction):
    corpus = make_corpus(120, n_lemmas=12, seed=5)
    train, val = split_by_lemma(corpus, SplitConfig(train_fraction=fraction, seed=seed))
    assert train.lemmas().isdisjoint(val.lemmas())
    assert sorted(train.ids() + val.ids()) == sorted(corpus.ids())


# --- persistence -------------------------------------------------------------


def test_corpus_round_trip(tmp_path, tiny_corpus):
    path = tmp_path / "corpus.json"
    save_corpus(tiny_corpus, path)
    loaded = load_corpus(path)
    assert loaded.pairs == tiny_corpus.pairs
    assert loaded.source == tiny_corpus.source


def test_round_trip_keeps_unlabeled(tmp_path):
    corpus = Corpus(pairs=(make_pair(0, label=None),), source="x")
    path = tmp_path / "c.json"
    save_corpus(corpus, path)
    assert load_corpus(path).pairs[0].label is None


def test_split_manifest_contents(tmp_path, tiny_corpus):
    train, val = split_by_lemma(tiny_corpus, SplitConfig(train_fraction=0.5, seed=3))
    path = tmp_path / "manifest.json"
    save_split_manifest(path, train, val, 3, 0.5)
    doc = json.loads(path.read_text())
    assert doc["seed"] == 3 and doc["fraction"] == 0.5
    assert doc["train_ids"] == train.ids()
    assert doc["validation_ids"] == val.ids()


# --- synthetic corpora -------------------------------------------------------


def test_synthetic_same_pairs_use_distinct_tokens():
    corpus = make_corpus(200, seed=1)
    for p in corpus:
        if p.label:
            assert p.target1() != p.target2()
        validate_pair(p)  # spans always valid


def test_synthetic_mclwic_files_load_back(tmp_path):
    corpus = make_corpus(30, seed=2)
    write_mclwic_files(corpus, tmp_path / "d.json", tmp_path / "g.json")
    loaded = load_mclwic(tmp_path / "d.json", tmp_path / "g.json")
    assert loaded.ids() == corpus.ids()
    assert [p.label for p in loaded] == [p.label for p in corpus]


def _sense(token):
    # surface tokens look like w003s1v0: lemma w003, sense 1, variant 0
    head, _, rest = token.partition("s")
    return head, rest.partition("v")[0]


def test_synthetic_label_noise_flips_some_labels():
    clean = make_corpus(300, seed=4, label_noise=0.0)
    assert all((_sense(p.target1()) == _sense(p.target2())) == p.label for p in clean)
    noisy = make_corpus(300, seed=4, label_noise=0.3)
    flipped = sum(
        (_sense(p.target1()) == _sense(p.target2())) != p.label for p in noisy
    )
    assert 40 < flipped < 150  # ~30% of 300
