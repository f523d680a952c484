import json

import pytest

from wic_toolkit import Corpus, WicPair


def make_pair(i=0, lemma="bank", s1="the bank is open", s2="a steep bank", sp1=(4, 8), sp2=(8, 12), label=True):
    return WicPair(
        id=f"t.{i}",
        lemma=lemma,
        pos="NOUN",
        sentence1=s1,
        sentence2=s2,
        span1=sp1,
        span2=sp2,
        label=label,
    )


@pytest.fixture
def tiny_corpus():
    pairs = (
        make_pair(0, "bank", label=True),
        make_pair(1, "bank", "the bank closed", "a grassy bank", (4, 8), (9, 13), label=False),
        make_pair(2, "light", "a light meal", "the light is on", (2, 7), (4, 9), label=False),
        make_pair(3, "light", "light colors", "a light shade", (0, 5), (2, 7), label=True),
    )
    return Corpus(pairs=pairs, source="fixture")


MCLWIC_RECORDS = [
    {
        "id": "training.en-en.1",
        "lemma": "play",
        "pos": "VERB",
        "sentence1": "The kids play outside.",
        "sentence2": "They play the violin.",
        # offsets as strings, as shipped in some releases
        "start1": "9",
        "end1": "13",
        "start2": 5,
        "end2": 9,
    },
    {
        "id": "training.en-en.2",
        "lemma": "bank",
        "pos": "NOUN",
        "sentence1": "The bank raised rates.",
        "sentence2": "We fished from the bank.",
        "start1": 4,
        "end1": 8,
        "start2": 19,
        "end2": 23,
    },
]

MCLWIC_GOLD = [
    {"id": "training.en-en.1", "tag": "F"},
    {"id": "training.en-en.2", "tag": "F"},
]

SUPERGLUE_LINES = [
    {
        "word": "board",
        "sentence1": "Room and board.",
        "sentence2": "He nailed boards across the window.",
        "start1": 9,
        "end1": 14,
        "start2": 10,
        "end2": 16,
        "label": False,
        "idx": 0,
    },
    {
        "word": "circulate",
        "sentence1": "Blood circulates in my veins.",
        "sentence2": "The air here does not circulate.",
        "start1": 6,
        "end1": 16,
        "start2": 22,
        "end2": 31,
        "label": True,
        "idx": 1,
    },
]


@pytest.fixture
def mclwic_files(tmp_path):
    data = tmp_path / "train.data.json"
    gold = tmp_path / "train.gold.json"
    data.write_text(json.dumps(MCLWIC_RECORDS), encoding="utf-8")
    gold.write_text(json.dumps(MCLWIC_GOLD), encoding="utf-8")
    return data, gold


@pytest.fixture
def superglue_file(tmp_path):
    path = tmp_path / "wic.jsonl"
    path.write_text(
        "\n".join(json.dumps(rec) for rec in SUPERGLUE_LINES) + "\n", encoding="utf-8"
    )
    return path
