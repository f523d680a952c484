"""Loading, validation, merging, and lemma-disjoint splitting of WiC corpora.

Two on-disk formats are understood:

* MCL-WiC: a JSON array of records ``{id, lemma, pos, sentence1, sentence2,
  start1, end1, start2, end2}`` plus an optional gold file, a JSON array of
  ``{id, tag}`` with tag "T" (same meaning) or "F".
* SuperGLUE WiC: JSON lines with ``{word, sentence1, sentence2, start1,
  end1, start2, end2, label, idx}``.

All files are read as UTF-8; spans are character indices into the decoded
text, half-open ``[start, end)``.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    DataFormatError,
    GoldJoinError,
    MergeError,
    SpanValidationError,
    SplitError,
)

#: Placeholder POS tag for corpora that do not annotate part of speech.
POS_UNKNOWN = "UNK"

_MCLWIC_KEYS = (
    "id",
    "lemma",
    "pos",
    "sentence1",
    "sentence2",
    "start1",
    "end1",
    "start2",
    "end2",
)
_SUPERGLUE_KEYS = (
    "word",
    "sentence1",
    "sentence2",
    "start1",
    "end1",
    "start2",
    "end2",
    "label",
    "idx",
)


@dataclass(frozen=True)
class WicPair:
    """One labeled (or unlabeled) word-in-context instance.

    ``span1``/``span2`` are half-open character intervals locating the
    target word inside ``sentence1``/``sentence2``. ``label`` is True when
    the target word carries the same meaning in both sentences, None when
    the instance is unlabeled.
    """

    id: str
    lemma: str
    pos: str
    sentence1: str
    sentence2: str
    span1: tuple[int, int]
    span2: tuple[int, int]
    label: Optional[bool] = None

    def target1(self) -> str:
        return self.sentence1[self.span1[0] : self.span1[1]]

    def target2(self) -> str:
        return self.sentence2[self.span2[0] : self.span2[1]]


@dataclass(frozen=True)
class Corpus:
    """An ordered, id-unique collection of :class:`WicPair`."""

    pairs: tuple[WicPair, ...]
    source: str

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def labels(self) -> dict[str, Optional[bool]]:
        return {p.id: p.label for p in self.pairs}

    def lemmas(self) -> set[str]:
        return {p.lemma for p in self.pairs}


@dataclass(frozen=True)
class SplitConfig:
    """Parameters of the lemma-granular train/validation split."""

    train_fraction: float = 0.975
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )


def _validate_span(pair_id: str, sentence: str, span: tuple[int, int], which: str) -> None:
    start, end = span
    if not (0 <= start < end <= len(sentence)):
        raise SpanValidationError(
            f"pair {pair_id!r}: {which} [{start},{end}) outside sentence "
            f"bounds [0,{len(sentence)})"
        )
    text = sentence[start:end]
    if text != text.strip():
        raise SpanValidationError(
            f"pair {pair_id!r}: {which} substring {text!r} has leading or "
            "trailing whitespace"
        )


def validate_pair(pair: WicPair) -> None:
    """Check the span invariants of a single pair; raise on violation."""
    _validate_span(pair.id, pair.sentence1, pair.span1, "span1")
    _validate_span(pair.id, pair.sentence2, pair.span2, "span2")


def _check_unique_ids(pairs: Iterable[WicPair], context: str) -> None:
    seen: set[str] = set()
    for p in pairs:
        if p.id in seen:
            raise DataFormatError(f"{context}: duplicate id {p.id!r}")
        seen.add(p.id)


def _build_corpus(pairs: Sequence[WicPair], source: str, context: str) -> Corpus:
    _check_unique_ids(pairs, context)
    for p in pairs:
        validate_pair(p)
    return Corpus(pairs=tuple(pairs), source=source)


def _coerce_index(record_id: str, raw, key: str) -> int:
    # MCL-WiC releases ship offsets both as ints and as numeric strings.
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise DataFormatError(
            f"record {record_id!r}: key {key!r} is not an integer: {raw!r}"
        ) from None


def load_mclwic(
    data_file: str | Path,
    gold_file: str | Path | None = None,
    source: str = "mclwic-train",
) -> Corpus:
    """Load an MCL-WiC data file, attaching labels from ``gold_file`` if given.

    Labels join to records by id and the join must be exact both ways;
    a missing id on either side raises :class:`GoldJoinError`.
    """
    data_file = Path(data_file)
    try:
        records = json.loads(data_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{data_file}: malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise DataFormatError(f"{data_file}: expected a JSON array of records")

    labels: dict[str, bool] = {}
    if gold_file is not None:
        gold_file = Path(gold_file)
        try:
            gold = json.loads(gold_file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{gold_file}: malformed JSON: {exc}") from exc
        if not isinstance(gold, list):
            raise DataFormatError(f"{gold_file}: expected a JSON array")
        for entry in gold:
            if not isinstance(entry, dict) or "id" not in entry or "tag" not in entry:
                raise DataFormatError(f"{gold_file}: gold entries need id and tag")
            tag = entry["tag"]
            if tag not in ("T", "F"):
                raise DataFormatError(
                    f"{gold_file}: id {entry['id']!r} has tag {tag!r}, expected 'T' or 'F'"
                )
            labels[entry["id"]] = tag == "T"

    pairs: list[WicPair] = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise DataFormatError(f"{data_file}: record {i} is not an object")
        missing = [k for k in _MCLWIC_KEYS if k not in rec]
        if missing:
            raise DataFormatError(
                f"{data_file}: record {i} is missing keys {missing}"
            )
        rid = str(rec["id"])
        label: Optional[bool] = None
        if gold_file is not None:
            if rid not in labels:
                raise GoldJoinError(f"data id {rid!r} has no gold entry")
            label = labels[rid]
        pairs.append(
            WicPair(
                id=rid,
                lemma=str(rec["lemma"]),
                pos=str(rec["pos"]),
                sentence1=str(rec["sentence1"]),
                sentence2=str(rec["sentence2"]),
                span1=(
                    _coerce_index(rid, rec["start1"], "start1"),
                    _coerce_index(rid, rec["end1"], "end1"),
                ),
                span2=(
                    _coerce_index(rid, rec["start2"], "start2"),
                    _coerce_index(rid, rec["end2"], "end2"),
                ),
                label=label,
            )
        )

    if gold_file is not None:
        data_ids = {p.id for p in pairs}
        orphans = sorted(set(labels) - data_ids)
        if orphans:
            raise GoldJoinError(f"gold id {orphans[0]!r} has no data record")

    return _build_corpus(pairs, source, str(data_file))


def load_superglue_wic(file: str | Path, source: str = "superglue-train") -> Corpus:
    """Load a SuperGLUE WiC JSON-lines file.

    The ``word`` field doubles as the lemma; POS is not annotated in this
    format and is stored as :data:`POS_UNKNOWN`. Ids are ``wic.<idx>``.
    """
    file = Path(file)
    pairs: list[WicPair] = []
    with file.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{file}:{lineno}: malformed JSON: {exc}"
                ) from exc
            missing = [k for k in _SUPERGLUE_KEYS if k not in rec]
            if missing:
                raise DataFormatError(
                    f"{file}:{lineno}: missing keys {missing}"
                )
            rid = f"wic.{rec['idx']}"
            pairs.append(
                WicPair(
                    id=rid,
                    lemma=str(rec["word"]),
                    pos=POS_UNKNOWN,
                    sentence1=str(rec["sentence1"]),
                    sentence2=str(rec["sentence2"]),
                    span1=(
                        _coerce_index(rid, rec["start1"], "start1"),
                        _coerce_index(rid, rec["end1"], "end1"),
                    ),
                    span2=(
                        _coerce_index(rid, rec["start2"], "start2"),
                        _coerce_index(rid, rec["end2"], "end2"),
                    ),
                    label=bool(rec["label"]),
                )
            )
    return _build_corpus(pairs, source, str(file))


def merge(corpora: Sequence[Corpus]) -> Corpus:
    """Concatenate corpora into one with source ``"merged"``.

    Inputs must be pairwise id-disjoint; order is preserved.
    """
    seen: set[str] = set()
    pairs: list[WicPair] = []
    for corpus in corpora:
        for p in corpus:
            if p.id in seen:
                raise MergeError(f"duplicate id {p.id!r} across merged corpora")
            seen.add(p.id)
            pairs.append(p)
    return Corpus(pairs=tuple(pairs), source="merged")


def split_by_lemma(corpus: Corpus, config: SplitConfig) -> tuple[Corpus, Corpus]:
    """Partition a corpus into train/validation with lemma-disjoint sides.

    The unique lemmas are shuffled by ``config.seed`` and the train side
    receives the smallest prefix of lemmas whose cumulative instance count
    reaches ``train_fraction`` of the total. Every instance of a lemma
    lands on one side, so the realized fraction can deviate from the
    target by up to the largest per-lemma instance count.
    """
    if len(corpus) == 0:
        raise SplitError("cannot split an empty corpus")
    counts = Counter(p.lemma for p in corpus)
    lemmas = sorted(counts)
    if len(lemmas) < 2:
        raise SplitError(
            f"corpus has a single lemma {lemmas[0]!r}; cannot produce two "
            "non-empty sides"
        )
    rng = random.Random(config.seed)
    rng.shuffle(lemmas)

    target = config.train_fraction * len(corpus)
    train_lemmas: set[str] = set()
    cumulative = 0
    for lemma in lemmas:
        train_lemmas.add(lemma)
        cumulative += counts[lemma]
        # 1e-9 guard: target is a float product and must not force an
        # extra lemma over a representation error.
        if cumulative >= target - 1e-9:
            break
    if len(train_lemmas) == len(lemmas):
        raise SplitError(
            "train fraction consumes every lemma; cannot produce two "
            "non-empty sides"
        )

    train_pairs = tuple(p for p in corpus if p.lemma in train_lemmas)
    val_pairs = tuple(p for p in corpus if p.lemma not in train_lemmas)
    return (
        Corpus(pairs=train_pairs, source=corpus.source),
        Corpus(pairs=val_pairs, source=corpus.source),
    )


# --- persistence -----------------------------------------------------------
#
# Prepared corpora are stored in a self-contained JSON format mirroring the
# MCL-WiC record schema plus a nullable "tag" per record, so a prepared file
# can be re-loaded without the original gold file.


def corpus_to_json(corpus: Corpus) -> dict:
    return {
        "source": corpus.source,
        "pairs": [
            {
                "id": p.id,
                "lemma": p.lemma,
                "pos": p.pos,
                "sentence1": p.sentence1,
                "sentence2": p.sentence2,
                "start1": p.span1[0],
                "end1": p.span1[1],
                "start2": p.span2[0],
                "end2": p.span2[1],
                "tag": None if p.label is None else ("T" if p.label else "F"),
            }
            for p in corpus
        ],
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus_to_json(corpus), ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "pairs" not in doc or "source" not in doc:
        raise DataFormatError(f"{path}: not a saved corpus file")
    pairs = []
    for rec in doc["pairs"]:
        tag = rec.get("tag")
        pairs.append(
            WicPair(
                id=rec["id"],
                lemma=rec["lemma"],
                pos=rec["pos"],
                sentence1=rec["sentence1"],
                sentence2=rec["sentence2"],
                span1=(rec["start1"], rec["end1"]),
                span2=(rec["start2"], rec["end2"]),
                label=None if tag is None else tag == "T",
            )
        )
    return _build_corpus(pairs, doc["source"], str(path))


def save_split_manifest(
    path: str | Path,
    train: Corpus,
    validation: Corpus,
    seed: Optional[int],
    fraction: Optional[float],
) -> None:
    """Record the exact ids of a split for reproducibility."""
    manifest = {
        "seed": seed,
        "fraction": fraction,
        "train_ids": train.ids(),
        "validation_ids": validation.ids(),
    }
    Path(path).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
