"""Synthetic WiC corpora for CPU-scale training runs and tests.

Each synthetic lemma has two senses, and each sense is realized by a few
distinct surface tokens (synonyms). A same-meaning pair combines two
different surface tokens of one sense, so the toy encoder cannot solve
the corpus by string identity: it has to learn to map synonym tokens to
nearby vectors. A different-meaning pair combines surface tokens of the
two senses of one lemma.

Sentences are short filler contexts with the target token spliced in at a
random position, so target spans exercise the same alignment path as real
data.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Optional

from .datasets import Corpus, WicPair

_FILLERS = (
    "the", "a", "quiet", "green", "old", "river", "stone", "light",
    "walks", "under", "over", "near", "slowly", "bright", "cold", "warm",
)
_POS_CYCLE = ("NOUN", "VERB", "ADJ")


def _sentence(rng: random.Random, target: str) -> tuple[str, tuple[int, int]]:
    n_fill = rng.randint(4, 9)
    words = [rng.choice(_FILLERS) for _ in range(n_fill)]
    slot = rng.randint(0, n_fill)
    words.insert(slot, target)
    sentence = " ".join(words)
    start = sum(len(w) + 1 for w in words[:slot])
    return sentence, (start, start + len(target))


def make_corpus(
    n_pairs: int,
    n_lemmas: int = 16,
    synonyms_per_sense: int = 2,
    seed: int = 0,
    label_noise: float = 0.0,
    source: str = "synthetic",
    id_prefix: str = "syn",
) -> Corpus:
    """Generate a labeled corpus that is separable by token identity.

    ``label_noise`` flips each gold label independently with the given
    probability, producing corpora that cannot be fit without
    memorization.
    """
    if synonyms_per_sense < 2:
        raise ValueError("need at least 2 synonyms per sense for non-trivial pairs")
    rng = random.Random(seed)
    pairs = []
    for i in range(n_pairs):
        lemma_idx = rng.randrange(n_lemmas)
        lemma = f"w{lemma_idx:03d}"
        same = rng.random() < 0.5
        sense1 = rng.randrange(2)
        sense2 = sense1 if same else 1 - sense1
        variant1 = rng.randrange(synonyms_per_sense)
        if same:
            # Force distinct surface tokens so identity alone cannot win.
            variant2 = (variant1 + 1 + rng.randrange(synonyms_per_sense - 1)) % synonyms_per_sense
        else:
            variant2 = rng.randrange(synonyms_per_sense)
        token1 = f"{lemma}s{sense1}v{variant1}"
        token2 = f"{lemma}s{sense2}v{variant2}"
        sentence1, span1 = _sentence(rng, token1)
        sentence2, span2 = _sentence(rng, token2)
        label = same
        if label_noise > 0.0 and rng.random() < label_noise:
            label = not label
        pairs.append(
            WicPair(
                id=f"{id_prefix}.{i}",
                lemma=lemma,
                pos=_POS_CYCLE[lemma_idx % len(_POS_CYCLE)],
                sentence1=sentence1,
                sentence2=sentence2,
                span1=span1,
                span2=span2,
                label=label,
            )
        )
    return Corpus(pairs=tuple(pairs), source=source)


def write_mclwic_files(
    corpus: Corpus,
    data_path: str | Path,
    gold_path: Optional[str | Path] = None,
) -> None:
    """Write a corpus out in the MCL-WiC data (+ optional gold) format."""
    records = [
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
        }
        for p in corpus
    ]
    Path(data_path).write_text(
        json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    if gold_path is not None:
        gold = [
            {"id": p.id, "tag": "T" if p.label else "F"}
            for p in corpus
            if p.label is not None
        ]
        Path(gold_path).write_text(
            json.dumps(gold, indent=1) + "\n", encoding="utf-8"
        )
