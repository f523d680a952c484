"""Accuracy reports and error analyses over labeled corpora.

Besides plain accuracy and confusion counts, two analyses are provided:
grouping of erroneous instances that share their first sentence verbatim
(a structural feature of WiC-style datasets, where one lemma yields two
instances with a common first sentence), and the intersection of error
sets across several models, which separates instances that are hard for
every model from those at least one model gets right.
"""

from __future__ import annotations

import json
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .datasets import Corpus
from .errors import EvaluationError


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int
    predictions: tuple[tuple[str, bool, bool], ...]  # (id, predicted, gold)

    def error_ids(self) -> frozenset[str]:
        return frozenset(pid for pid, pred, gold in self.predictions if pred != gold)

    def prediction_ids(self) -> frozenset[str]:
        return frozenset(pid for pid, _, _ in self.predictions)


@dataclass(frozen=True)
class ErrorGroupReport:
    error_ids: frozenset[str]
    shared_first_sentence_error_count: int
    groups: tuple[tuple[str, tuple[str, ...]], ...]  # (sentence1, error ids)


def evaluate(predictions: Sequence[tuple[str, bool]], gold: Corpus) -> EvaluationReport:
    """Score predicted labels against a fully labeled gold corpus.

    Prediction ids must be a subset of the gold ids; a "positive" is a
    predicted same-meaning label.
    """
    gold_labels = gold.labels()
    missing = sorted({pid for pid, _ in predictions} - set(gold_labels))
    if missing:
        raise EvaluationError(f"prediction ids missing from gold: {missing}")
    seen: set[str] = set()
    for pid, _ in predictions:
        if pid in seen:
            raise EvaluationError(f"duplicate prediction for id {pid!r}")
        seen.add(pid)
    unlabeled = sorted(pid for pid in seen if gold_labels[pid] is None)
    if unlabeled:
        raise EvaluationError(f"gold corpus is unlabeled for ids: {unlabeled}")

    tp = fp = tn = fn = 0
    rows: list[tuple[str, bool, bool]] = []
    for pid, predicted in predictions:
        actual = bool(gold_labels[pid])
        rows.append((pid, predicted, actual))
        if predicted and actual:
            tp += 1
        elif predicted and not actual:
            fp += 1
        elif not predicted and not actual:
            tn += 1
        else:
            fn += 1
    total = len(rows)
    if total == 0:
        raise EvaluationError("no predictions to evaluate")
    return EvaluationReport(
        accuracy=(tp + tn) / total,
        true_positives=tp,
        false_positives=fp,
        true_negatives=tn,
        false_negatives=fn,
        predictions=tuple(rows),
    )


def shared_first_sentence_errors(
    report: EvaluationReport, corpus: Corpus
) -> ErrorGroupReport:
    """Group erroneous instances whose first sentences are identical.

    Sentence equality is exact string equality after NFC normalization.
    Only groups with two or more errors count toward the shared total.
    """
    sentences = {p.id: p.sentence1 for p in corpus}
    errors = report.error_ids()
    stray = sorted(errors - set(sentences))
    if stray:
        raise EvaluationError(f"report ids not present in corpus: {stray}")
    by_sentence: dict[str, list[str]] = defaultdict(list)
    for pid in sorted(errors):
        by_sentence[unicodedata.normalize("NFC", sentences[pid])].append(pid)
    groups = tuple(
        (sentence, tuple(ids))
        for sentence, ids in sorted(by_sentence.items())
        if len(ids) >= 2
    )
    return ErrorGroupReport(
        error_ids=errors,
        shared_first_sentence_error_count=sum(len(ids) for _, ids in groups),
        groups=groups,
    )


def error_intersection(reports: Sequence[EvaluationReport]) -> set[str]:
    """Ids mislabeled by every report; reports must cover the same ids."""
    if not reports:
        raise ValueError("error_intersection requires at least one report")
    id_set = reports[0].prediction_ids()
    for i, report in enumerate(reports[1:], start=2):
        if report.prediction_ids() != id_set:
            raise EvaluationError(
                f"report {i} covers a different id set than report 1"
            )
    common = set(reports[0].error_ids())
    for report in reports[1:]:
        common &= report.error_ids()
    return common


# --- serialization ----------------------------------------------------------


def report_to_json(report: EvaluationReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "true_positives": report.true_positives,
        "false_positives": report.false_positives,
        "true_negatives": report.true_negatives,
        "false_negatives": report.false_negatives,
        "predictions": [
            {"id": pid, "predicted": pred, "gold": gold}
            for pid, pred, gold in report.predictions
        ],
    }


def error_groups_to_json(report: ErrorGroupReport) -> dict:
    return {
        "error_ids": sorted(report.error_ids),
        "shared_first_sentence_error_count": report.shared_first_sentence_error_count,
        "groups": [
            {"sentence1": sentence, "ids": list(ids)}
            for sentence, ids in report.groups
        ],
    }


def write_submission(path: str | Path, predictions: Sequence[tuple[str, bool]]) -> None:
    """Write predictions in the MCL-WiC gold-file schema: [{"id", "tag"}]."""
    doc = [{"id": pid, "tag": "T" if label else "F"} for pid, label in predictions]
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


def read_submission(path: str | Path) -> list[tuple[str, bool]]:
    """Read a predictions file in the gold-file schema."""
    from .errors import DataFormatError

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise DataFormatError(f"{path}: expected a JSON array")
    out: list[tuple[str, bool]] = []
    for entry in doc:
        if not isinstance(entry, dict) or "id" not in entry or "tag" not in entry:
            raise DataFormatError(f"{path}: entries need id and tag")
        if entry["tag"] not in ("T", "F"):
            raise DataFormatError(
                f"{path}: id {entry['id']!r} has tag {entry['tag']!r}"
            )
        out.append((entry["id"], entry["tag"] == "T"))
    return out
