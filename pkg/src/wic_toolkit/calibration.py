"""ROC-based decision threshold calibration.

The cosine head produces a score whose natural decision boundary is not
0.5, so after training the threshold is fitted on validation scores: build
the empirical ROC curve and pick the candidate threshold maximizing
TPR - FPR (Youden's J). Candidate thresholds are the midpoints between
consecutive distinct scores plus one sentinel below all scores and one
above, which realizes every achievable (TPR, FPR) operating point exactly
while staying clear of equality comparisons on the scores themselves.

Thresholds are always fitted on validation data, never on training or
test sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CalibrationError


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    """Operating points sorted by ascending candidate threshold."""

    points: tuple[RocPoint, ...]
    positives: int
    negatives: int


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    j_statistic: float
    curve: Optional[RocCurve]


def roc_curve(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """Empirical ROC curve with prediction rule ``score > threshold``.

    Requires at least one positive and one negative label; a single-class
    input cannot be calibrated and raises :class:`CalibrationError`.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError(
            f"scores and labels must be equal-length 1-d sequences, got "
            f"{s.shape} and {y.shape}"
        )
    positives = int(y.sum())
    negatives = int(y.size - positives)
    if positives == 0 or negatives == 0:
        raise CalibrationError("non-separable: one class absent")

    distinct = np.unique(s)
    candidates = np.concatenate(
        [
            [distinct[0] - 1.0],
            (distinct[:-1] + distinct[1:]) / 2.0,
            [distinct[-1] + 1.0],
        ]
    )
    pos_sorted = np.sort(s[y])
    neg_sorted = np.sort(s[~y])
    # Predicting positive iff score > t: count scores strictly above each
    # candidate via binary search on the sorted class scores.
    tp = positives - np.searchsorted(pos_sorted, candidates, side="right")
    fp = negatives - np.searchsorted(neg_sorted, candidates, side="right")
    points = tuple(
        RocPoint(threshold=float(t), tpr=float(tpi / positives), fpr=float(fpi / negatives))
        for t, tpi, fpi in zip(candidates, tp, fp)
    )
    return RocCurve(points=points, positives=positives, negatives=negatives)


def youden_threshold(curve: RocCurve) -> CalibrationResult:
    """Pick the candidate threshold maximizing TPR - FPR.

    Ties go to the largest threshold, i.e. the most conservative
    predictor among the equally good ones.
    """
    best_index = 0
    best_j = -np.inf
    for i, point in enumerate(curve.points):
        j = point.tpr - point.fpr
        if j >= best_j:  # >= keeps the largest threshold among ties
            best_j = j
            best_index = i
    best = curve.points[best_index]
    return CalibrationResult(
        threshold=best.threshold, j_statistic=best.tpr - best.fpr, curve=curve
    )


def fixed_threshold() -> CalibrationResult:
    """The MLP head's fixed 0.5 decision threshold; no curve is fitted."""
    empty = RocCurve(points=(), positives=0, negatives=0)
    return CalibrationResult(threshold=0.5, j_statistic=0.0, curve=empty)


def calibration_to_json(result: CalibrationResult) -> dict:
    curve = result.curve
    return {
        "threshold": result.threshold,
        "j_statistic": result.j_statistic,
        "n_candidates": 0 if curve is None else len(curve.points),
        "positives": 0 if curve is None else curve.positives,
        "negatives": 0 if curve is None else curve.negatives,
    }


def calibration_from_json(doc: dict) -> CalibrationResult:
    # Curve points are not persisted; only the chosen operating point is.
    return CalibrationResult(
        threshold=doc["threshold"], j_statistic=doc["j_statistic"], curve=None
    )
