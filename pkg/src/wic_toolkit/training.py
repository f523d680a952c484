"""Fine-tuning loop with half-epoch validation checks and early stopping.

Training iterates seeded, per-epoch reshuffled mini-batches and minimizes
binary cross-entropy between head scores and the gold labels. Several
times per epoch (twice by default) the mean validation loss is measured;
when it fails to improve on the best value seen so far for a configured
number of consecutive checks, training stops and the parameters from the
best check are returned. Predictions are clamped away from exact 0 and 1
before the loss so a ReLU-activated cosine score cannot produce an
infinite loss on a confidently wrong pair.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import torch

from .calibration import (
    CalibrationResult,
    calibration_from_json,
    calibration_to_json,
    roc_curve,
    youden_threshold,
)
from .datasets import Corpus, WicPair
from .encoding import ContextualEncoder, encode_pair
from .errors import CalibrationError, TrainingError
from .heads import (
    CosineHead,
    Head,
    HeadConfig,
    build_head,
    decide,
    head_config_from_json,
    head_config_to_json,
)
from .registry import create_encoder


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    max_tokens: int = 118
    learning_rate: float = 1e-5
    optimizer: str = "adamw"
    max_epochs: int = 8
    checks_per_epoch: int = 2
    patience_checks: int = 2
    seed: int = 0
    prediction_clamp_epsilon: float = 1e-7
    # AdamW keyword defaults, recorded here so the checkpoint snapshot is
    # complete even if the library defaults ever change.
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_epsilon: float = 1e-8
    weight_decay: float = 1e-2
    freeze_encoder: bool = False

    def __post_init__(self):
        positive = {
            "batch_size": self.batch_size,
            "max_tokens": self.max_tokens,
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "checks_per_epoch": self.checks_per_epoch,
            "patience_checks": self.patience_checks,
            "prediction_clamp_epsilon": self.prediction_clamp_epsilon,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.optimizer != "adamw":
            raise ValueError(f"only the adamw optimizer is supported, got {self.optimizer!r}")


def train_config_to_json(config: TrainConfig) -> dict:
    return {
        "batch_size": config.batch_size,
        "max_tokens": config.max_tokens,
        "learning_rate": config.learning_rate,
        "optimizer": config.optimizer,
        "max_epochs": config.max_epochs,
        "checks_per_epoch": config.checks_per_epoch,
        "patience_checks": config.patience_checks,
        "seed": config.seed,
        "prediction_clamp_epsilon": config.prediction_clamp_epsilon,
        "adam_betas": list(config.adam_betas),
        "adam_epsilon": config.adam_epsilon,
        "weight_decay": config.weight_decay,
        "freeze_encoder": config.freeze_encoder,
    }


def train_config_from_json(doc: dict) -> TrainConfig:
    doc = dict(doc)
    if "adam_betas" in doc:
        doc["adam_betas"] = tuple(doc["adam_betas"])
    return TrainConfig(**doc)


@dataclass(frozen=True)
class CheckRecord:
    epoch_position: float
    validation_loss: float
    validation_accuracy: float


@dataclass(frozen=True)
class TrainHistory:
    records: tuple[CheckRecord, ...]
    stopped_early: bool
    epochs_completed: float
    best_check: int  # 1-based index into records
    total_checks: int


def history_to_json(history: TrainHistory) -> dict:
    return {
        "records": [
            {
                "epoch_position": r.epoch_position,
                "validation_loss": r.validation_loss,
                "validation_accuracy": r.validation_accuracy,
            }
            for r in history.records
        ],
        "stopped_early": history.stopped_early,
        "epochs_completed": history.epochs_completed,
        "best_check": history.best_check,
        "total_checks": history.total_checks,
    }


def history_from_json(doc: dict) -> TrainHistory:
    return TrainHistory(
        records=tuple(
            CheckRecord(
                epoch_position=r["epoch_position"],
                validation_loss=r["validation_loss"],
                validation_accuracy=r["validation_accuracy"],
            )
            for r in doc["records"]
        ),
        stopped_early=doc["stopped_early"],
        epochs_completed=doc["epochs_completed"],
        best_check=doc["best_check"],
        total_checks=doc["total_checks"],
    )


class EarlyStopper:
    """Best-so-far early stopping with a consecutive-failure budget.

    A check "improves" when its loss is strictly below the best loss seen
    so far; ``patience`` consecutive non-improving checks trigger a stop.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best_loss = math.inf
        self.best_check = 0
        self.bad_streak = 0
        self.checks = 0

    def update(self, loss: float) -> tuple[bool, bool]:
        """Record one validation check; returns (improved, should_stop)."""
        self.checks += 1
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_check = self.checks
            self.bad_streak = 0
            return True, False
        self.bad_streak += 1
        return False, self.bad_streak >= self.patience


def simulate_early_stopping(
    losses: Sequence[float], patience: int = 2
) -> tuple[Optional[int], int]:
    """Run the stopping rule over an injected loss sequence.

    Returns ``(stop_check, best_check)``, both 1-based; ``stop_check`` is
    None when the sequence runs out before the rule triggers.
    """
    stopper = EarlyStopper(patience)
    for loss in losses:
        _, stop = stopper.update(loss)
        if stop:
            return stopper.checks, stopper.best_check
    return None, stopper.best_check


def bce_loss(
    prediction: torch.Tensor | float,
    label: torch.Tensor | bool,
    clamp_epsilon: float,
) -> torch.Tensor:
    """Binary cross-entropy with the prediction clamped into [eps, 1-eps].

    Accepts scalars or same-shaped tensors and stays differentiable in the
    prediction. Predictions outside [0, 1] are a contract violation.
    """
    if isinstance(prediction, torch.Tensor):
        p = prediction
    else:
        # Python floats are doubles; keep them that way.
        p = torch.as_tensor(prediction, dtype=torch.float64)
    if bool((p < 0).any()) or bool((p > 1).any()):
        raise ValueError(f"prediction outside [0, 1]: {prediction}")
    y = torch.as_tensor(label, dtype=p.dtype)
    p = p.clamp(clamp_epsilon, 1.0 - clamp_epsilon)
    return -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p))


@dataclass
class Checkpoint:
    """A trained (or frozen-baseline) model plus everything needed to rerun it."""

    encoder: ContextualEncoder
    head: Head
    encoder_spec: dict  # {"name": ..., "kwargs": {...}} for the registry
    head_config: HeadConfig
    train_config: TrainConfig
    calibration: Optional[CalibrationResult] = None
    history: Optional[TrainHistory] = None

    @property
    def threshold(self) -> float:
        return 0.5 if self.calibration is None else self.calibration.threshold


def _stack_batch(
    encoder: ContextualEncoder,
    pairs: Sequence[WicPair],
    max_tokens: int,
    want_sentence_vectors: bool,
):
    embs = [
        encode_pair(encoder, p, max_tokens, want_sentence_vectors) for p in pairs
    ]
    t1 = torch.stack([e.target1 for e in embs])
    t2 = torch.stack([e.target2 for e in embs])
    s1 = s2 = None
    if want_sentence_vectors:
        s1 = torch.stack([e.sentence1_vec for e in embs])
        s2 = torch.stack([e.sentence2_vec for e in embs])
    return t1, t2, s1, s2


def _score_pairs(
    encoder: ContextualEncoder,
    head: Head,
    pairs: Sequence[WicPair],
    config: TrainConfig,
) -> torch.Tensor:
    want = getattr(head, "needs_sentence_vectors", False)
    t1, t2, s1, s2 = _stack_batch(encoder, pairs, config.max_tokens, want)
    return head.score_batch(t1, t2, s1, s2, ids=[p.id for p in pairs])


def _check_accuracy(scores: list[float], labels: list[bool], head: Head) -> float:
    """Accuracy at the head's natural threshold.

    For the cosine head the natural threshold is the Youden calibration of
    the very scores being checked (matching how the model is deployed);
    the MLP head uses the fixed 0.5 threshold.
    """
    threshold = 0.5
    if isinstance(head, CosineHead):
        try:
            threshold = youden_threshold(roc_curve(scores, labels)).threshold
        except CalibrationError:
            pass  # single-class validation slice: fall back to 0.5
    hits = sum(decide(s, threshold) == y for s, y in zip(scores, labels))
    return hits / len(scores)


def _validation_check(
    encoder: ContextualEncoder,
    head: Head,
    corpus: Corpus,
    config: TrainConfig,
) -> tuple[float, float]:
    losses: list[float] = []
    scores: list[float] = []
    labels: list[bool] = []
    with torch.no_grad():
        for start in range(0, len(corpus), config.batch_size):
            batch = corpus.pairs[start : start + config.batch_size]
            s = _score_pairs(encoder, head, batch, config)
            y = torch.tensor([p.label for p in batch], dtype=s.dtype)
            losses.extend(
                bce_loss(s, y, config.prediction_clamp_epsilon).tolist()
            )
            scores.extend(s.tolist())
            labels.extend(bool(p.label) for p in batch)
    mean_loss = sum(losses) / len(losses)
    if not math.isfinite(mean_loss):
        raise TrainingError(f"non-finite validation loss: {mean_loss}")
    return mean_loss, _check_accuracy(scores, labels, head)


def _snapshot(encoder: ContextualEncoder, head: Head) -> dict:
    return {
        "encoder": {k: v.detach().clone() for k, v in encoder.state_dict().items()},
        "head": {k: v.detach().clone() for k, v in head.state_dict().items()},
    }


def _restore(encoder: ContextualEncoder, head: Head, snapshot: dict) -> None:
    encoder.load_state_dict(snapshot["encoder"])
    head.load_state_dict(snapshot["head"])


def _check_boundaries(n_batches: int, checks_per_epoch: int) -> list[int]:
    """Batch counts after which a validation check runs, within one epoch."""
    marks = sorted(
        {
            max(1, round(n_batches * k / checks_per_epoch))
            for k in range(1, checks_per_epoch + 1)
        }
    )
    if marks[-1] != n_batches:
        marks[-1] = n_batches
    return marks


def train(
    encoder: ContextualEncoder,
    head: Head,
    train_corpus: Corpus,
    validation_corpus: Corpus,
    config: TrainConfig,
    encoder_spec: Optional[dict] = None,
    head_config: Optional[HeadConfig] = None,
) -> tuple[Checkpoint, TrainHistory]:
    """Fine-tune encoder (and head) parameters by mini-batch AdamW.

    Returns the checkpoint from the best validation check, not the last;
    the history records enough to recover either reading.
    """
    if len(train_corpus) == 0 or len(validation_corpus) == 0:
        raise ValueError("train and validation corpora must be non-empty")
    for corpus in (train_corpus, validation_corpus):
        unlabeled = [p.id for p in corpus if p.label is None]
        if unlabeled:
            raise ValueError(f"corpus has unlabeled pairs, e.g. {unlabeled[0]!r}")

    if config.freeze_encoder:
        for p in encoder.parameters():
            p.requires_grad_(False)
    params = [p for p in encoder.parameters() if p.requires_grad]
    params += [p for p in head.parameters() if p.requires_grad]
    if not params:
        raise TrainingError(
            "nothing to train: encoder frozen and the head has no "
            "parameters; use the frozen-baseline path instead"
        )
    optimizer = torch.optim.AdamW(
        params,
        lr=config.learning_rate,
        betas=config.adam_betas,
        eps=config.adam_epsilon,
        weight_decay=config.weight_decay,
    )

    rng = random.Random(config.seed)
    stopper = EarlyStopper(config.patience_checks)
    records: list[CheckRecord] = []
    best_state = _snapshot(encoder, head)
    n = len(train_corpus)
    n_batches = math.ceil(n / config.batch_size)
    boundaries = _check_boundaries(n_batches, config.checks_per_epoch)
    stopped_early = False

    for epoch in range(config.max_epochs):
        order = list(range(n))
        rng.shuffle(order)
        for bi in range(n_batches):
            batch = [
                train_corpus.pairs[i]
                for i in order[bi * config.batch_size : (bi + 1) * config.batch_size]
            ]
            scores = _score_pairs(encoder, head, batch, config)
            y = torch.tensor([p.label for p in batch], dtype=scores.dtype)
            loss = bce_loss(scores, y, config.prediction_clamp_epsilon).mean()
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            if (bi + 1) in boundaries:
                val_loss, val_acc = _validation_check(
                    encoder, head, validation_corpus, config
                )
                position = epoch + (boundaries.index(bi + 1) + 1) / len(boundaries)
                records.append(CheckRecord(position, val_loss, val_acc))
                improved, stop = stopper.update(val_loss)
                if improved:
                    best_state = _snapshot(encoder, head)
                if stop:
                    stopped_early = True
                    break
        if stopped_early:
            break

    _restore(encoder, head, best_state)
    history = TrainHistory(
        records=tuple(records),
        stopped_early=stopped_early,
        epochs_completed=stopper.checks / len(boundaries),
        best_check=stopper.best_check,
        total_checks=stopper.checks,
    )
    checkpoint = Checkpoint(
        encoder=encoder,
        head=head,
        encoder_spec=encoder_spec or _infer_encoder_spec(encoder),
        head_config=head_config or getattr(head, "config"),
        train_config=config,
        calibration=None,
        history=history,
    )
    return checkpoint, history


def _infer_encoder_spec(encoder: ContextualEncoder) -> dict:
    from .encoding import ToyEncoder

    if isinstance(encoder, ToyEncoder):
        return {"name": "toy", "kwargs": encoder.init_kwargs()}
    init_kwargs = getattr(encoder, "init_kwargs", None)
    if init_kwargs is not None:
        kwargs = init_kwargs()
        name = kwargs.pop("model_name", None)
        if name is not None:
            return {"name": name, "kwargs": kwargs}
    raise ValueError(
        "cannot infer a registry spec for this encoder; pass encoder_spec"
    )


def make_checkpoint(
    encoder: ContextualEncoder,
    head: Head,
    config: TrainConfig,
    encoder_spec: Optional[dict] = None,
    head_config: Optional[HeadConfig] = None,
) -> Checkpoint:
    """Wrap an untrained encoder+head as a frozen-baseline checkpoint."""
    return Checkpoint(
        encoder=encoder,
        head=head,
        encoder_spec=encoder_spec or _infer_encoder_spec(encoder),
        head_config=head_config or getattr(head, "config"),
        train_config=config,
        calibration=None,
        history=None,
    )


def score_pair(checkpoint: Checkpoint, pair: WicPair, config: Optional[TrainConfig] = None) -> float:
    """Score a single pair without batching; the reference forward path."""
    config = config or checkpoint.train_config
    want = getattr(checkpoint.head, "needs_sentence_vectors", False)
    with torch.no_grad():
        emb = encode_pair(checkpoint.encoder, pair, config.max_tokens, want)
        return float(checkpoint.head.score(emb, pair_id=pair.id))


def predict_scores(
    checkpoint: Checkpoint,
    corpus: Corpus,
    config: Optional[TrainConfig] = None,
) -> list[tuple[str, float]]:
    """Deterministic forward pass over the corpus in id order.

    Pairs are scored one at a time: a stacked matmul can round differently
    from a single-row one in the last ulp, and inference results must not
    depend on how pairs happen to be grouped. Never mutates parameters;
    alignment failures propagate with the pair id attached.
    """
    config = config or checkpoint.train_config
    ordered = sorted(corpus.pairs, key=lambda p: p.id)
    return [(p.id, score_pair(checkpoint, p, config)) for p in ordered]


# --- checkpoint persistence --------------------------------------------------
#
# Directory layout: config.json (encoder spec + head + train config),
# parameters.pt (state dicts), calibration.json and history.json when
# present. JSON files are human-readable; the parameter blob round-trips
# tensors bit-exactly.

CONFIG_FILE = "config.json"
PARAMETERS_FILE = "parameters.pt"
CALIBRATION_FILE = "calibration.json"
HISTORY_FILE = "history.json"


def save_checkpoint(checkpoint: Checkpoint, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config_doc = {
        "encoder": checkpoint.encoder_spec,
        "head": head_config_to_json(checkpoint.head_config),
        "train": train_config_to_json(checkpoint.train_config),
    }
    (directory / CONFIG_FILE).write_text(
        json.dumps(config_doc, indent=1) + "\n", encoding="utf-8"
    )
    torch.save(
        {
            "encoder": checkpoint.encoder.state_dict(),
            "head": checkpoint.head.state_dict(),
        },
        directory / PARAMETERS_FILE,
    )
    if checkpoint.calibration is not None:
        (directory / CALIBRATION_FILE).write_text(
            json.dumps(calibration_to_json(checkpoint.calibration), indent=1) + "\n",
            encoding="utf-8",
        )
    if checkpoint.history is not None:
        (directory / HISTORY_FILE).write_text(
            json.dumps(history_to_json(checkpoint.history), indent=1) + "\n",
            encoding="utf-8",
        )


def load_checkpoint(directory: str | Path) -> Checkpoint:
    directory = Path(directory)
    config_doc = json.loads((directory / CONFIG_FILE).read_text(encoding="utf-8"))
    encoder_spec = config_doc["encoder"]
    head_config = head_config_from_json(config_doc["head"])
    train_config = train_config_from_json(config_doc["train"])
    encoder = create_encoder(encoder_spec["name"], **encoder_spec.get("kwargs", {}))
    dtype = next(encoder.parameters()).dtype
    head = build_head(head_config, encoder.dimension, dtype=dtype)
    blob = torch.load(directory / PARAMETERS_FILE, weights_only=True)
    encoder.load_state_dict(blob["encoder"])
    head.load_state_dict(blob["head"])

    calibration = None
    cal_path = directory / CALIBRATION_FILE
    if cal_path.exists():
        calibration = calibration_from_json(
            json.loads(cal_path.read_text(encoding="utf-8"))
        )
    history = None
    hist_path = directory / HISTORY_FILE
    if hist_path.exists():
        history = history_from_json(json.loads(hist_path.read_text(encoding="utf-8")))
    return Checkpoint(
        encoder=encoder,
        head=head,
        encoder_spec=encoder_spec,
        head_config=head_config,
        train_config=train_config,
        calibration=calibration,
        history=history,
    )
