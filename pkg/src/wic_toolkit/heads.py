"""Classification heads mapping a pair embedding to a same-meaning score.

Two heads are provided. The MLP head concatenates the two target vectors
(optionally prefixed by the two sentence vectors), runs them through one
ReLU hidden layer and a sigmoid output, and is decided at a fixed 0.5
threshold. The cosine head scores the pair by the cosine similarity of
the two target vectors passed through ReLU or sigmoid; it owns zero
trainable parameters, so fine-tuning it adjusts only the encoder, and its
decision threshold is calibrated on validation data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import torch
from torch import nn

from .encoding import PairEmbedding
from .errors import DegenerateEmbeddingError

#: Norms below this are treated as a broken upstream embedding.
ZERO_NORM_EPSILON = 1e-12

ACTIVATIONS = ("relu", "sigmoid")


@dataclass(frozen=True)
class MlpHeadConfig:
    hidden_units: int = 100
    use_sentence_vectors: bool = False

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError(f"hidden_units must be >= 1, got {self.hidden_units}")


@dataclass(frozen=True)
class CosineHeadConfig:
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )


HeadConfig = Union[MlpHeadConfig, CosineHeadConfig]


def head_config_to_json(config: HeadConfig) -> dict:
    if isinstance(config, MlpHeadConfig):
        return {
            "type": "mlp",
            "hidden_units": config.hidden_units,
            "use_sentence_vectors": config.use_sentence_vectors,
        }
    return {"type": "cosine", "activation": config.activation}


def head_config_from_json(doc: dict) -> HeadConfig:
    kind = doc.get("type")
    if kind == "mlp":
        return MlpHeadConfig(
            hidden_units=doc["hidden_units"],
            use_sentence_vectors=doc["use_sentence_vectors"],
        )
    if kind == "cosine":
        return CosineHeadConfig(activation=doc["activation"])
    raise ValueError(f"unknown head type {kind!r}")


def cosine_similarity(
    t1: torch.Tensor,
    t2: torch.Tensor,
    ids: Optional[Sequence[str]] = None,
) -> torch.Tensor:
    """Cosine of the angle between target vectors, batched over leading dims.

    Raises :class:`DegenerateEmbeddingError` when any vector has
    (near-)zero norm, naming the offending pair when ids are given. The
    result is clamped to [-1, 1] to remove floating-point overshoot, so
    downstream activations stay inside their contractual ranges.
    """
    n1 = torch.linalg.vector_norm(t1, dim=-1)
    n2 = torch.linalg.vector_norm(t2, dim=-1)
    bad = (n1 < ZERO_NORM_EPSILON) | (n2 < ZERO_NORM_EPSILON)
    if bool(bad.any()):
        index = int(bad.reshape(-1).nonzero()[0])
        which = f"pair {ids[index]!r}" if ids is not None else f"row {index}"
        raise DegenerateEmbeddingError(
            f"{which}: target vector has near-zero norm; cosine undefined"
        )
    c = (t1 * t2).sum(dim=-1) / (n1 * n2)
    c = c.clamp(-1.0, 1.0)
    # Identical vectors must score exactly 1: the quotient above can land
    # one ulp short of it. Mathematically the substitution is exact and
    # cosine's gradient at t1 == t2 is zero, matching the constant branch.
    equal = (t1 == t2).all(dim=-1)
    if bool(equal.any()):
        c = torch.where(equal, torch.ones_like(c), c)
    return c


class CosineHead(nn.Module):
    """Score = activation(cosine(target1, target2)); no trainable weights."""

    def __init__(self, config: CosineHeadConfig):
        super().__init__()
        self.config = config

    needs_sentence_vectors = False

    def score_batch(
        self,
        t1: torch.Tensor,
        t2: torch.Tensor,
        s1: Optional[torch.Tensor] = None,
        s2: Optional[torch.Tensor] = None,
        ids: Optional[Sequence[str]] = None,
    ) -> torch.Tensor:
        c = cosine_similarity(t1, t2, ids=ids)
        if self.config.activation == "relu":
            return c.clamp(min=0.0)
        return torch.sigmoid(c)

    forward = score_batch

    def score(self, emb: PairEmbedding, pair_id: Optional[str] = None) -> torch.Tensor:
        ids = [pair_id] if pair_id is not None else None
        return self.score_batch(
            emb.target1.unsqueeze(0), emb.target2.unsqueeze(0), ids=ids
        )[0]


class MlpHead(nn.Module):
    """One-hidden-layer perceptron over concatenated pair vectors.

    Input is ``(target1, target2)`` or, with sentence vectors enabled,
    ``(sentence1, sentence2, target1, target2)``. Weights start uniform in
    ``±1/sqrt(fan_in)`` from the given seed; biases start at zero.
    """

    def __init__(
        self,
        dimension: int,
        config: MlpHeadConfig,
        seed: int = 0,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        self.config = config
        self.dimension = dimension
        self.in_dim = (4 if config.use_sentence_vectors else 2) * dimension
        self.hidden = nn.Linear(self.in_dim, config.hidden_units, dtype=dtype)
        self.output = nn.Linear(config.hidden_units, 1, dtype=dtype)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for layer in (self.hidden, self.output):
                bound = 1.0 / np.sqrt(layer.in_features)
                layer.weight.uniform_(-bound, bound, generator=gen)
                layer.bias.zero_()

    @property
    def needs_sentence_vectors(self) -> bool:
        return self.config.use_sentence_vectors

    def score_batch(
        self,
        t1: torch.Tensor,
        t2: torch.Tensor,
        s1: Optional[torch.Tensor] = None,
        s2: Optional[torch.Tensor] = None,
        ids: Optional[Sequence[str]] = None,
    ) -> torch.Tensor:
        if self.config.use_sentence_vectors:
            if s1 is None or s2 is None:
                raise ValueError("this head requires sentence vectors")
            x = torch.cat([s1, s2, t1, t2], dim=-1)
        else:
            x = torch.cat([t1, t2], dim=-1)
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"input dimension {x.shape[-1]} does not match head "
                f"in_dim {self.in_dim}"
            )
        h = torch.relu(self.hidden(x))
        return torch.sigmoid(self.output(h).squeeze(-1))

    forward = score_batch

    def score(self, emb: PairEmbedding, pair_id: Optional[str] = None) -> torch.Tensor:
        unsq = lambda v: None if v is None else v.unsqueeze(0)
        return self.score_batch(
            emb.target1.unsqueeze(0),
            emb.target2.unsqueeze(0),
            unsq(emb.sentence1_vec),
            unsq(emb.sentence2_vec),
        )[0]


Head = Union[MlpHead, CosineHead]


def build_head(
    config: HeadConfig,
    dimension: int,
    seed: int = 0,
    dtype: torch.dtype = torch.float64,
) -> Head:
    if isinstance(config, MlpHeadConfig):
        return MlpHead(dimension, config, seed=seed, dtype=dtype)
    return CosineHead(config)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def decide(score: float, threshold: float, strict: bool = True) -> bool:
    """True iff the score clears the threshold (strictly, by default)."""
    return score > threshold if strict else score >= threshold
