"""Turning sentence pairs into fixed-size target-word vectors.

The pipeline per sentence is: encode to per-sub-token vectors with
character offsets, find every sub-token whose offset interval overlaps the
target-word span, and max-pool the selected vectors elementwise into one
embedding. Encoders also expose a sentence-summary vector (the
begin-of-sequence position) for heads that want whole-sentence context.
"""

from __future__ import annotations

import abc
import hashlib
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .datasets import WicPair
from .errors import AlignmentError

Span = tuple[int, int]


@dataclass
class EncoderOutput:
    """Per-sub-token vectors plus a sentence-summary vector.

    ``offsets[i]`` is the half-open character interval of sub-token ``i``
    in the original sentence; special tokens carry an empty ``(0, 0)``
    interval and never participate in span alignment.
    """

    subtoken_vectors: torch.Tensor  # [n_subtokens, d]
    sentence_vector: torch.Tensor  # [d]
    offsets: tuple[Span, ...]

    def __post_init__(self):
        if self.subtoken_vectors.shape[0] != len(self.offsets):
            raise ValueError(
                f"{self.subtoken_vectors.shape[0]} sub-token vectors but "
                f"{len(self.offsets)} offsets"
            )


class ContextualEncoder(nn.Module, abc.ABC):
    """Interface every encoder adapter implements.

    ``encode`` must be deterministic given the module parameters, keep the
    sentence-summary position under truncation, and produce vectors of a
    constant dimension. Trainable parameters are exposed through the usual
    ``nn.Module`` mechanism.
    """

    @property
    @abc.abstractmethod
    def dimension(self) -> int:
        """Output vector dimension d."""

    @abc.abstractmethod
    def encode(self, sentence: str, max_tokens: int) -> EncoderOutput:
        """Encode one sentence, truncated to at most ``max_tokens`` positions."""


@dataclass
class PairEmbedding:
    """Pooled target vectors (and optional sentence vectors) for one pair."""

    target1: torch.Tensor
    target2: torch.Tensor
    sentence1_vec: Optional[torch.Tensor] = None
    sentence2_vec: Optional[torch.Tensor] = None

    def __post_init__(self):
        d = self.target1.shape[-1]
        for name in ("target2", "sentence1_vec", "sentence2_vec"):
            v = getattr(self, name)
            if v is not None and v.shape[-1] != d:
                raise ValueError(f"{name} has dimension {v.shape[-1]}, expected {d}")


def align_target_subtokens(output: EncoderOutput, span: Span) -> tuple[int, ...]:
    """Indices of all sub-tokens whose offsets overlap the target span.

    Overlap of half-open intervals: ``max(starts) < min(ends)``. Special
    tokens with empty intervals never overlap. Raises
    :class:`AlignmentError` when nothing overlaps, e.g. when truncation
    dropped the target word.
    """
    start, end = span
    hits = tuple(
        i
        for i, (s, e) in enumerate(output.offsets)
        if max(s, start) < min(e, end)
    )
    if not hits:
        raise AlignmentError(
            f"no sub-token overlaps span [{start},{end}); the target may "
            "have been truncated away"
        )
    return hits


def max_pool(vectors: torch.Tensor | Sequence[torch.Tensor], indices: Iterable[int]) -> torch.Tensor:
    """Elementwise maximum over the selected vectors."""
    if not isinstance(vectors, torch.Tensor):
        vectors = torch.stack(list(vectors))
    idx = list(indices)
    if not idx:
        raise ValueError("max_pool requires a non-empty index set")
    n = vectors.shape[0]
    if any(i < 0 or i >= n for i in idx):
        raise ValueError(f"index out of range for {n} vectors: {idx}")
    return vectors[idx].max(dim=0).values


def encode_pair(
    encoder: ContextualEncoder,
    pair: WicPair,
    max_tokens: int,
    want_sentence_vectors: bool = False,
) -> PairEmbedding:
    """Encode both sentences of a pair and pool the target sub-tokens."""
    out1 = encoder.encode(pair.sentence1, max_tokens)
    out2 = encoder.encode(pair.sentence2, max_tokens)
    try:
        idx1 = align_target_subtokens(out1, pair.span1)
        idx2 = align_target_subtokens(out2, pair.span2)
    except AlignmentError as exc:
        raise AlignmentError(f"pair {pair.id!r}: {exc}") from None
    return PairEmbedding(
        target1=max_pool(out1.subtoken_vectors, idx1),
        target2=max_pool(out2.subtoken_vectors, idx2),
        sentence1_vec=out1.sentence_vector if want_sentence_vectors else None,
        sentence2_vec=out2.sentence_vector if want_sentence_vectors else None,
    )


class ToyEncoder(ContextualEncoder):
    """Deterministic trainable encoder for CPU-scale tests and demos.

    Sentences are whitespace-tokenized with per-token character offsets. A
    token's input features are a seeded hash embedding of its string plus
    a smaller hash embedding of its position, so identical (seed, token,
    position) triples always produce identical features across processes.
    The only trainable part is an affine map into the output space
    followed by tanh, which keeps every output smooth for gradient
    checking.

    Position 0 is a begin-of-sequence summary slot with an empty offset:
    its features are the mean of the token features, and its output vector
    doubles as the sentence vector. Truncation to ``max_tokens`` keeps the
    summary slot plus the first ``max_tokens - 1`` tokens.

    ``encode`` only reads parameters and a memoized feature table, so
    concurrent calls are safe.
    """

    def __init__(
        self,
        dimension: int,
        seed: int,
        feature_dim: int = 64,
        position_scale: float = 0.1,
        dtype: torch.dtype = torch.float64,
    ):
        if dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {dimension}")
        super().__init__()
        self._dimension = dimension
        self.seed = seed
        self.feature_dim = feature_dim
        self.position_scale = position_scale
        self.dtype = dtype
        self.proj = nn.Linear(feature_dim, dimension, dtype=dtype)
        gen = torch.Generator().manual_seed(seed)
        bound = 1.0 / np.sqrt(feature_dim)
        with torch.no_grad():
            self.proj.weight.uniform_(-bound, bound, generator=gen)
            self.proj.bias.zero_()
        self._feature_cache: dict[tuple[str, int], torch.Tensor] = {}

    @property
    def dimension(self) -> int:
        return self._dimension

    def init_kwargs(self) -> dict:
        """Constructor arguments needed to rebuild this encoder."""
        return {
            "dimension": self._dimension,
            "seed": self.seed,
            "feature_dim": self.feature_dim,
            "position_scale": self.position_scale,
        }

    def _hash_unit_vector(self, *parts: str) -> np.ndarray:
        digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(self.feature_dim)
        return v / np.linalg.norm(v)

    def _token_features(self, token: str, position: int) -> torch.Tensor:
        key = (token, position)
        cached = self._feature_cache.get(key)
        if cached is None:
            v = self._hash_unit_vector("tok", str(self.seed), token)
            v = v + self.position_scale * self._hash_unit_vector(
                "pos", str(self.seed), str(position)
            )
            cached = torch.as_tensor(v, dtype=self.dtype)
            self._feature_cache[key] = cached
        return cached

    def encode(self, sentence: str, max_tokens: int) -> EncoderOutput:
        if max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
        matches = list(re.finditer(r"\S+", sentence))[: max_tokens - 1]
        token_feats = [
            self._token_features(m.group(), i) for i, m in enumerate(matches)
        ]
        if token_feats:
            stacked = torch.stack(token_feats)
            bos = stacked.mean(dim=0)
            features = torch.cat([bos.unsqueeze(0), stacked])
        else:
            features = torch.zeros(1, self.feature_dim, dtype=self.dtype)
        vectors = torch.tanh(self.proj(features))
        offsets: tuple[Span, ...] = ((0, 0),) + tuple(
            (m.start(), m.end()) for m in matches
        )
        return EncoderOutput(
            subtoken_vectors=vectors,
            sentence_vector=vectors[0],
            offsets=offsets,
        )


def toy_encoder(dimension: int, seed: int, **kwargs) -> ToyEncoder:
    """Factory matching the encoder registry calling convention."""
    return ToyEncoder(dimension=dimension, seed=seed, **kwargs)
