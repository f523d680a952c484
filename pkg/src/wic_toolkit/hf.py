"""Adapter wrapping HuggingFace transformer encoders.

Used for full-scale runs with pretrained weights; nothing here is needed
for the CPU-scale test suite. The model cache directory can be pointed
somewhere persistent with the ``WIC_ENCODER_CACHE`` environment variable.

The sentence-summary vector is always the begin-of-sequence position
(``[CLS]`` for BERT, ``<s>`` for XLM-RoBERTa). Fast tokenizers report
special tokens with empty ``(0, 0)`` offsets, which is exactly what span
alignment expects.

``encode`` on the same instance is not safe to call concurrently with an
optimizer step on its parameters; serialize training-time access.
"""

from __future__ import annotations

import os

import torch

from .encoding import ContextualEncoder, EncoderOutput

CACHE_ENV_VAR = "WIC_ENCODER_CACHE"


class HuggingFaceEncoder(ContextualEncoder):
    def __init__(self, model_name: str, cache_dir: str | None = None, device: str = "cpu"):
        super().__init__()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ImportError(
                "the 'transformers' package is required for pretrained "
                "encoders; install wic-toolkit[hf]"
            ) from exc
        cache_dir = cache_dir or os.environ.get(CACHE_ENV_VAR)
        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(
            model_name, cache_dir=cache_dir, use_fast=True
        )
        self.model = AutoModel.from_pretrained(model_name, cache_dir=cache_dir)
        self.model.to(device)
        self.device = device

    @property
    def dimension(self) -> int:
        return self.model.config.hidden_size

    def init_kwargs(self) -> dict:
        return {"model_name": self.model_name}

    def encode(self, sentence: str, max_tokens: int) -> EncoderOutput:
        enc = self.tokenizer(
            sentence,
            truncation=True,
            max_length=max_tokens,
            return_offsets_mapping=True,
            return_tensors="pt",
        )
        offsets = tuple(
            (int(s), int(e)) for s, e in enc.pop("offset_mapping")[0].tolist()
        )
        enc = {k: v.to(self.device) for k, v in enc.items()}
        hidden = self.model(**enc).last_hidden_state[0]
        return EncoderOutput(
            subtoken_vectors=hidden,
            sentence_vector=hidden[0],
            offsets=offsets,
        )
