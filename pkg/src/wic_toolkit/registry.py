"""Encoder registry: build encoders from a name plus keyword arguments."""

from __future__ import annotations

from typing import Callable

from .encoding import ContextualEncoder, ToyEncoder
from .errors import EncoderRegistryError

_PRETRAINED_NAMES = (
    "bert-base-cased",
    "bert-large-cased",
    "xlm-roberta-base",
    "xlm-roberta-large",
)


def _toy_factory(**kwargs) -> ContextualEncoder:
    return ToyEncoder(**kwargs)


def _pretrained_factory(model_name: str) -> Callable[..., ContextualEncoder]:
    def factory(**kwargs) -> ContextualEncoder:
        from .hf import HuggingFaceEncoder  # deferred: optional dependency

        return HuggingFaceEncoder(model_name=model_name, **kwargs)

    return factory


_REGISTRY: dict[str, Callable[..., ContextualEncoder]] = {
    "toy": _toy_factory,
    **{name: _pretrained_factory(name) for name in _PRETRAINED_NAMES},
}


def available_encoders() -> list[str]:
    return sorted(_REGISTRY)


def create_encoder(name: str, **kwargs) -> ContextualEncoder:
    """Instantiate a registered encoder; unknown names list the known ones."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise EncoderRegistryError(
            f"unknown encoder {name!r}; known encoders: "
            f"{', '.join(available_encoders())}"
        ) from None
    return factory(**kwargs)
