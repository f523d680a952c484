import math

import pytest
import torch

from wic_toolkit import (
    CosineHead,
    CosineHeadConfig,
    DegenerateEmbeddingError,
    MlpHead,
    MlpHeadConfig,
    PairEmbedding,
    build_head,
    cosine_similarity,
    decide,
    parameter_count,
)
from wic_toolkit.heads import head_config_from_json, head_config_to_json

SIGMOID_1 = 1.0 / (1.0 + math.exp(-1.0))  # 0.7310585786300049


def emb(t1, t2, s1=None, s2=None):
    as_t = lambda v: None if v is None else torch.tensor(v, dtype=torch.float64)
    return PairEmbedding(as_t(t1), as_t(t2), as_t(s1), as_t(s2))


# --- cosine similarity -------------------------------------------------------


def test_cosine_hand_values():
    a = torch.tensor([1.0, 0.0], dtype=torch.float64)
    b = torch.tensor([0.0, 2.0], dtype=torch.float64)
    assert float(cosine_similarity(a, b)) == 0.0
    assert float(cosine_similarity(a, -a)) == -1.0
    assert float(cosine_similarity(a, 3.0 * a)) == 1.0
    c = float(cosine_similarity(torch.tensor([1.0, 1.0]).double(), a))
    assert abs(c - math.sqrt(0.5)) < 1e-15


def test_cosine_self_similarity_is_exactly_one():
    for seed in range(50):
        g = torch.Generator().manual_seed(seed)
        v = torch.randn(16, generator=g, dtype=torch.float64)
        assert float(cosine_similarity(v, v)) == 1.0


def test_cosine_clamped_to_unit_interval():
    g = torch.Generator().manual_seed(0)
    for _ in range(200):
        v = torch.randn(8, generator=g, dtype=torch.float64)
        w = v * (1 + 1e-16) + 1e-18
        assert -1.0 <= float(cosine_similarity(v, w)) <= 1.0


def test_cosine_zero_norm_raises_with_pair_id():
    v = torch.tensor([1.0, 2.0], dtype=torch.float64)
    z = torch.zeros(2, dtype=torch.float64)
    with pytest.raises(DegenerateEmbeddingError):
        cosine_similarity(v, z)
    with pytest.raises(DegenerateEmbeddingError, match="p.3"):
        cosine_similarity(
            torch.stack([v, z]), torch.stack([v, v]), ids=["p.2", "p.3"]
        )


# --- cosine head -------------------------------------------------------------


def test_cosine_head_relu_clips_negatives():
    head = CosineHead(CosineHeadConfig("relu"))
    a = torch.tensor([1.0, 0.0], dtype=torch.float64)
    assert float(head.score(emb([1.0, 0.0], [-1.0, 0.0]))) == 0.0
    assert float(head.score(emb([1.0, 0.0], [1.0, 0.0]))) == 1.0


def test_cosine_head_sigmoid_values():
    head = CosineHead(CosineHeadConfig("sigmoid"))
    assert float(head.score(emb([1.0, 0.0], [1.0, 0.0]))) == pytest.approx(SIGMOID_1, abs=1e-12)
    assert float(head.score(emb([1.0, 0.0], [-1.0, 0.0]))) == pytest.approx(1 - SIGMOID_1, abs=1e-12)
    assert float(head.score(emb([1.0, 0.0], [0.0, 1.0]))) == 0.5


def test_cosine_head_has_no_parameters():
    head = CosineHead(CosineHeadConfig("relu"))
    assert parameter_count(head) == 0
    assert list(head.parameters()) == []


def test_cosine_activation_validated():
    with pytest.raises(ValueError):
        CosineHeadConfig("tanh")


# --- mlp head ----------------------------------------------------------------


def test_mlp_shapes_and_range():
    head = MlpHead(dimension=8, config=MlpHeadConfig(), seed=0)
    t = torch.randn(5, 8, dtype=torch.float64)
    out = head.score_batch(t, t.flip(0))
    assert out.shape == (5,)
    assert bool(((out > 0) & (out < 1)).all())


def test_mlp_parameter_count_formula():
    for d in (4, 16, 768):
        plain = MlpHead(dimension=d, config=MlpHeadConfig(), seed=0)
        assert parameter_count(plain) == (2 * d) * 100 + 201
        wide = MlpHead(dimension=d, config=MlpHeadConfig(use_sentence_vectors=True), seed=0)
        assert parameter_count(wide) == (4 * d) * 100 + 201


def test_mlp_seed_reproducible():
    a = MlpHead(dimension=4, config=MlpHeadConfig(), seed=9)
    b = MlpHead(dimension=4, config=MlpHeadConfig(), seed=9)
    assert torch.equal(a.hidden.weight, b.hidden.weight)
    c = MlpHead(dimension=4, config=MlpHeadConfig(), seed=10)
    assert not torch.equal(a.hidden.weight, c.hidden.weight)


def test_mlp_init_bounds_and_zero_bias():
    head = MlpHead(dimension=50, config=MlpHeadConfig(), seed=0)
    bound = 1.0 / math.sqrt(head.in_dim)
    assert float(head.hidden.weight.detach().abs().max()) <= bound
    assert torch.equal(head.hidden.bias, torch.zeros_like(head.hidden.bias))
    assert torch.equal(head.output.bias, torch.zeros_like(head.output.bias))


def test_mlp_requires_sentence_vectors_when_configured():
    head = MlpHead(dimension=4, config=MlpHeadConfig(use_sentence_vectors=True), seed=0)
    t = torch.randn(2, 4, dtype=torch.float64)
    with pytest.raises(ValueError, match="sentence vectors"):
        head.score_batch(t, t)
    s = torch.randn(2, 4, dtype=torch.float64)
    assert head.score_batch(t, t, s, s).shape == (2,)


def test_mlp_input_order_is_s1_s2_t1_t2():
    head = MlpHead(dimension=2, config=MlpHeadConfig(use_sentence_vectors=True), seed=3)
    t1 = torch.tensor([[1.0, 2.0]], dtype=torch.float64)
    t2 = torch.tensor([[3.0, 4.0]], dtype=torch.float64)
    s1 = torch.tensor([[5.0, 6.0]], dtype=torch.float64)
    s2 = torch.tensor([[7.0, 8.0]], dtype=torch.float64)
    got = head.score_batch(t1, t2, s1, s2)
    x = torch.cat([s1, s2, t1, t2], dim=-1)
    manual = torch.sigmoid(head.output(torch.relu(head.hidden(x))).squeeze(-1))
    assert torch.equal(got, manual)


def test_mlp_rejects_wrong_width():
    head = MlpHead(dimension=4, config=MlpHeadConfig(), seed=0)
    t = torch.randn(2, 3, dtype=torch.float64)
    with pytest.raises(ValueError, match="dimension"):
        head.score_batch(t, t)


def test_score_matches_score_batch():
    head = MlpHead(dimension=6, config=MlpHeadConfig(), seed=1)
    g = torch.Generator().manual_seed(2)
    t1 = torch.randn(6, generator=g, dtype=torch.float64)
    t2 = torch.randn(6, generator=g, dtype=torch.float64)
    with torch.no_grad():
        single = float(head.score(emb(t1.tolist(), t2.tolist())))
        batched = float(head.score_batch(t1.unsqueeze(0), t2.unsqueeze(0))[0])
    assert single == batched


# --- config plumbing ----------------------------------------------------------


def test_head_config_json_round_trip():
    for config in (
        MlpHeadConfig(hidden_units=100, use_sentence_vectors=True),
        MlpHeadConfig(),
        CosineHeadConfig("sigmoid"),
        CosineHeadConfig("relu"),
    ):
        assert head_config_from_json(head_config_to_json(config)) == config


def test_build_head_dispatch():
    assert isinstance(build_head(MlpHeadConfig(), 4), MlpHead)
    assert isinstance(build_head(CosineHeadConfig(), 4), CosineHead)


def test_decide_is_strict():
    assert decide(0.51, 0.5) is True
    assert decide(0.5, 0.5) is False
    assert decide(0.5, 0.5, strict=False) is True
    assert decide(0.49, 0.5) is False
