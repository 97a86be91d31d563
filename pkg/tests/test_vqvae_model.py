"""Quantized motion autoencoder: layers, quantizer, and full model."""

import numpy as np
import pytest
import torch

from collage.errors import ConfigurationError
from collage.vqvae import HierarchicalMotionVqvae, HvqConfig
from collage.vqvae.layers import CrossEntityAttention, LevelEncoder, MotionDecoder
from collage.vqvae.quantizer import VectorQuantizerEma


def small_config(**overrides) -> HvqConfig:
    base = dict(
        num_humans=2,
        num_objects=1,
        human_keypoints=5,
        object_keypoints=4,
        num_frames=16,
        levels=3,
        latent_dim=16,
        codebook_entries=8,
        downsamples=(2, 2, 1),
        conv_blocks=1,
        attention_heads=4,
    )
    base.update(overrides)
    return HvqConfig(**base)


def model_inputs(cfg: HvqConfig, batch: int = 2, seed: int = 0):
    gen = torch.Generator().manual_seed(seed)
    humans = torch.randn(batch, cfg.num_humans, cfg.num_frames, cfg.human_feature_dim, generator=gen)
    objects = torch.randn(batch, cfg.num_objects, cfg.num_frames, cfg.object_feature_dim, generator=gen)
    cues = torch.randn(batch, cfg.levels, 2, cfg.latent_dim, generator=gen)
    return humans, objects, cues


# ------------------------------------------------------------------- config


def test_config_level_lengths():
    cfg = small_config()
    assert [cfg.level_length(l) for l in (1, 2, 3)] == [8, 4, 4]
    assert cfg.finest_length == 8
    assert [cfg.upsample_to_finest(l) for l in (1, 2, 3)] == [1, 2, 2]


def test_config_validation():
    with pytest.raises(ConfigurationError):
        small_config(downsamples=(2, 2))  # wrong length for levels=3
    with pytest.raises(ConfigurationError):
        small_config(num_frames=18)  # not divisible by prod(downsamples)
    with pytest.raises(ConfigurationError):
        small_config(latent_dim=18)  # not divisible by heads
    with pytest.raises(ConfigurationError):
        small_config(kernel_size=4)
    with pytest.raises(ConfigurationError):
        HvqConfig(levels=0)


# ------------------------------------------------------------------- layers


def test_level_encoder_downsamples_time():
    enc = LevelEncoder(in_dim=6, dim=16, downsample=2, conv_blocks=1, kernel_size=3)
    out = enc(torch.randn(3, 10, 6))
    assert out.shape == (3, 5, 16)


def test_motion_decoder_upsamples_time():
    dec = MotionDecoder(dim=16, out_dim=9, upsample=2, conv_blocks=1, kernel_size=3)
    out = dec(torch.randn(3, 5, 16))
    assert out.shape == (3, 10, 9)


def test_attention_weights_are_row_stochastic():
    torch.manual_seed(0)
    attn = CrossEntityAttention(dim=16, heads=4)
    streams = [torch.randn(2, 6, 16) for _ in range(3)]
    _, weights = attn(streams, return_weights=True)
    assert set(weights) == {(i, j) for i in range(3) for j in range(3) if i != j}
    for w in weights.values():
        assert w.shape == (2, 4, 6, 6)
        torch.testing.assert_close(w.sum(dim=-1), torch.ones(2, 4, 6))


def test_attention_single_entity_is_layernorm():
    torch.manual_seed(1)
    attn = CrossEntityAttention(dim=16, heads=4)
    x = torch.randn(2, 6, 16)
    outs, weights = attn([x])
    torch.testing.assert_close(outs[0], attn.norm(x))
    assert weights == {}


def test_attention_propagates_cross_entity_influence():
    torch.manual_seed(2)
    attn = CrossEntityAttention(dim=16, heads=4)
    a = torch.randn(1, 6, 16)
    b = torch.randn(1, 6, 16)
    out_ab, _ = attn([a, b])
    out_ab2, _ = attn([a, b + 1.0])
    assert not torch.allclose(out_ab[0], out_ab2[0])


def test_attention_rejects_bad_heads():
    with pytest.raises(ConfigurationError):
        CrossEntityAttention(dim=10, heads=4)


# ---------------------------------------------------------------- quantizer


def test_quantizer_output_equals_selected_codeword():
    torch.manual_seed(3)
    q = VectorQuantizerEma(entries=8, dim=4)
    q.eval()
    x = torch.randn(10, 4)
    quantized, idx, _ = q(x)
    torch.testing.assert_close(quantized, q.embeddings[idx])
    assert idx.dtype == torch.long


def test_quantizer_straight_through_gradient_is_identity():
    torch.manual_seed(4)
    q = VectorQuantizerEma(entries=8, dim=4)
    q.eval()
    x = torch.randn(6, 4, requires_grad=True)
    quantized, _, _ = q(x)
    quantized.sum().backward()
    torch.testing.assert_close(x.grad, torch.ones_like(x))


def test_quantizer_perplexity_extremes():
    torch.manual_seed(5)
    q = VectorQuantizerEma(entries=8, dim=4)
    q.eval()
    # all rows identical -> a single code is used -> perplexity 1
    x = torch.randn(1, 4).repeat(16, 1)
    _, idx, perp = q(x)
    assert idx.unique().numel() == 1
    torch.testing.assert_close(perp, torch.tensor(1.0))


def test_identity_quantizer_bypasses():
    q = VectorQuantizerEma(entries=8, dim=4, identity=True)
    x = torch.randn(3, 5, 4)
    quantized, idx, perp = q(x)
    torch.testing.assert_close(quantized, x)
    assert idx.shape == (3, 5) and idx.eq(0).all()
    assert perp.item() == 8.0


def test_quantizer_ema_update_only_in_training():
    torch.manual_seed(6)
    q = VectorQuantizerEma(entries=8, dim=4)
    before = q.embeddings.clone()
    q.eval()
    q(torch.randn(32, 4))
    torch.testing.assert_close(q.embeddings, before)
    q.train()
    q(torch.randn(32, 4))
    assert not torch.allclose(q.embeddings, before)
    assert q.usage_count.sum().item() == 32.0


def test_quantizer_reseeds_dead_entries():
    torch.manual_seed(7)
    q = VectorQuantizerEma(entries=8, dim=4, min_usage=1.0)
    q.train()
    x = torch.zeros(16, 4)  # everything lands on one code
    q(x)
    dead_before = int((q.usage_count < 1.0).sum())
    assert dead_before == 7
    gen = torch.Generator().manual_seed(0)
    n = q.reseed_dead(torch.randn(16, 4), gen)
    assert n == 7
    q.reset_usage()
    assert q.usage_count.sum().item() == 0.0


def test_quantizer_validation():
    with pytest.raises(ConfigurationError):
        VectorQuantizerEma(entries=1, dim=4)
    with pytest.raises(ConfigurationError):
        VectorQuantizerEma(entries=8, dim=4, decay=1.0)
    q = VectorQuantizerEma(entries=8, dim=4)
    with pytest.raises(ConfigurationError):
        q(torch.randn(3, 5))


# -------------------------------------------------------------------- model


def test_forward_shapes_and_level_records():
    torch.manual_seed(8)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    model.eval()
    humans, objects, cues = model_inputs(cfg)
    out = model(humans, objects, cues)
    assert out.recon_humans.shape == humans.shape
    assert out.recon_objects.shape == objects.shape
    assert len(out.levels) == cfg.levels
    for l, lat in enumerate(out.levels, start=1):
        assert lat.level == l
        assert lat.length == cfg.level_length(l)
        assert lat.humans_q.shape == (2, cfg.num_humans, lat.length, cfg.latent_dim)
        assert lat.objects_q.shape == (2, cfg.num_objects, lat.length, cfg.latent_dim)
        assert lat.humans_idx.shape == (2, cfg.num_humans, lat.length)
        assert lat.humans_idx.dtype == torch.long


def test_forward_input_validation():
    torch.manual_seed(9)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    humans, objects, cues = model_inputs(cfg)
    with pytest.raises(ConfigurationError):
        model(humans[:, :1], objects, cues)
    with pytest.raises(ConfigurationError):
        model(humans[:, :, :8], objects[:, :, :8], cues)
    with pytest.raises(ConfigurationError):
        model(humans, objects, cues[:, :, :1])


def test_decode_invariant_to_level_order():
    torch.manual_seed(10)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    model.eval()
    humans, objects, cues = model_inputs(cfg)
    latents = model.encode(humans, objects, cues)
    fwd_h, fwd_o = model.decode(latents)
    rev_h, rev_o = model.decode(list(reversed(latents)))
    torch.testing.assert_close(fwd_h, rev_h, rtol=0.0, atol=0.0)
    torch.testing.assert_close(fwd_o, rev_o, rtol=0.0, atol=0.0)


def test_aggregate_levels_matches_manual_upsampling():
    torch.manual_seed(11)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    model.eval()
    humans, objects, cues = model_inputs(cfg)
    latents = model.encode(humans, objects, cues)
    agg = model.aggregate_levels(latents, "agent")
    manual = torch.zeros_like(latents[0].humans_q)
    for lat in latents:
        manual = manual + lat.humans_q.repeat_interleave(cfg.upsample_to_finest(lat.level), dim=2)
    torch.testing.assert_close(agg, manual)
    assert agg.shape == (2, cfg.num_humans, cfg.finest_length, cfg.latent_dim)


def test_cue_content_changes_encoding():
    torch.manual_seed(12)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    model.eval()
    humans, objects, cues = model_inputs(cfg)
    a = model.encode(humans, objects, cues)
    b = model.encode(humans, objects, cues + 0.5)
    assert not torch.allclose(a[0].humans_pre, b[0].humans_pre)


def test_reseed_dead_codes_counts(one_sample):
    torch.manual_seed(13)
    cfg = small_config(dead_code_min_usage=1e9)  # every entry counts as dead
    model = HierarchicalMotionVqvae(cfg)
    model.train()
    humans, objects, cues = model_inputs(cfg)
    latents = model.encode(humans, objects, cues)
    gen = torch.Generator().manual_seed(0)
    n = model.reseed_dead_codes(latents, gen)
    assert n == 2 * cfg.levels * cfg.codebook_entries


def test_model_construction_is_seed_deterministic():
    cfg = small_config()
    torch.manual_seed(14)
    m1 = HierarchicalMotionVqvae(cfg)
    torch.manual_seed(14)
    m2 = HierarchicalMotionVqvae(cfg)
    humans, objects, cues = model_inputs(cfg)
    m1.eval(), m2.eval()
    with torch.no_grad():
        o1 = m1(humans, objects, cues)
        o2 = m2(humans, objects, cues)
    torch.testing.assert_close(o1.recon_humans, o2.recon_humans, rtol=0.0, atol=0.0)
