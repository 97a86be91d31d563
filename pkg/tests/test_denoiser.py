"""Graph denoiser: masking semantics, cue gating, shapes, determinism."""

import pytest
import torch

from collage.diffusion.denoiser import (
    DenoiserConfig,
    GraphAttention,
    GraphDenoiser,
    TemporalConvSum,
    sinusoidal_embedding,
)
from collage.diffusion.graph import InteractionGraph
from collage.errors import ConfigurationError


def small_config(**overrides) -> DenoiserConfig:
    base = dict(
        feature_dim=8,
        num_nodes=3,
        levels=2,
        cue_token_dim=8,
        cue_tokens=3,
        seq_len=8,
        total_steps=10,
        blocks=2,
        channels=(16, 32),
        tcn_kernels=(3, 5),
        heads=4,
        pe_dim=8,
    )
    base.update(overrides)
    return DenoiserConfig(**base)


def denoiser_inputs(cfg: DenoiserConfig, batch: int = 2, seed: int = 0):
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(batch, cfg.feature_dim, cfg.num_nodes, cfg.seq_len, generator=gen)
    t = torch.randint(1, cfg.total_steps + 1, (batch,), generator=gen)
    tokens = torch.randn(batch, cfg.levels, cfg.cue_tokens, cfg.cue_token_dim, generator=gen)
    return x, t, tokens


# -------------------------------------------------------------------- graph


def test_interaction_graph_layout():
    g = InteractionGraph(num_agents=2, num_objects=1)
    assert g.num_nodes == 3
    assert g.agent_slice() == slice(0, 2)
    assert g.object_slice() == slice(2, 3)
    adj = g.adjacency()
    assert adj.shape == (3, 3)
    assert not adj.diagonal().any()
    assert adj.sum().item() == 6  # fully connected without self-loops
    back = InteractionGraph.from_dict(g.to_dict())
    assert back == g


def test_interaction_graph_validation():
    with pytest.raises(ConfigurationError):
        InteractionGraph(num_agents=-1, num_objects=1)
    with pytest.raises(ConfigurationError):
        InteractionGraph(num_agents=0, num_objects=0)
    with pytest.raises(ConfigurationError):
        InteractionGraph.from_dict({"num_agents": 2})


# ------------------------------------------------------------------- layers


def test_sinusoidal_embedding_shape_and_zero_step():
    emb = sinusoidal_embedding(torch.tensor([0.0, 3.0]), 8)
    assert emb.shape == (2, 8)
    torch.testing.assert_close(emb[0, :4], torch.zeros(4))
    torch.testing.assert_close(emb[0, 4:], torch.ones(4))
    assert not torch.allclose(emb[0], emb[1])
    with pytest.raises(ConfigurationError):
        sinusoidal_embedding(torch.tensor([1.0]), 7)


def test_temporal_conv_sum_shapes():
    block = TemporalConvSum(6, 12, (3, 5))
    out = block(torch.randn(4, 6, 10))
    assert out.shape == (4, 12, 10)
    assert (out >= 0).all()  # ReLU output


def test_graph_attention_isolated_nodes_pass_through_layernorm():
    torch.manual_seed(0)
    gat = GraphAttention(dim=16, heads=4)
    x = torch.randn(2, 3, 16)
    none = torch.zeros(3, 3, dtype=torch.bool)
    torch.testing.assert_close(gat(x, none), gat.norm(x))


def test_graph_attention_respects_mask():
    torch.manual_seed(1)
    gat = GraphAttention(dim=16, heads=4)
    x = torch.randn(1, 3, 16)
    # node 0 hears only node 1
    adj = torch.tensor([[False, True, False], [True, False, True], [True, True, False]])
    base = gat(x, adj)
    x2 = x.clone()
    x2[0, 2] += 1.0  # perturb node 2, which node 0 never attends to
    out2 = gat(x2, adj)
    torch.testing.assert_close(out2[0, 0], base[0, 0], rtol=0.0, atol=0.0)
    assert not torch.allclose(out2[0, 1], base[0, 1])


def test_graph_attention_validates_adjacency_shape():
    gat = GraphAttention(dim=16, heads=4)
    with pytest.raises(ConfigurationError):
        gat(torch.randn(1, 3, 16), torch.zeros(2, 2, dtype=torch.bool))
    with pytest.raises(ConfigurationError):
        GraphAttention(dim=10, heads=4)


# ----------------------------------------------------------------- denoiser


def test_denoiser_output_shape_matches_input():
    torch.manual_seed(2)
    cfg = small_config()
    model = GraphDenoiser(cfg)
    model.eval()
    x, t, tokens = denoiser_inputs(cfg)
    out = model(x, t, tokens)
    assert out.shape == x.shape


def test_denoiser_input_validation():
    torch.manual_seed(3)
    cfg = small_config()
    model = GraphDenoiser(cfg)
    x, t, tokens = denoiser_inputs(cfg)
    with pytest.raises(ConfigurationError):
        model(x[:, :4], t, tokens)
    with pytest.raises(ConfigurationError):
        model(x, torch.zeros(2, dtype=torch.long), tokens)  # t < 1
    with pytest.raises(ConfigurationError):
        model(x, torch.full((2,), cfg.total_steps + 1), tokens)
    with pytest.raises(ConfigurationError):
        model(x, t, tokens[:, :, :1])


def test_denoiser_isolated_nodes_ignore_other_entities():
    """With an empty adjacency every node is a closed system: perturbing one
    node's input must leave every other node's output bit-identical."""
    torch.manual_seed(4)
    cfg = small_config()
    model = GraphDenoiser(cfg)
    model.eval()
    x, t, tokens = denoiser_inputs(cfg)
    isolated = torch.zeros(cfg.num_nodes, cfg.num_nodes, dtype=torch.bool)
    with torch.no_grad():
        base = model(x, t, tokens, adjacency=isolated)
        x2 = x.clone()
        x2[:, :, 2, :] += 1.0
        out2 = model(x2, t, tokens, adjacency=isolated)
    torch.testing.assert_close(out2[:, :, :2], base[:, :, :2], rtol=0.0, atol=0.0)
    assert not torch.allclose(out2[:, :, 2], base[:, :, 2])


def test_denoiser_connected_nodes_share_information():
    torch.manual_seed(5)
    cfg = small_config()
    model = GraphDenoiser(cfg)
    model.eval()
    x, t, tokens = denoiser_inputs(cfg)
    full = ~torch.eye(cfg.num_nodes, dtype=torch.bool)
    with torch.no_grad():
        base = model(x, t, tokens, adjacency=full)
        x2 = x.clone()
        x2[:, :, 2, :] += 1.0
        out2 = model(x2, t, tokens, adjacency=full)
    assert not torch.allclose(out2[:, :, 0], base[:, :, 0])


def test_zero_gate_erases_cue_content_dependence():
    """With the gate buffer pinned to zero the output may not depend on cue
    token content; with the unit gate it must."""
    torch.manual_seed(6)
    cfg = small_config()
    model = GraphDenoiser(cfg)
    model.eval()
    x, t, tokens = denoiser_inputs(cfg)
    other_tokens = tokens + torch.randn(tokens.shape, generator=torch.Generator().manual_seed(7))
    with torch.no_grad():
        model.gamma.lam.zero_()
        gated_a = model(x, t, tokens)
        gated_b = model(x, t, other_tokens)
        torch.testing.assert_close(gated_a, gated_b, rtol=0.0, atol=0.0)
        model.gamma.lam.fill_(1.0)
        open_a = model(x, t, tokens)
        open_b = model(x, t, other_tokens)
    assert not torch.allclose(open_a, open_b)


def test_unmodulated_denoiser_is_time_uniform_in_gates():
    torch.manual_seed(8)
    cfg = small_config(modulate=False)
    model = GraphDenoiser(cfg)
    gates_early = model.gamma(torch.tensor([1.0]), cfg.total_steps)
    gates_late = model.gamma(torch.tensor([float(cfg.total_steps)]), cfg.total_steps)
    torch.testing.assert_close(gates_early, gates_late)


def test_denoiser_is_seed_deterministic():
    cfg = small_config()
    x, t, tokens = denoiser_inputs(cfg)
    torch.manual_seed(9)
    m1 = GraphDenoiser(cfg)
    torch.manual_seed(9)
    m2 = GraphDenoiser(cfg)
    m1.eval(), m2.eval()
    with torch.no_grad():
        torch.testing.assert_close(m1(x, t, tokens), m2(x, t, tokens), rtol=0.0, atol=0.0)


def test_denoiser_config_validation():
    with pytest.raises(ConfigurationError):
        small_config(channels=(16,))  # one width for two blocks
    with pytest.raises(ConfigurationError):
        small_config(channels=(18, 32))  # not divisible by heads
    with pytest.raises(ConfigurationError):
        small_config(tcn_kernels=(4,))
    with pytest.raises(ConfigurationError):
        small_config(pe_dim=7)
    with pytest.raises(ConfigurationError):
        small_config(seq_len=9)  # not divisible by the downsampling stride
