"""Contrastive codebook-cue association: loss oracle, retrieval, training."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from collage.assoc import (
    AssociationConfig,
    AssociationEmbedders,
    association_loss,
    augment_cues,
    combined_level_cues,
    top_u_codes,
    train_association,
    union_codebooks,
)
from collage.assoc.train import LevelPositives, mine_positives, retrieval_accuracy
from collage.errors import ConfigurationError
from collage.vqvae import HierarchicalMotionVqvae, HvqConfig
from collage.vqvae.train import MotionTensors, encode_all
from tests.test_vqvae_losses import fake_level
from tests.test_vqvae_model import model_inputs, small_config


def make_embedders(levels=2, code_dim=6, text_dim=5, seed=0, **cfg) -> AssociationEmbedders:
    torch.manual_seed(seed)
    config = AssociationConfig(embed_dim=8, hidden_dim=16, **cfg)
    return AssociationEmbedders(levels=levels, code_dim=code_dim, text_dim=text_dim, config=config)


def motion_tensors(cfg: HvqConfig, n: int = 6, seed: int = 0) -> MotionTensors:
    from collage.data import NormalizationStats

    gen = torch.Generator().manual_seed(seed)
    return MotionTensors(
        humans=torch.randn(n, cfg.num_humans, cfg.num_frames, cfg.human_feature_dim, generator=gen),
        objects=torch.randn(n, cfg.num_objects, cfg.num_frames, cfg.object_feature_dim, generator=gen),
        cues=torch.randn(n, cfg.levels, 2, cfg.latent_dim, generator=gen),
        human_stats=NormalizationStats(
            kind="agent", mean=np.zeros(cfg.human_feature_dim), std=np.ones(cfg.human_feature_dim)
        ),
        object_stats=NormalizationStats(
            kind="object", mean=np.zeros(cfg.object_feature_dim), std=np.ones(cfg.object_feature_dim)
        ),
    )


# --------------------------------------------------------------------- loss


def test_association_loss_matches_manual_infonce():
    emb = make_embedders(seed=1)
    gen = torch.Generator().manual_seed(2)
    codebook = torch.randn(10, 6, generator=gen)
    cues = torch.randn(4, 5, generator=gen)
    pos = torch.tensor([0, 3, 9, 3])
    got = association_loss(emb, 1, codebook, cues, pos)
    ce = F.normalize(emb.embed_codes(1, codebook), dim=-1)
    cu = F.normalize(emb.embed_cue(1, cues), dim=-1)
    logits = cu @ ce.T / emb.config.temperature
    manual = F.cross_entropy(logits, pos)
    torch.testing.assert_close(got, manual)


def test_association_loss_weighted_matches_manual():
    emb = make_embedders(seed=3)
    gen = torch.Generator().manual_seed(4)
    codebook = torch.randn(10, 6, generator=gen)
    cues = torch.randn(4, 5, generator=gen)
    pos = torch.tensor([1, 2, 3, 4])
    w = torch.tensor([1.0, 2.0, 3.0, 4.0])
    got = association_loss(emb, 1, codebook, cues, pos, weights=w)
    ce = F.normalize(emb.embed_codes(1, codebook), dim=-1)
    cu = F.normalize(emb.embed_cue(1, cues), dim=-1)
    logits = cu @ ce.T / emb.config.temperature
    per_pair = F.cross_entropy(logits, pos, reduction="none")
    manual = (per_pair * (w / w.sum())).sum()
    torch.testing.assert_close(got, manual)


def test_association_loss_rejects_bad_positives():
    emb = make_embedders(seed=5)
    codebook = torch.randn(10, 6)
    cues = torch.randn(2, 5)
    with pytest.raises(ConfigurationError):
        association_loss(emb, 1, codebook, cues, torch.tensor([0, 10]))
    with pytest.raises(ConfigurationError):
        association_loss(emb, 1, codebook, cues, torch.tensor([-1, 0]))


def test_association_loss_decreases_under_training():
    emb = make_embedders(seed=6)
    gen = torch.Generator().manual_seed(7)
    codebook = torch.randn(8, 6, generator=gen)
    cues = torch.randn(8, 5, generator=gen)
    pos = torch.arange(8)
    opt = torch.optim.Adam(emb.parameters(), lr=1e-2)
    first = association_loss(emb, 1, codebook, cues, pos).item()
    for _ in range(50):
        opt.zero_grad()
        loss = association_loss(emb, 1, codebook, cues, pos)
        loss.backward()
        opt.step()
    assert loss.item() < first


# ---------------------------------------------------------------- retrieval


def test_top_u_matches_cosine_ranking_oracle():
    emb = make_embedders(seed=8)
    gen = torch.Generator().manual_seed(9)
    codebook = torch.randn(12, 6, generator=gen)
    cue = torch.randn(5, generator=gen)
    got = top_u_codes(emb, 2, codebook, cue, u=4)
    with torch.no_grad():
        ce = F.normalize(emb.embed_codes(2, codebook), dim=-1)
        cu = F.normalize(emb.embed_cue(2, cue.reshape(1, -1)), dim=-1)
        sims = (cu @ ce.T).squeeze(0).numpy()
    expected = np.argsort(-sims, kind="stable")[:4]
    np.testing.assert_array_equal(got.numpy(), expected)


def test_top_u_ties_break_to_lowest_index():
    emb = make_embedders(seed=10)
    row = torch.randn(1, 6)
    codebook = row.repeat(7, 1)  # identical rows -> identical similarities
    cue = torch.randn(5)
    got = top_u_codes(emb, 1, codebook, cue, u=3)
    np.testing.assert_array_equal(got.numpy(), [0, 1, 2])


def test_top_u_validates_u():
    emb = make_embedders(seed=11)
    codebook = torch.randn(4, 6)
    cue = torch.randn(5)
    with pytest.raises(ConfigurationError):
        top_u_codes(emb, 1, codebook, cue, u=0)
    with pytest.raises(ConfigurationError):
        top_u_codes(emb, 1, codebook, cue, u=5)


def test_embedders_validate_level():
    emb = make_embedders(levels=2)
    with pytest.raises(ConfigurationError):
        emb.embed_codes(0, torch.randn(2, 6))
    with pytest.raises(ConfigurationError):
        emb.embed_cue(3, torch.randn(2, 5))


# ------------------------------------------------------------------- mining


def test_mine_positives_counts_union_usage():
    humans_idx = torch.tensor([[[0, 0], [1, 2]], [[3, 3], [3, 3]]])  # [N=2, n=2, K=2]
    objects_idx = torch.tensor([[[1, 1]], [[0, 2]]])  # [N=2, m=1, K=2]
    lv = fake_level(1, torch.zeros(2, 2, 2, 4), torch.zeros(2, 1, 2, 4))
    lv.humans_idx, lv.objects_idx = humans_idx, objects_idx
    (mined,) = mine_positives([lv], entries=4)
    # sample 0: humans use {0 x2, 1, 2}, object codes 1 -> union 5 x2; 6 slots
    m0 = mined.sample_idx == 0
    got = {int(c): float(w) for c, w in zip(mined.code_idx[m0], mined.weight[m0])}
    assert got == pytest.approx({0: 2 / 6, 1: 1 / 6, 2: 1 / 6, 5: 2 / 6})
    # sample 1: humans all 3, objects 0 and 2 -> union 4, 6
    m1 = mined.sample_idx == 1
    got1 = {int(c): float(w) for c, w in zip(mined.code_idx[m1], mined.weight[m1])}
    assert got1 == pytest.approx({3: 4 / 6, 4: 1 / 6, 6: 1 / 6})


def test_union_codebooks_stack_human_then_object():
    torch.manual_seed(12)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    books = union_codebooks(model)
    assert len(books) == cfg.levels
    for l, book in enumerate(books):
        assert book.shape == (2 * cfg.codebook_entries, cfg.latent_dim)
        torch.testing.assert_close(book[: cfg.codebook_entries], model.human_quantizers[l].embeddings)
        torch.testing.assert_close(book[cfg.codebook_entries :], model.object_quantizers[l].embeddings)
        assert not book.requires_grad


def test_retrieval_accuracy_bounds_and_perfect_case():
    emb = make_embedders(levels=1, seed=13)
    codebook = torch.randn(6, 6)
    cues = torch.randn(2, 1, 5)
    pos = LevelPositives(
        sample_idx=torch.tensor([0, 1]),
        code_idx=torch.tensor([2, 4]),
        weight=torch.tensor([1.0, 1.0]),
    )
    acc = retrieval_accuracy(emb, [codebook], cues, [pos], u=6)
    assert acc == 1.0  # u covers the whole codebook
    acc1 = retrieval_accuracy(emb, [codebook], cues, [pos], u=1)
    assert 0.0 <= acc1 <= 1.0


# ----------------------------------------------------------------- training


def test_train_association_freezes_autoencoder():
    torch.manual_seed(14)
    cfg = small_config()
    model = HierarchicalMotionVqvae(cfg)
    tensors = motion_tensors(cfg)
    before = [p.detach().clone() for p in model.parameters()]
    buf_before = [b.detach().clone() for b in model.buffers()]
    result = train_association(
        model, tensors, AssociationConfig(embed_dim=8, hidden_dim=16, steps=5, batch_pairs=16, top_u=2), seed=21
    )
    for p, q in zip(model.parameters(), before):
        torch.testing.assert_close(p, q, rtol=0.0, atol=0.0)
    for b, c in zip(model.buffers(), buf_before):
        torch.testing.assert_close(b, c, rtol=0.0, atol=0.0)
    assert 0.0 <= result.retrieval_accuracy <= 1.0
    assert result.history and result.history[0]["stage"] == "assoc"
    assert len(result.codebooks) == cfg.levels


def test_train_association_is_seed_deterministic():
    cfg = small_config()
    torch.manual_seed(15)
    model = HierarchicalMotionVqvae(cfg)
    tensors = motion_tensors(cfg)
    acfg = AssociationConfig(embed_dim=8, hidden_dim=16, steps=5, batch_pairs=16, top_u=2)
    r1 = train_association(model, tensors, acfg, seed=33)
    r2 = train_association(model, tensors, acfg, seed=33)
    for p, q in zip(r1.embedders.parameters(), r2.embedders.parameters()):
        torch.testing.assert_close(p, q, rtol=0.0, atol=0.0)
    r3 = train_association(model, tensors, acfg, seed=34)
    assert any(
        not torch.allclose(p, q)
        for p, q in zip(r1.embedders.parameters(), r3.embedders.parameters())
    )


# -------------------------------------------------------------- augmentation


def test_combined_level_cues_averages_kinds():
    cues = torch.randn(3, 2, 4)
    torch.testing.assert_close(combined_level_cues(cues), cues.mean(dim=1))
    with pytest.raises(ConfigurationError):
        combined_level_cues(torch.randn(3, 3, 4))


def test_augment_cues_layout_and_determinism():
    emb = make_embedders(levels=2, code_dim=6, text_dim=5, seed=16, top_u=3)
    gen = torch.Generator().manual_seed(17)
    books = [torch.randn(9, 6, generator=gen) for _ in range(2)]
    cues = torch.randn(2, 2, 5, generator=gen)
    aug = augment_cues(emb, books, cues)
    assert aug.tokens.shape == (2, 4, 8)  # [L, 1 + u, embed_dim]
    assert aug.code_indices.shape == (2, 3)
    assert aug.flat.shape == (2, 32)
    with torch.no_grad():
        cue_tok = emb.embed_cue(1, combined_level_cues(cues)[0].reshape(1, -1))
    torch.testing.assert_close(aug.tokens[0, 0], cue_tok.squeeze(0))
    aug2 = augment_cues(emb, books, cues)
    torch.testing.assert_close(aug.tokens, aug2.tokens, rtol=0.0, atol=0.0)


def test_augment_cues_validates_codebook_count():
    emb = make_embedders(levels=2, seed=18)
    with pytest.raises(ConfigurationError):
        augment_cues(emb, [torch.randn(4, 6)], torch.randn(2, 2, 5))


def test_association_config_validation():
    with pytest.raises(ConfigurationError):
        AssociationConfig(temperature=0.0)
    with pytest.raises(ConfigurationError):
        AssociationConfig(top_u=0)
    with pytest.raises(ConfigurationError):
        AssociationConfig(embed_dim=1)
