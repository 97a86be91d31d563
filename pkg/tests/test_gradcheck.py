"""Finite-difference gradient checks for every loss term.

Each scalar loss is checked against central differences (h = 1e-3) in double
precision; the worst coordinate must agree to a relative error below 1e-4.
The discrete codebook path is bypassed with identity quantizers for the
end-to-end check — the straight-through estimator is intentionally not the
true derivative across assignment boundaries and has its own unit test.
"""

import numpy as np
import torch

from collage.data import NormalizationStats
from collage.data.entities import CORNER_SIGNS
from collage.vqvae import HvqConfig, LossWeights
from collage.vqvae.losses import (
    GeometryContext,
    alignment_loss,
    commitment_loss,
    compute_losses,
    contact_loss,
    disentanglement_loss,
    penetration_loss,
    reconstruction_loss,
    smoothness_loss,
)
from collage.vqvae.model import HierarchicalMotionVqvae
from tests._gradcheck import REL_TOL, fd_max_rel_error
from tests.test_vqvae_losses import fake_level

J = 6
CONTACT_IDX = (2, 5)


def _context() -> GeometryContext:
    ctx = GeometryContext.from_stats(
        NormalizationStats(kind="agent", mean=np.zeros(3 * J), std=np.ones(3 * J)),
        NormalizationStats(kind="object", mean=np.zeros(27), std=np.ones(27)),
        CONTACT_IDX,
        0.05,
    )
    return ctx.to(torch.float64)


def _leaf(shape, seed, scale=1.0, shift=0.0):
    gen = torch.Generator().manual_seed(seed)
    return (torch.randn(*shape, generator=gen).double() * scale + shift).requires_grad_(True)


def _box_leaf(frames: int, seed: int) -> torch.Tensor:
    """Object features near (but not exactly) a box, so the pose fit is the
    generic Gram-Schmidt branch."""
    gen = torch.Generator().manual_seed(seed)
    corners = torch.tensor([0.0, 0.0, 1.0]) + torch.from_numpy(CORNER_SIGNS) * torch.tensor(
        [0.5, 0.3, 0.2]
    )
    kp = torch.cat([torch.tensor([[0.0, 0.0, 1.0]]), corners], dim=0).double()
    feat = kp.reshape(-1).expand(1, 1, frames, 27).clone()
    feat = feat + 0.01 * torch.randn(feat.shape, generator=gen).double()
    return feat.requires_grad_(True)


def test_reconstruction_gradients():
    rec_h, rec_o = _leaf((1, 2, 6, 9), 0), _leaf((1, 1, 6, 12), 1)
    gt_h, gt_o = _leaf((1, 2, 6, 9), 2).detach(), _leaf((1, 1, 6, 12), 3).detach()

    def fn(a, b):
        class Out:
            recon_humans, recon_objects = a, b

        return reconstruction_loss(Out, gt_h, gt_o)

    assert fd_max_rel_error(fn, [rec_h, rec_o]) < REL_TOL


def test_smoothness_gradients():
    rec_h, rec_o = _leaf((1, 2, 6, 9), 4), _leaf((1, 1, 6, 12), 5)

    def fn(a, b):
        class Out:
            recon_humans, recon_objects = a, b

        return smoothness_loss(Out)

    assert fd_max_rel_error(fn, [rec_h, rec_o]) < REL_TOL


def test_commitment_gradients():
    hq = _leaf((1, 2, 4, 8), 6).detach()
    oq = _leaf((1, 1, 4, 8), 7).detach()
    pre_h, pre_o = _leaf((1, 2, 4, 8), 8), _leaf((1, 1, 4, 8), 9)

    def fn(a, b):
        lv = fake_level(1, hq, oq)
        lv.humans_pre, lv.objects_pre = a, b
        return commitment_loss(lv)

    assert fd_max_rel_error(fn, [pre_h, pre_o]) < REL_TOL


def test_alignment_gradients():
    cues = _leaf((1, 2, 2, 8), 10).detach()
    hq, oq = _leaf((1, 2, 4, 8), 11), _leaf((1, 1, 4, 8), 12)

    def fn(a, b):
        return alignment_loss(fake_level(2, a, b), cues)

    assert fd_max_rel_error(fn, [hq, oq]) < REL_TOL


def test_disentanglement_gradients():
    h1, o1 = _leaf((1, 2, 8, 4), 13), _leaf((1, 1, 8, 4), 14)
    h2, o2 = _leaf((1, 2, 4, 4), 15), _leaf((1, 1, 4, 4), 16)

    def fn(a, b, c, d):
        return disentanglement_loss([fake_level(1, a, b), fake_level(2, c, d)])

    assert fd_max_rel_error(fn, [h1, o1, h2, o2]) < REL_TOL


def test_penetration_gradients():
    ctx = _context()
    humans = _leaf((1, 2, 3, 3 * J), 17, scale=0.6, shift=1.0)
    objects = _box_leaf(3, 18)

    def fn(a, b):
        return penetration_loss(a, b, ctx)

    assert fd_max_rel_error(fn, [humans, objects]) < REL_TOL


def test_contact_gradients():
    ctx = _context()
    rec_h = _leaf((1, 2, 3, 3 * J), 19, scale=0.5, shift=1.0)
    objects = _box_leaf(3, 20)
    gt_h = _leaf((1, 2, 3, 3 * J), 21, scale=0.5, shift=1.0).detach()
    gt_o = _box_leaf(3, 22).detach()

    def fn(a, b):
        return contact_loss(a, b, gt_h, gt_o, ctx)

    assert fd_max_rel_error(fn, [rec_h, objects]) < REL_TOL


def test_total_loss_gradients_through_model():
    """End to end: encoder, cue projection, attention, decoder, geometry."""
    torch.manual_seed(23)
    cfg = HvqConfig(
        num_humans=2,
        num_objects=1,
        human_keypoints=J,
        object_keypoints=9,
        num_frames=8,
        levels=2,
        latent_dim=8,
        codebook_entries=4,
        downsamples=(2, 1),
        conv_blocks=1,
        attention_heads=2,
    )
    model = HierarchicalMotionVqvae(cfg, identity_quantizers=True).double()
    model.eval()
    ctx = _context()
    weights = LossWeights()
    humans = _leaf((1, 2, 8, 3 * J), 24, scale=0.5, shift=1.0)
    gen = torch.Generator().manual_seed(25)
    base_obj = _box_leaf(8, 26).detach()
    objects = (base_obj + 0.005 * torch.randn(base_obj.shape, generator=gen).double()).requires_grad_(True)
    cues = _leaf((1, 2, 2, 8), 27)

    def fn(a, b, c):
        out = model(a, b, c)
        return compute_losses(out, a, b, c, ctx, weights).total

    assert fd_max_rel_error(fn, [humans, objects, cues], probes_per_input=12) < REL_TOL
