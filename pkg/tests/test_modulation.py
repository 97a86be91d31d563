"""Time-dependent cue gates: closed form, monotonicity, endpoints."""

import math

import numpy as np
import pytest
import torch

from collage.diffusion.modulation import HIGH, LOW, GammaModulation, gamma_value, level_kinds
from collage.errors import ConfigurationError


def test_gamma_matches_closed_form_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = float(rng.uniform(0.1, 2.0))
        k = float(rng.uniform(0.1, 5.0))
        total = int(rng.integers(1, 1000))
        t = float(rng.uniform(0, total))
        decay = math.exp(-k * t / total)
        np.testing.assert_allclose(gamma_value(HIGH, t, total, lam, k), lam * decay, rtol=1e-15)
        np.testing.assert_allclose(
            gamma_value(LOW, t, total, lam, k), lam * (1.0 - decay), rtol=1e-12, atol=1e-15
        )
        # the two kinds partition the budget exactly
        np.testing.assert_allclose(
            gamma_value(HIGH, t, total, lam, k) + gamma_value(LOW, t, total, lam, k),
            lam,
            rtol=1e-12,
        )


def test_gamma_strictly_monotone_on_dense_grid():
    """1000-point grid over [0, T]: the coarse gate strictly decreases, the
    fine gate strictly increases, and the endpoints are exact."""
    total, lam, k = 1000, 1.0, 1.0
    ts = np.linspace(0.0, total, 1000)
    high = np.array([gamma_value(HIGH, t, total, lam, k) for t in ts])
    low = np.array([gamma_value(LOW, t, total, lam, k) for t in ts])
    assert np.all(np.diff(high) < 0), "coarse gate must strictly decrease in t"
    assert np.all(np.diff(low) > 0), "fine gate must strictly increase in t"
    assert high[0] == lam and low[0] == 0.0
    np.testing.assert_allclose(high[-1], lam * math.exp(-k), rtol=1e-15)
    np.testing.assert_allclose(low[-1], lam * (1.0 - math.exp(-k)), rtol=1e-15)


def test_gamma_rejects_unknown_kind():
    with pytest.raises(ConfigurationError):
        gamma_value("mid", 1.0, 10, 1.0, 1.0)


def test_level_kinds_split_coarse_first():
    assert level_kinds(1) == (HIGH,)
    assert level_kinds(2) == (HIGH, LOW)
    assert level_kinds(3) == (HIGH, HIGH, LOW)
    assert level_kinds(4) == (HIGH, HIGH, LOW, LOW)
    assert level_kinds(8) == (HIGH,) * 4 + (LOW,) * 4
    with pytest.raises(ConfigurationError):
        level_kinds(0)


def test_module_matches_scalar_reference_at_init():
    mod = GammaModulation(levels=4)
    total = 50
    t = torch.tensor([1.0, 10.0, 25.0, 50.0])
    gates = mod(t, total)
    assert gates.shape == (4, 4)
    kinds = level_kinds(4)
    k = mod.decay_rates().detach().numpy()
    np.testing.assert_allclose(k, np.ones(4), rtol=1e-6)  # softplus(raw) == 1 at init
    for bi, tv in enumerate(t.tolist()):
        for li, kind in enumerate(kinds):
            np.testing.assert_allclose(
                gates[bi, li].item(),
                gamma_value(kind, tv, total, 1.0, float(k[li])),
                rtol=1e-6,
            )


def test_module_unmodulated_gate_is_constant_lambda():
    mod = GammaModulation(levels=3, modulate=False)
    gates = mod(torch.tensor([1.0, 17.0, 50.0]), 50)
    torch.testing.assert_close(gates, torch.ones(3, 3))
    # and it carries no dependence on the learnable rate
    assert gates.requires_grad is False


def test_module_gates_are_trainable_when_modulated():
    mod = GammaModulation(levels=2)
    gates = mod(torch.tensor([5.0]), 10)
    gates.sum().backward()
    assert mod.raw_k.grad is not None
    assert torch.isfinite(mod.raw_k.grad).all()


def test_module_validates_total():
    mod = GammaModulation(levels=2)
    with pytest.raises(ConfigurationError):
        mod(torch.tensor([1.0]), 0)
