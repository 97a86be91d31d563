"""Noise schedule closed forms, forward marginals, and the sub-grid."""

import numpy as np
import pytest
import torch

from collage.diffusion import NoiseSchedule, ddim_timesteps
from collage.diffusion.sampling import diffusion_loss, forward_diffuse
from collage.errors import ConfigurationError


def test_alpha_bar_matches_brute_force_product():
    sched = NoiseSchedule.linear(100)
    running = 1.0
    for t in range(1, 101):
        running *= 1.0 - sched.betas[t - 1]
        np.testing.assert_allclose(sched.alpha_bar(t), running, rtol=1e-12)
    assert sched.alpha_bar(0) == 1.0


def test_alpha_bars_strictly_decreasing():
    sched = NoiseSchedule.linear(500)
    bars = np.array([sched.alpha_bar(t) for t in range(0, 501)])
    assert np.all(np.diff(bars) < 0)
    assert bars[-1] > 0


def test_accessors_and_range_checks():
    sched = NoiseSchedule.linear(10, beta_start=1e-3, beta_end=1e-2)
    assert sched.timesteps == 10
    np.testing.assert_allclose(sched.beta(1), 1e-3)
    np.testing.assert_allclose(sched.beta(10), 1e-2)
    np.testing.assert_allclose(sched.alpha(3), 1.0 - sched.beta(3))
    np.testing.assert_allclose(sched.sigma(3), sched.beta(3) ** 0.5)
    for bad in (0, 11, -1):
        with pytest.raises(ConfigurationError):
            sched.beta(bad)
    with pytest.raises(ConfigurationError):
        sched.alpha_bar(11)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        NoiseSchedule(betas=np.array([0.1, 1.0]))
    with pytest.raises(ConfigurationError):
        NoiseSchedule(betas=np.array([0.0, 0.1]))
    with pytest.raises(ConfigurationError):
        NoiseSchedule(betas=np.array([]))
    with pytest.raises(ConfigurationError):
        NoiseSchedule.linear(0)
    with pytest.raises(ConfigurationError):
        NoiseSchedule.linear(10, beta_start=0.02, beta_end=0.01)


def test_schedule_dict_roundtrip():
    sched = NoiseSchedule.linear(25)
    back = NoiseSchedule.from_dict(sched.to_dict())
    np.testing.assert_array_equal(back.betas, sched.betas)
    assert back.kind == sched.kind
    with pytest.raises(ConfigurationError):
        NoiseSchedule.from_dict({"kind": "linear"})


def test_forward_marginal_moments_match_closed_form():
    """Empirical mean/variance of x_t over 10k draws agree with
    sqrt(alpha_bar) * x0 and (1 - alpha_bar) within 3 standard errors."""
    sched = NoiseSchedule.linear(50)
    n = 10_000
    c = 0.7
    x0 = torch.full((n, 1), c, dtype=torch.float64)
    for t_val, seed in ((1, 0), (25, 1), (50, 2)):
        gen = torch.Generator().manual_seed(seed)
        eps = torch.randn(n, 1, generator=gen, dtype=torch.float64)
        x_t = forward_diffuse(x0, torch.full((n,), t_val), sched, eps).numpy().ravel()
        bar = sched.alpha_bar(t_val)
        var_true = 1.0 - bar
        mean_se = np.sqrt(var_true / n)
        var_se = var_true * np.sqrt(2.0 / (n - 1))
        assert abs(x_t.mean() - np.sqrt(bar) * c) <= 3 * mean_se
        assert abs(x_t.var(ddof=1) - var_true) <= 3 * var_se


def test_forward_diffuse_validation():
    sched = NoiseSchedule.linear(10)
    x0 = torch.zeros(4, 3)
    with pytest.raises(ConfigurationError):
        forward_diffuse(x0, torch.ones(4, dtype=torch.long), sched, torch.zeros(4, 2))
    with pytest.raises(ConfigurationError):
        forward_diffuse(x0, torch.ones(3, dtype=torch.long), sched, torch.zeros(4, 3))


def test_diffusion_loss_with_pinned_inputs_is_exact_mse():
    sched = NoiseSchedule.linear(10)
    x0 = torch.zeros(5, 3, dtype=torch.float64)
    eps = torch.randn(5, 3, dtype=torch.float64, generator=torch.Generator().manual_seed(3))
    t = torch.full((5,), 4)
    zero_model = lambda x, t, c, a: torch.zeros_like(x)  # noqa: E731
    loss = diffusion_loss(zero_model, x0, sched, t=t, eps=eps)
    torch.testing.assert_close(loss, eps.pow(2).mean())
    perfect = lambda x, t, c, a: eps  # noqa: E731
    assert diffusion_loss(perfect, x0, sched, t=t, eps=eps).item() == 0.0


def test_ddim_grid_shape_and_bounds_property():
    rng = np.random.default_rng(42)
    for _ in range(200):
        total = int(rng.integers(1, 400))
        num = int(rng.integers(1, total + 1))
        taus = ddim_timesteps(total, num)
        assert len(taus) == num
        assert taus[0] == total
        assert all(1 <= t <= total for t in taus)
        assert all(a > b for a, b in zip(taus, taus[1:])), (total, num)


def test_ddim_full_grid_is_identity():
    assert ddim_timesteps(7, 7) == [7, 6, 5, 4, 3, 2, 1]
    assert ddim_timesteps(1, 1) == [1]
    assert ddim_timesteps(100, 1) == [100]


def test_ddim_grid_validation():
    with pytest.raises(ConfigurationError):
        ddim_timesteps(10, 0)
    with pytest.raises(ConfigurationError):
        ddim_timesteps(10, 11)
