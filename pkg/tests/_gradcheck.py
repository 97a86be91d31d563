"""Central finite-difference gradient checking for scalar loss functions.

Autograd gradients are compared coordinate-by-coordinate against
(f(x+h e_i) - f(x-h e_i)) / 2h in double precision. Coordinates are sampled
with a seeded generator so runs are reproducible and cheap.
"""

from __future__ import annotations

import numpy as np
import torch

FD_STEP = 1e-3
REL_TOL = 1e-4


def fd_max_rel_error(
    fn,
    inputs: list[torch.Tensor],
    h: float = FD_STEP,
    probes_per_input: int = 20,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central differences.

    ``fn(*inputs)`` must return a scalar tensor; every input must be a leaf
    double tensor with ``requires_grad=True``.
    """
    for x in inputs:
        assert x.dtype == torch.float64, "gradcheck runs in double precision"
        assert x.requires_grad
    out = fn(*inputs)
    grads = torch.autograd.grad(out, inputs, allow_unused=True)
    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for x, g in zip(inputs, grads):
            flat = x.reshape(-1)
            n = flat.numel()
            count = min(probes_per_input, n)
            for i in rng.choice(n, size=count, replace=False):
                orig = flat[i].item()
                flat[i] = orig + h
                f_plus = fn(*inputs).item()
                flat[i] = orig - h
                f_minus = fn(*inputs).item()
                flat[i] = orig
                fd = (f_plus - f_minus) / (2.0 * h)
                an = 0.0 if g is None else g.reshape(-1)[i].item()
                rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
                worst = max(worst, rel)
    return worst
