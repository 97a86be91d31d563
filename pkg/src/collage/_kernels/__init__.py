"""Numeric kernel dispatch.

A compiled Cython module and a pure-numpy implementation share exact
semantics; selection happens once at import time via the
COLLAGE_KERNEL_BACKEND environment variable ("native" | "python" | "auto",
default auto). Auto picks per kernel: the scalar box-distance loop is far
faster compiled, while nearest-codeword search is a BLAS matmul in numpy
that a hand-rolled loop cannot beat (see benchmarks/bench_kernels.py), so
auto uses the compiled module only where it wins.
"""

from __future__ import annotations

import importlib
import os

from . import _py

_requested = os.environ.get("COLLAGE_KERNEL_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "python"):
    raise ImportError(f"COLLAGE_KERNEL_BACKEND must be auto|native|python, got {_requested!r}")

_native = None
if _requested in ("auto", "native"):
    try:
        _native = importlib.import_module("._native", __package__)
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "COLLAGE_KERNEL_BACKEND=native but the compiled kernel module is not built"
            ) from None

if _requested == "python" or _native is None:
    BACKEND = "python"
    nearest_codes = _py.nearest_codes
    box_signed_distance = _py.box_signed_distance
elif _requested == "native":
    BACKEND = "native"
    nearest_codes = _native.nearest_codes
    box_signed_distance = _native.box_signed_distance
else:
    BACKEND = "auto"
    nearest_codes = _py.nearest_codes
    box_signed_distance = _native.box_signed_distance


def available_backends() -> dict:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    out = {"python": _py}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out
