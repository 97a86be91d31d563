"""Collaborative agent-object motion: hierarchical quantized latents, code-cue
association, and cue-guided graph diffusion, with a synthetic carrying dataset
and an evaluation suite."""

__version__ = "0.1.0"
