"""Single-axis ablation sweeps.

Each cell trains a full stack under a modified configuration and evaluates
it with the shared protocol; cells on the same axis use the same run seed,
so comparisons across the grid are paired. Cells whose training
configuration is identical (the ``ddim_steps`` axis only varies the
sampler) reuse the first matching trained stack; training is deterministic
given config and seed, so the reuse is indistinguishable from retraining.
"""

from __future__ import annotations

import dataclasses
import time
from pathlib import Path

from .config import EvalSettings, RunConfig
from .data import canonical_json_dumps
from .errors import ConfigurationError
from .metrics import MetricReport, MetricValue
from .pipeline import (
    output_lock,
    stage_evaluate,
    stage_gen_data,
    stage_train_assoc,
    stage_train_diffusion,
    stage_train_evaluator,
    stage_train_vqvae,
)

AXES = (
    "levels",
    "codebook_size",
    "top_u",
    "ddim_steps",
    "no_hierarchy",
    "no_llm",
    "no_time_modulation",
)

DEFAULT_GRIDS: dict[str, tuple] = {
    "levels": (1, 2, 4, 6, 8),
    "codebook_size": (32, 64, 128, 256, 512),
    "top_u": (1, 4, 8, 16),
    "ddim_steps": (5, 15, 55, 100),
    "no_hierarchy": (False, True),
    "no_llm": (False, True),
    "no_time_modulation": (False, True),
}


def level_downsamples(levels: int) -> tuple[int, ...]:
    """Temporal strides per level: halve twice, then keep the coarse rate."""
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    if levels == 1:
        return (2,)
    return (2, 2) + (1,) * (levels - 2)


def cell_config(base: RunConfig, axis: str, value) -> RunConfig:
    """The run configuration for one ablation cell."""
    if axis == "levels":
        levels = int(value)
        return dataclasses.replace(
            base,
            vqvae=dataclasses.replace(
                base.vqvae, levels=levels, downsamples=level_downsamples(levels)
            ),
        )
    if axis == "codebook_size":
        return dataclasses.replace(
            base, vqvae=dataclasses.replace(base.vqvae, codebook_entries=int(value))
        )
    if axis == "top_u":
        return dataclasses.replace(
            base, assoc=dataclasses.replace(base.assoc, top_u=int(value))
        )
    if axis == "ddim_steps":
        steps = int(value)
        if steps > base.diffusion.timesteps:
            raise ConfigurationError(
                f"ddim_steps={steps} exceeds the {base.diffusion.timesteps}-step schedule"
            )
        return dataclasses.replace(
            base,
            eval_settings=dataclasses.replace(
                base.eval_settings, sampler="ddim", sampler_steps=steps
            ),
        )
    if axis == "no_hierarchy":
        if not value:
            return base
        # single level with the same total codebook capacity as the full model
        return dataclasses.replace(
            base,
            vqvae=dataclasses.replace(
                base.vqvae,
                levels=1,
                downsamples=level_downsamples(1),
                codebook_entries=base.vqvae.levels * base.vqvae.codebook_entries,
            ),
        )
    if axis == "no_llm":
        if not value:
            return base
        return dataclasses.replace(base, zero_cues=True)
    if axis == "no_time_modulation":
        if not value:
            return base
        return dataclasses.replace(
            base, diffusion=dataclasses.replace(base.diffusion, modulate=False)
        )
    raise ConfigurationError(f"unknown ablation axis {axis!r}; expected one of {AXES}")


def _training_key(config: RunConfig) -> str:
    """Everything that influences the trained stack, excluding eval settings."""
    payload = config.to_dict()
    payload.pop("eval_settings", None)
    return canonical_json_dumps(payload)


def _train_cell(config: RunConfig, cell_dir: Path) -> None:
    stage_gen_data(config, cell_dir)
    stage_train_vqvae(config, cell_dir)
    stage_train_assoc(config, cell_dir)
    stage_train_diffusion(config, cell_dir)
    stage_train_evaluator(config, cell_dir)


def run_ablation(
    config: RunConfig,
    out: str | Path,
    axis: str,
    grid: tuple | list | None = None,
    budget_seconds: float | None = None,
) -> MetricReport:
    """One training+evaluation per grid cell; returns all cells in one report.

    A cell is only started while the elapsed time is under
    ``budget_seconds``; on exhaustion the remaining cells are skipped and
    the report is flagged partial.
    """
    if axis not in AXES:
        raise ConfigurationError(f"unknown ablation axis {axis!r}; expected one of {AXES}")
    values = tuple(DEFAULT_GRIDS[axis] if grid is None else grid)
    if not values:
        raise ConfigurationError("ablation grid is empty")

    root = Path(out)
    report = MetricReport(metadata={"axis": axis, "grid": [str(v) for v in values]})
    trained: dict[str, Path] = {}
    completed: list[str] = []
    partial = False
    start = time.perf_counter()

    with output_lock(root):
        for value in values:
            if budget_seconds is not None and time.perf_counter() - start >= budget_seconds:
                partial = True
                break
            cfg = cell_config(config, axis, value)
            key = _training_key(cfg)
            cell_dir = trained.get(key)
            if cell_dir is None:
                cell_dir = root / "cells" / f"{axis}={value}"
                _train_cell(cfg, cell_dir)
                trained[key] = cell_dir
            cell_report = stage_evaluate(cfg, cell_dir)
            for metric in cell_report.values.values():
                report.add(
                    MetricValue(
                        name=f"{metric.name}[{axis}={value}]",
                        mean=metric.mean,
                        ci95=metric.ci95,
                        repeats=metric.repeats,
                    )
                )
            completed.append(str(value))

    report.metadata["completed"] = completed
    report.metadata["partial"] = partial
    root.mkdir(parents=True, exist_ok=True)
    (root / "ablation.json").write_text(report.to_json())
    (root / "ablation.csv").write_text(report.to_csv())
    return report
