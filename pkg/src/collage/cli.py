"""Command line entry point.

Every subcommand resolves one RunConfig (defaults, then --config, then
--seed), writes it beside its outputs, and maps any package error to a
stable exit code with a JSON payload on stderr. Log records are emitted as
JSON lines so the training curves are machine-readable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .ablation import AXES, run_ablation
from .config import RunConfig, desk_config
from .data import canonical_json_dumps
from .diffusion import SAMPLERS, GenerationSettings
from .errors import CollageError, ConfigurationError
from .pipeline import (
    smoke_pipeline,
    stage_evaluate,
    stage_gen_data,
    stage_generate,
    stage_train_assoc,
    stage_train_diffusion,
    stage_train_evaluator,
    stage_train_vqvae,
)


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "stage": record.name.rsplit(".", 1)[-1],
            "level": record.levelname.lower(),
            "message": record.getMessage(),
        }
        return json.dumps(payload, sort_keys=True)


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        config = RunConfig.from_dict(raw)
    else:
        config = desk_config()
    if args.seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed=args.seed)
    return config


def _write_resolved_config(config: RunConfig, out: str | Path) -> None:
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(canonical_json_dumps(config.to_dict()))


def _parse_grid(axis: str, text: str) -> tuple:
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if axis in ("no_hierarchy", "no_llm", "no_time_modulation"):
            low = token.lower()
            if low in ("1", "true", "yes"):
                values.append(True)
            elif low in ("0", "false", "no"):
                values.append(False)
            else:
                raise ConfigurationError(f"grid value {token!r} is not a boolean")
        else:
            try:
                values.append(int(token))
            except ValueError as exc:
                raise ConfigurationError(f"grid value {token!r} is not an integer") from exc
    if not values:
        raise ConfigurationError("grid is empty")
    return tuple(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collage",
        description="Collaborative agent-object motion: data, training, generation, evaluation.",
    )
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", default="runs/collage", help="run output directory")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("gen-data", "generate the synthetic dataset and cue cache"),
        ("train-vqvae", "train the hierarchical motion autoencoder"),
        ("train-assoc", "train the codebook-cue association"),
        ("train-diffusion", "train the latent graph denoiser"),
        ("train-evaluator", "train the metric embedding model"),
    ):
        sub.add_parser(name, help=help_text)

    gen = sub.add_parser("generate", help="sample motions for text prompts")
    gen.add_argument("--prompt", action="append", required=True, help="repeatable text prompt")
    gen.add_argument("--bundle", help="run directory (or its bundle.json) holding checkpoints")
    gen.add_argument("--sampler", choices=SAMPLERS, default="ddim")
    gen.add_argument("--steps", type=int, default=50, help="reverse process steps")
    gen.add_argument("--noise-scale", type=float, default=1.0)
    gen.add_argument("--gen-seed", type=int, help="sampling seed (defaults from the run seed)")

    ev = sub.add_parser("evaluate", help="run the metric protocol on the test split")
    ev.add_argument("--sampler", choices=SAMPLERS)
    ev.add_argument("--steps", type=int, help="reverse process steps")

    ab = sub.add_parser("ablate", help="single-axis ablation sweep")
    ab.add_argument("--axis", required=True, choices=AXES)
    ab.add_argument("--grid", help="comma-separated cell values, e.g. 5,15,55,100")
    ab.add_argument("--budget", type=float, help="wall-clock budget in seconds")

    sub.add_parser("smoke", help="tiny end-to-end run with stage timings")
    return parser


def _run_dir_for_generate(args: argparse.Namespace) -> Path:
    if args.bundle is None:
        return Path(args.out)
    bundle = Path(args.bundle)
    return bundle.parent if bundle.suffix == ".json" else bundle


def _dispatch(args: argparse.Namespace) -> None:
    config = _load_config(args)
    out = Path(args.out)
    if args.command == "gen-data":
        _write_resolved_config(config, out)
        stage_gen_data(config, out)
    elif args.command == "train-vqvae":
        _write_resolved_config(config, out)
        stage_train_vqvae(config, out)
    elif args.command == "train-assoc":
        _write_resolved_config(config, out)
        stage_train_assoc(config, out)
    elif args.command == "train-diffusion":
        _write_resolved_config(config, out)
        stage_train_diffusion(config, out)
    elif args.command == "train-evaluator":
        _write_resolved_config(config, out)
        stage_train_evaluator(config, out)
    elif args.command == "generate":
        run_dir = _run_dir_for_generate(args)
        settings = GenerationSettings(
            sampler=args.sampler, num_steps=args.steps, noise_scale=args.noise_scale
        )
        stage_generate(
            config,
            run_dir,
            list(args.prompt),
            settings=settings,
            seed=args.gen_seed,
            save_to=out if args.bundle is not None else out / "generated",
        )
    elif args.command == "evaluate":
        settings = None
        if args.sampler is not None or args.steps is not None:
            ev = config.eval_settings
            settings = GenerationSettings(
                sampler=args.sampler or ev.sampler,
                num_steps=args.steps or ev.sampler_steps,
            )
        report = stage_evaluate(config, out, settings=settings)
        print(report.format_table())
    elif args.command == "ablate":
        grid = None if args.grid is None else _parse_grid(args.axis, args.grid)
        report = run_ablation(config, out, args.axis, grid=grid, budget_seconds=args.budget)
        print(report.format_table())
    elif args.command == "smoke":
        result = smoke_pipeline(out)
        print(result["table"])
        print(result["report"].format_table())
    else:  # pragma: no cover - argparse enforces choices
        raise ConfigurationError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        _dispatch(args)
    except CollageError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
