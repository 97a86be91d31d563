"""Stage orchestration over an output directory.

Stages write checkpoints under ``<out>/checkpoints/<stage>`` and register
them in ``<out>/bundle.json``; every stage re-derives its seed from the run
seed, verifies the upstream checkpoint chain, and echoes the resolved
configuration into its artifacts so a run can be reproduced from its output
directory alone.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import torch

from .assoc import AssociationConfig, AssociationEmbedders, AssocTrainResult, augment_cues, train_association
from .checkpoint import CheckpointRecord, load_checkpoint, save_checkpoint
from .config import EvalSettings, RunConfig, _build_dataclass
from .cues import (
    CueHierarchy,
    HashingTextEmbedder,
    LlmClientConfig,
    build_cue_embeddings,
    fetch_llm_cues,
)
from .data import (
    DatasetManifest,
    InteractionSample,
    NormalizationStats,
    canonical_json_dumps,
    generate_dataset,
    load_cue_hierarchy,
    load_dataset,
    sample_id,
    sample_to_dict,
    save_cue_hierarchy,
    save_dataset,
)
from .diffusion import (
    DenoiserConfig,
    DiffusionTrainResult,
    GenerationSettings,
    GraphDenoiser,
    InteractionGraph,
    LatentStats,
    NoiseSchedule,
    generate_samples,
    train_diffusion,
)
from .errors import ConfigurationError, StageOrderError
from .metrics import (
    EvaluatorConfig,
    EvaluatorTrainResult,
    MetricReport,
    MetricValue,
    MotionTextEvaluator,
    contact_accuracy,
    diversity,
    encode_motions,
    encode_texts,
    fid,
    mig_score,
    mm_dist,
    modal_code_matrix,
    multimodality,
    r_precision,
    rr_joint_error,
    rr_keypoint_error,
    train_evaluator,
)
from .seeding import derive_seed, torch_generator
from .vqvae import (
    HierarchicalMotionVqvae,
    HvqConfig,
    build_motion_tensors,
    encode_all,
    train_vqvae,
)

logger = logging.getLogger(__name__)

STAGES = ("gen-data", "train-vqvae", "train-assoc", "train-diffusion", "train-evaluator")


# --------------------------------------------------------------- directories


def dataset_dir(out: str | Path) -> Path:
    return Path(out) / "data"


def checkpoint_dir(out: str | Path, stage: str) -> Path:
    return Path(out) / "checkpoints" / stage


def bundle_path(out: str | Path) -> Path:
    return Path(out) / "bundle.json"


def reports_dir(out: str | Path) -> Path:
    return Path(out) / "reports"


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except OSError:
        return False
    return True


@contextmanager
def output_lock(out: str | Path):
    """One live process per output directory; stale locks are reclaimed."""
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    lock = root / ".lock"
    if lock.exists():
        try:
            holder = int(lock.read_text().strip() or "0")
        except ValueError:
            holder = 0
        if holder and holder != os.getpid() and _pid_alive(holder):
            raise ConfigurationError(
                f"output directory {root} is locked by running process {holder}"
            )
    lock.write_text(str(os.getpid()))
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def _update_bundle(out: str | Path, stage: str, path: Path, checkpoint_id: str) -> None:
    bpath = bundle_path(out)
    bundle = {}
    if bpath.is_file():
        bundle = json.loads(bpath.read_text())
    entries = bundle.setdefault("checkpoints", {})
    entries[stage] = {"path": str(path), "id": checkpoint_id}
    bpath.write_text(canonical_json_dumps(bundle))


def load_bundle(out: str | Path) -> dict:
    bpath = Path(out)
    if bpath.is_dir():
        bpath = bundle_path(bpath)
    if not bpath.is_file():
        raise StageOrderError(f"no bundle at {bpath}; run the training stages first")
    return json.loads(bpath.read_text())


def _require_stage(out: str | Path, stage: str, needed_by: str) -> Path:
    path = checkpoint_dir(out, stage)
    if not (path / "model.json").is_file():
        raise StageOrderError(
            f"{needed_by} requires the {stage} stage; run `collage {_STAGE_COMMAND[stage]}` first"
        )
    return path


_STAGE_COMMAND = {
    "dataset": "gen-data",
    "vqvae": "train-vqvae",
    "assoc": "train-assoc",
    "diffusion": "train-diffusion",
    "evaluator": "train-evaluator",
}


def _require_dataset(out: str | Path, needed_by: str) -> Path:
    ddir = dataset_dir(out)
    if not (ddir / "manifest.json").is_file():
        raise StageOrderError(f"{needed_by} requires the dataset; run `collage gen-data` first")
    return ddir


# ------------------------------------------------------------------- cues


def cue_embedder(config: RunConfig) -> HashingTextEmbedder:
    return HashingTextEmbedder(
        dim=config.vqvae.latent_dim, seed=derive_seed(config.seed, "cue-embedder")
    )


def _cue_vectors(
    hierarchies: list[CueHierarchy], embedder: HashingTextEmbedder, zero: bool = False
) -> np.ndarray:
    vecs = np.stack([build_cue_embeddings(h, embedder).vectors for h in hierarchies])
    return np.zeros_like(vecs) if zero else vecs


# ------------------------------------------------------------------ stages


def stage_gen_data(config: RunConfig, out: str | Path) -> dict:
    ddir = dataset_dir(out)
    seed = derive_seed(config.seed, "dataset")
    samples, splits = generate_dataset(config.data, seed)
    ids = [sample_id(i) for i in range(len(samples))]
    manifest = DatasetManifest(
        seed=seed,
        fps=config.data.fps,
        split_ratios=config.data.split_ratios,
        splits=splits,
        files={sid: f"samples/{sid}.json" for sid in ids},
        generator=dataclasses.asdict(config.data),
    )
    save_dataset(ddir, dict(zip(ids, samples)), manifest)
    llm = LlmClientConfig.from_env()
    provenances = set()
    for sid, sample in zip(ids, samples):
        hierarchy = fetch_llm_cues(
            sample.text, config.vqvae.levels, llm, factors=sample.factors_gt
        )
        provenances.add(hierarchy.provenance)
        save_cue_hierarchy(ddir, sid, hierarchy.to_dict())
    logger.info("dataset: %d samples at %s (cues: %s)", len(samples), ddir, sorted(provenances))
    return {
        "dataset": str(ddir),
        "num_samples": len(samples),
        "splits": {k: len(v) for k, v in splits.items()},
        "cue_provenance": sorted(provenances),
    }


def _load_split(
    out: str | Path, split: str, needed_by: str
) -> tuple[list[str], list[InteractionSample], DatasetManifest]:
    ddir = _require_dataset(out, needed_by)
    samples_by_id, manifest = load_dataset(ddir)
    ids = manifest.splits.get(split, [])
    if not ids:
        raise ConfigurationError(f"split {split!r} is empty")
    return ids, [samples_by_id[sid] for sid in ids], manifest


def _load_cue_hierarchies(out: str | Path, ids: list[str]) -> list[CueHierarchy]:
    ddir = dataset_dir(out)
    return [CueHierarchy.from_dict(load_cue_hierarchy(ddir, sid)) for sid in ids]


def stage_train_vqvae(config: RunConfig, out: str | Path) -> str:
    ids, samples, manifest = _load_split(out, "train", "train-vqvae")
    embedder = cue_embedder(config)
    vecs = _cue_vectors(_load_cue_hierarchies(out, ids), embedder, config.zero_cues)
    result = train_vqvae(
        samples,
        vecs,
        config.vqvae,
        config.vqvae_train,
        seed=derive_seed(config.seed, "vqvae"),
        snapshot_dir=checkpoint_dir(out, "vqvae-snapshots"),
    )
    path = checkpoint_dir(out, "vqvae")
    ckpt_id = save_checkpoint(
        path,
        stage="vqvae",
        state_dict=result.model.state_dict(),
        config={
            "model": dataclasses.asdict(config.vqvae),
            "train": dataclasses.asdict(config.vqvae_train),
        },
        seed=derive_seed(config.seed, "vqvae"),
        upstream={},
        metadata={
            "human_stats": result.tensors.human_stats.to_dict(),
            "object_stats": result.tensors.object_stats.to_dict(),
            "cue_embedder": {"dim": embedder.dim, "seed": embedder.seed},
            "fps": manifest.fps,
            "contact_threshold": config.data.contact_threshold,
            "final_recon": result.final_recon,
        },
    )
    _update_bundle(out, "vqvae", path, ckpt_id)
    logger.info("vqvae checkpoint %s (recon %.4f)", ckpt_id, result.final_recon)
    return ckpt_id


def vqvae_from_checkpoint(
    record: CheckpointRecord,
) -> tuple[HierarchicalMotionVqvae, NormalizationStats, NormalizationStats]:
    hvq = _build_dataclass(HvqConfig, record.config["model"], path="vqvae.config.model")
    model = HierarchicalMotionVqvae(hvq)
    model.load_state_dict(record.state_dict)
    model.eval()
    return (
        model,
        NormalizationStats.from_dict(record.metadata["human_stats"]),
        NormalizationStats.from_dict(record.metadata["object_stats"]),
    )


def _embedder_from_metadata(record: CheckpointRecord) -> HashingTextEmbedder:
    info = record.metadata["cue_embedder"]
    return HashingTextEmbedder(dim=int(info["dim"]), seed=int(info["seed"]))


def _rebuild_tensors(
    config: RunConfig, out: str | Path, record: CheckpointRecord, needed_by: str
):
    ids, samples, _ = _load_split(out, "train", needed_by)
    embedder = _embedder_from_metadata(record)
    vecs = _cue_vectors(_load_cue_hierarchies(out, ids), embedder, config.zero_cues)
    model, human_stats, object_stats = vqvae_from_checkpoint(record)
    tensors = build_motion_tensors(samples, vecs, human_stats, object_stats)
    return model, tensors


def stage_train_assoc(config: RunConfig, out: str | Path) -> str:
    vq_path = _require_stage(out, "vqvae", "train-assoc")
    vq_record = load_checkpoint(vq_path, expected_stage="vqvae")
    model, tensors = _rebuild_tensors(config, out, vq_record, "train-assoc")
    result = train_association(model, tensors, config.assoc, derive_seed(config.seed, "assoc"))
    state = dict(result.embedders.state_dict())
    for l, cb in enumerate(result.codebooks, start=1):
        state[f"codebooks.level{l}"] = cb
    path = checkpoint_dir(out, "assoc")
    ckpt_id = save_checkpoint(
        path,
        stage="assoc",
        state_dict=state,
        config={"assoc": dataclasses.asdict(config.assoc)},
        seed=derive_seed(config.seed, "assoc"),
        upstream={"vqvae": vq_record.checkpoint_id},
        metadata={"retrieval_accuracy": result.retrieval_accuracy},
    )
    _update_bundle(out, "assoc", path, ckpt_id)
    logger.info("assoc checkpoint %s (retrieval %.3f)", ckpt_id, result.retrieval_accuracy)
    return ckpt_id


def assoc_from_checkpoint(
    record: CheckpointRecord, vqvae: HierarchicalMotionVqvae
) -> AssocTrainResult:
    cfg = _build_dataclass(AssociationConfig, record.config["assoc"], path="assoc.config")
    levels = vqvae.config.levels
    codebooks = []
    state = dict(record.state_dict)
    for l in range(1, levels + 1):
        key = f"codebooks.level{l}"
        if key not in state:
            raise ConfigurationError(f"association checkpoint lacks {key}")
        codebooks.append(state.pop(key))
    embedders = AssociationEmbedders(
        levels=levels,
        code_dim=vqvae.config.latent_dim,
        text_dim=vqvae.config.latent_dim,
        config=cfg,
    )
    embedders.load_state_dict(state)
    embedders.eval()
    return AssocTrainResult(
        embedders=embedders,
        codebooks=codebooks,
        history=[],
        retrieval_accuracy=float(record.metadata.get("retrieval_accuracy", float("nan"))),
    )


def stage_train_diffusion(config: RunConfig, out: str | Path) -> str:
    vq_record = load_checkpoint(_require_stage(out, "vqvae", "train-diffusion"), "vqvae")
    assoc_record = load_checkpoint(_require_stage(out, "assoc", "train-diffusion"), "assoc")
    assoc_record.require_upstream("vqvae", vq_record.checkpoint_id)
    model, tensors = _rebuild_tensors(config, out, vq_record, "train-diffusion")
    assoc = assoc_from_checkpoint(assoc_record, model)
    result = train_diffusion(
        model, assoc, tensors, config.diffusion, derive_seed(config.seed, "diffusion")
    )
    state = dict(result.model.state_dict())
    state["schedule.betas"] = torch.from_numpy(result.schedule.betas.copy())
    state["latent.mean"] = result.latent_stats.mean
    state["latent.std"] = result.latent_stats.std
    path = checkpoint_dir(out, "diffusion")
    ckpt_id = save_checkpoint(
        path,
        stage="diffusion",
        state_dict=state,
        config={
            "diffusion": dataclasses.asdict(config.diffusion),
            "denoiser": dataclasses.asdict(result.model.config),
            "graph": result.graph.to_dict(),
        },
        seed=derive_seed(config.seed, "diffusion"),
        upstream={"vqvae": vq_record.checkpoint_id, "assoc": assoc_record.checkpoint_id},
        metadata={"final_loss": result.final_loss},
    )
    _update_bundle(out, "diffusion", path, ckpt_id)
    logger.info("diffusion checkpoint %s (loss %.4f)", ckpt_id, result.final_loss)
    return ckpt_id


def diffusion_from_checkpoint(record: CheckpointRecord) -> DiffusionTrainResult:
    state = dict(record.state_dict)
    betas = state.pop("schedule.betas").numpy()
    mean = state.pop("latent.mean")
    std = state.pop("latent.std")
    den_cfg = _build_dataclass(DenoiserConfig, record.config["denoiser"], path="diffusion.config.denoiser")
    model = GraphDenoiser(den_cfg)
    model.load_state_dict(state)
    model.eval()
    return DiffusionTrainResult(
        model=model,
        schedule=NoiseSchedule(betas=betas),
        latent_stats=LatentStats(mean=mean, std=std),
        graph=InteractionGraph.from_dict(record.config["graph"]),
        history=[],
        final_loss=float(record.metadata.get("final_loss", float("nan"))),
    )


def stage_train_evaluator(config: RunConfig, out: str | Path) -> str:
    _, samples, _ = _load_split(out, "train", "train-evaluator")
    seed = derive_seed(config.seed, "evaluator")
    result = train_evaluator(samples, config.evaluator, seed)
    path = checkpoint_dir(out, "evaluator")
    feature_dim = result.model.motion_net[0].in_channels
    ckpt_id = save_checkpoint(
        path,
        stage="evaluator",
        state_dict=result.model.state_dict(),
        config={"evaluator": dataclasses.asdict(config.evaluator), "feature_dim": feature_dim},
        seed=seed,
        upstream={},
        metadata={
            "human_stats": result.human_stats.to_dict(),
            "object_stats": result.object_stats.to_dict(),
            "embedder": {"dim": result.embedder.dim, "seed": result.embedder.seed},
            "top1_at_32": result.top1_at_32,
        },
    )
    _update_bundle(out, "evaluator", path, ckpt_id)
    logger.info("evaluator checkpoint %s (top1 %.3f)", ckpt_id, result.top1_at_32)
    return ckpt_id


def evaluator_from_checkpoint(record: CheckpointRecord) -> EvaluatorTrainResult:
    cfg = _build_dataclass(EvaluatorConfig, record.config["evaluator"], path="evaluator.config")
    model = MotionTextEvaluator(feature_dim=int(record.config["feature_dim"]), config=cfg)
    model.load_state_dict(record.state_dict)
    model.eval()
    info = record.metadata["embedder"]
    return EvaluatorTrainResult(
        model=model,
        human_stats=NormalizationStats.from_dict(record.metadata["human_stats"]),
        object_stats=NormalizationStats.from_dict(record.metadata["object_stats"]),
        embedder=HashingTextEmbedder(dim=int(info["dim"]), seed=int(info["seed"])),
        history=[],
        top1_at_32=float(record.metadata.get("top1_at_32", float("nan"))),
    )


# ---------------------------------------------------------------- generation


def _load_generation_stack(
    config: RunConfig, out: str | Path, needed_by: str
) -> tuple[
    HierarchicalMotionVqvae,
    NormalizationStats,
    NormalizationStats,
    AssocTrainResult,
    DiffusionTrainResult,
    CheckpointRecord,
    CheckpointRecord,
    CheckpointRecord,
]:
    vq_record = load_checkpoint(_require_stage(out, "vqvae", needed_by), "vqvae")
    assoc_record = load_checkpoint(_require_stage(out, "assoc", needed_by), "assoc")
    diff_record = load_checkpoint(_require_stage(out, "diffusion", needed_by), "diffusion")
    assoc_record.require_upstream("vqvae", vq_record.checkpoint_id)
    diff_record.require_upstream("vqvae", vq_record.checkpoint_id)
    diff_record.require_upstream("assoc", assoc_record.checkpoint_id)
    vqvae, human_stats, object_stats = vqvae_from_checkpoint(vq_record)
    assoc = assoc_from_checkpoint(assoc_record, vqvae)
    diffusion = diffusion_from_checkpoint(diff_record)
    return vqvae, human_stats, object_stats, assoc, diffusion, vq_record, assoc_record, diff_record


def _prompt_tokens(
    prompts: list[str],
    levels: int,
    embedder: HashingTextEmbedder,
    assoc: AssocTrainResult,
    top_u: int,
    zero: bool = False,
) -> torch.Tensor:
    llm = LlmClientConfig.from_env()
    tokens = []
    for text in prompts:
        hierarchy = fetch_llm_cues(text, levels, llm)
        vectors = torch.from_numpy(build_cue_embeddings(hierarchy, embedder).vectors)
        if zero:
            vectors = torch.zeros_like(vectors)
        aug = augment_cues(assoc.embedders, assoc.codebooks, vectors, u=top_u)
        tokens.append(aug.tokens)
    return torch.stack(tokens)


def stage_generate(
    config: RunConfig,
    out: str | Path,
    prompts: list[str],
    settings: GenerationSettings | None = None,
    seed: int | None = None,
    save_to: str | Path | None = None,
) -> list[InteractionSample]:
    if not prompts:
        raise ConfigurationError("generation needs at least one prompt")
    settings = settings or GenerationSettings()
    stack = _load_generation_stack(config, out, "generate")
    vqvae, human_stats, object_stats, assoc, diffusion = stack[:5]
    vq_record, assoc_record, diff_record = stack[5:]
    embedder = _embedder_from_metadata(vq_record)
    tokens = _prompt_tokens(
        prompts, vqvae.config.levels, embedder, assoc, config.assoc.top_u, config.zero_cues
    )
    gen_seed = derive_seed(config.seed, "generate") if seed is None else seed
    generator = torch_generator(gen_seed, "sampling")
    samples = generate_samples(
        vqvae,
        diffusion,
        tokens,
        prompts,
        human_stats,
        object_stats,
        settings,
        generator,
        fps=float(vq_record.metadata["fps"]),
        contact_threshold=float(vq_record.metadata["contact_threshold"]),
    )
    if save_to is not None:
        dest = Path(save_to)
        dest.mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(samples):
            payload = sample_to_dict(sample, f"gen{i:04d}")
            (dest / f"gen{i:04d}.json").write_text(canonical_json_dumps(payload))
        provenance = {
            "seed": gen_seed,
            "sampler": settings.sampler,
            "num_steps": settings.num_steps,
            "noise_scale": settings.noise_scale,
            "prompts": prompts,
            "checkpoints": {
                "vqvae": vq_record.checkpoint_id,
                "assoc": assoc_record.checkpoint_id,
                "diffusion": diff_record.checkpoint_id,
            },
        }
        (dest / "provenance.json").write_text(canonical_json_dumps(provenance))
    return samples


# ---------------------------------------------------------------- evaluation


def _generate_for_texts(
    vqvae: HierarchicalMotionVqvae,
    diffusion: DiffusionTrainResult,
    human_stats: NormalizationStats,
    object_stats: NormalizationStats,
    tokens: torch.Tensor,
    texts: list[str],
    settings: GenerationSettings,
    seed: int,
    fps: float,
    contact_threshold: float,
    batch_size: int = 16,
) -> list[InteractionSample]:
    generator = torch_generator(seed, "sampling")
    samples: list[InteractionSample] = []
    for start in range(0, len(texts), batch_size):
        stop = min(start + batch_size, len(texts))
        samples.extend(
            generate_samples(
                vqvae,
                diffusion,
                tokens[start:stop],
                texts[start:stop],
                human_stats,
                object_stats,
                settings,
                generator,
                fps=fps,
                contact_threshold=contact_threshold,
            )
        )
    return samples


def stage_evaluate(
    config: RunConfig,
    out: str | Path,
    settings: GenerationSettings | None = None,
    eval_settings: EvalSettings | None = None,
) -> MetricReport:
    ev = eval_settings or config.eval_settings
    if settings is None:
        settings = GenerationSettings(sampler=ev.sampler, num_steps=ev.sampler_steps)
    stack = _load_generation_stack(config, out, "evaluate")
    vqvae, human_stats, object_stats, assoc, diffusion = stack[:5]
    vq_record = stack[5]
    ev_record = load_checkpoint(_require_stage(out, "evaluator", "evaluate"), "evaluator")
    evaluator = evaluator_from_checkpoint(ev_record)

    ids, references, _ = _load_split(out, "test", "evaluate")
    embedder = _embedder_from_metadata(vq_record)
    hierarchies = _load_cue_hierarchies(out, ids)
    vecs = _cue_vectors(hierarchies, embedder, config.zero_cues)
    tokens = torch.stack(
        [
            augment_cues(
                assoc.embedders, assoc.codebooks, torch.from_numpy(v), u=config.assoc.top_u
            ).tokens
            for v in vecs
        ]
    )
    texts = [s.text for s in references]
    fps = float(vq_record.metadata["fps"])
    threshold = float(vq_record.metadata["contact_threshold"])

    ref_embed = encode_motions(evaluator, references)
    text_embed = encode_texts(evaluator, texts)
    pool = min(ev.pool_size, len(references))

    report = MetricReport(
        metadata={
            "sampler": settings.sampler,
            "num_steps": settings.num_steps,
            "eval_samples": len(references),
            "repeats": ev.repeats,
            "pool_size": pool,
        }
    )

    fids, top1, top2, top3, divs, mmd, rrje, rrve, cacc = ([] for _ in range(9))
    for rep in range(ev.repeats):
        seed = derive_seed(config.seed, f"evaluate-rep{rep}")
        generated = _generate_for_texts(
            vqvae, diffusion, human_stats, object_stats,
            tokens, texts, settings, seed, fps, threshold,
        )
        gen_embed = encode_motions(evaluator, generated)
        fids.append(fid(gen_embed, ref_embed))
        rng = np.random.default_rng(derive_seed(seed, "r-precision"))
        prec = r_precision(gen_embed, text_embed, pool_size=pool, rng=rng)
        top1.append(prec[1])
        top2.append(prec[2])
        top3.append(prec[3])
        rng = np.random.default_rng(derive_seed(seed, "diversity"))
        divs.append(diversity(gen_embed, num_pairs=ev.diversity_pairs, rng=rng))
        mmd.append(mm_dist(text_embed, gen_embed))
        rrje.append(np.mean([rr_joint_error(g, r) for g, r in zip(generated, references)]))
        rrve.append(np.mean([rr_keypoint_error(g, r) for g, r in zip(generated, references)]))
        cacc.append(
            np.mean([contact_accuracy(g, r, threshold) for g, r in zip(generated, references)])
        )

    report.add_values("FID", fids)
    report.add_values("R-precision@1", top1)
    report.add_values("R-precision@2", top2)
    report.add_values("R-precision@3", top3)
    report.add_values("Diversity", divs)
    report.add_values("MM Dist", mmd)
    report.add_values("RR.Je", rrje)
    report.add_values("RR.Ve", rrve)
    report.add_values("C_acc", cacc)

    # multimodality: repeated generations per prompt, spread over its own repeats
    mm_vals = []
    num_prompts = min(len(texts), ev.mmodality_prompts)
    gens = ev.mmodality_generations
    for rep in range(ev.mmodality_repeats):
        seed = derive_seed(config.seed, f"mmodality-rep{rep}")
        idx = np.random.default_rng(seed).choice(len(texts), size=num_prompts, replace=False)
        rep_tokens = tokens[list(idx)].repeat_interleave(gens, dim=0)
        rep_texts = [texts[i] for i in idx for _ in range(gens)]
        generated = _generate_for_texts(
            vqvae, diffusion, human_stats, object_stats,
            rep_tokens, rep_texts, settings, derive_seed(seed, "gen"), fps, threshold,
        )
        gen_embed = encode_motions(evaluator, generated)
        stacked = gen_embed.reshape(num_prompts, gens, -1)
        rng = np.random.default_rng(derive_seed(seed, "pairs"))
        mm_vals.append(multimodality(stacked, rng=rng))
    report.add_values("MModality", mm_vals)

    # disentanglement: modal codebook usage of the references vs. generator factors
    factors = {}
    for key in sorted(references[0].factors_gt):
        factors[key] = np.array([s.factors_gt[key] for s in references], dtype=np.float64)
    if factors:
        tensors = build_motion_tensors(references, vecs, human_stats, object_stats)
        latents = encode_all(vqvae, tensors)
        codes = modal_code_matrix(latents)
        result = mig_score(codes, factors)
        report.add(MetricValue(name="MIG", mean=result.score, ci95=0.0, repeats=1))

    rdir = reports_dir(out)
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "report.json").write_text(report.to_json())
    (rdir / "report.csv").write_text(report.to_csv())
    logger.info("evaluation report written to %s", rdir)
    return report


# --------------------------------------------------------------- smoke runs


def run_training(config: RunConfig, out: str | Path) -> dict[str, str]:
    """All training stages in order; returns the checkpoint ids."""
    with output_lock(out):
        stage_gen_data(config, out)
        ids = {
            "vqvae": stage_train_vqvae(config, out),
            "assoc": stage_train_assoc(config, out),
            "diffusion": stage_train_diffusion(config, out),
            "evaluator": stage_train_evaluator(config, out),
        }
    return ids


def smoke_config() -> RunConfig:
    """Minutes-scale end-to-end configuration for sanity runs and CI."""
    from .config import desk_config

    cfg = desk_config()
    return dataclasses.replace(
        cfg,
        data=dataclasses.replace(cfg.data, num_samples=24),
        vqvae=dataclasses.replace(
            cfg.vqvae, levels=3, latent_dim=32, codebook_entries=32, downsamples=(2, 2, 1)
        ),
        vqvae_train=dataclasses.replace(
            cfg.vqvae_train, steps_phase1=120, steps_phase2=40, batch_size=8
        ),
        assoc=dataclasses.replace(cfg.assoc, steps=80, embed_dim=48, top_u=4),
        diffusion=dataclasses.replace(
            cfg.diffusion, timesteps=50, steps=120, channels=(32, 64), pe_dim=32
        ),
        evaluator=dataclasses.replace(cfg.evaluator, steps=120),
        eval_settings=dataclasses.replace(
            cfg.eval_settings,
            repeats=2,
            mmodality_repeats=2,
            diversity_pairs=2,
            mmodality_generations=3,
            mmodality_prompts=2,
            sampler_steps=5,
        ),
    )


def smoke_pipeline(out: str | Path, config: RunConfig | None = None) -> dict:
    """Run every stage on a tiny configuration and time each one.

    Also times generation at several reverse-process step counts, since
    sampler latency scales linearly with them.
    """
    config = config or smoke_config()
    timings: dict[str, float] = {}

    def timed(name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        value = fn(*args, **kwargs)
        timings[name] = time.perf_counter() - start
        return value

    with output_lock(out):
        timed("gen-data", stage_gen_data, config, out)
        timed("train-vqvae", stage_train_vqvae, config, out)
        timed("train-assoc", stage_train_assoc, config, out)
        timed("train-diffusion", stage_train_diffusion, config, out)
        timed("train-evaluator", stage_train_evaluator, config, out)
        step_timings: dict[int, float] = {}
        for num_steps in (5, 15, min(50, config.diffusion.timesteps)):
            settings = GenerationSettings(sampler="ddim", num_steps=num_steps)
            start = time.perf_counter()
            stage_generate(
                config, out, ["two people carry a box together"], settings=settings
            )
            step_timings[num_steps] = time.perf_counter() - start
        timings["generate"] = sum(step_timings.values())
        report = timed("evaluate", stage_evaluate, config, out)

    total = sum(timings.values())
    lines = ["stage            seconds", "-" * 26]
    for name, secs in timings.items():
        lines.append(f"{name:<16s} {secs:7.1f}")
    lines.append("-" * 26)
    lines.append(f"{'total':<16s} {total:7.1f}")
    lines.append("")
    lines.append("reverse steps    seconds")
    for steps, secs in step_timings.items():
        lines.append(f"{steps:<16d} {secs:7.1f}")
    table = "\n".join(lines)
    logger.info("smoke pipeline finished in %.1fs\n%s", total, table)
    return {
        "timings": timings,
        "step_timings": step_timings,
        "total_seconds": total,
        "table": table,
        "report": report,
    }
