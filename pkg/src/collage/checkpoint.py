"""Checkpoint serialization.

A checkpoint is a directory holding ``model.json`` (stage name, full config
echo, parameter table, upstream checkpoint ids, integrity hash) and
``weights.bin`` (concatenated little-endian tensors). Stages that build on
earlier stages record the upstream checkpoint ids; loaders refuse to combine
artifacts whose ids disagree.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data.io import canonical_json_dumps
from .errors import CheckpointMismatchError, FormatError

CHECKPOINT_FORMAT_VERSION = 1

_DTYPE_TAGS = {
    torch.float32: ("f32le", "<f4"),
    torch.float64: ("f64le", "<f8"),
    torch.int64: ("i64le", "<i8"),
}
_TAG_TO_NP = {tag: np_dtype for tag, np_dtype in _DTYPE_TAGS.values()}
_TAG_TO_TORCH = {tag: t for t, (tag, _) in _DTYPE_TAGS.items()}


def checkpoint_fingerprint(stage: str, config: dict, seed: int, upstream: dict[str, str]) -> str:
    """Stable id for a training run: same stage+config+seed+upstream -> same id."""
    payload = canonical_json_dumps(
        {"stage": stage, "config": config, "seed": seed, "upstream": dict(sorted(upstream.items()))}
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class CheckpointRecord:
    stage: str
    config: dict
    checkpoint_id: str
    seed: int
    upstream: dict[str, str]
    metadata: dict
    state_dict: dict[str, torch.Tensor]
    format_version: int = CHECKPOINT_FORMAT_VERSION

    def require_upstream(self, name: str, expected_id: str) -> None:
        actual = self.upstream.get(name)
        if actual != expected_id:
            raise CheckpointMismatchError(
                f"{self.stage} checkpoint was trained against {name} checkpoint "
                f"{actual!r}, but {expected_id!r} was provided"
            )


def save_checkpoint(
    path: str | Path,
    stage: str,
    state_dict: dict[str, torch.Tensor],
    config: dict,
    seed: int,
    upstream: dict[str, str] | None = None,
    metadata: dict | None = None,
) -> str:
    """Write a checkpoint directory; returns its checkpoint id."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    upstream = dict(upstream or {})
    params = []
    blobs = []
    offset = 0
    for name, tensor in state_dict.items():
        t = tensor.detach().cpu().contiguous()
        if t.dtype not in _DTYPE_TAGS:
            raise FormatError(f"unsupported checkpoint tensor dtype {t.dtype} for {name!r}")
        tag, np_dtype = _DTYPE_TAGS[t.dtype]
        raw = np.ascontiguousarray(t.numpy(), dtype=np_dtype).tobytes()
        params.append(
            {"name": name, "dtype": tag, "shape": [int(s) for s in t.shape], "offset": offset}
        )
        blobs.append(raw)
        offset += len(raw)
    weights = b"".join(blobs)
    record = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "stage": stage,
        "config": config,
        "seed": int(seed),
        "upstream": upstream,
        "metadata": metadata or {},
        "params": params,
        "weights_bytes": offset,
        "weights_sha256": hashlib.sha256(weights).hexdigest(),
        "checkpoint_id": checkpoint_fingerprint(stage, config, seed, upstream),
    }
    (root / "weights.bin").write_bytes(weights)
    (root / "model.json").write_text(canonical_json_dumps(record))
    return record["checkpoint_id"]


def load_checkpoint(path: str | Path, expected_stage: str | None = None) -> CheckpointRecord:
    root = Path(path)
    mpath = root / "model.json"
    if not mpath.is_file():
        raise FormatError(f"{root} is not a checkpoint directory (no model.json)")
    try:
        record = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"model.json is not valid JSON: {exc}") from exc
    if record.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise FormatError(
            f"checkpoint format version {record.get('format_version')} unsupported"
        )
    stage = record.get("stage", "")
    if expected_stage is not None and stage != expected_stage:
        raise CheckpointMismatchError(
            f"expected a {expected_stage!r} checkpoint, found {stage!r} at {root}"
        )
    weights = (root / "weights.bin").read_bytes()
    if len(weights) != record.get("weights_bytes"):
        raise FormatError(
            f"weights.bin is {len(weights)} bytes, expected {record.get('weights_bytes')}"
        )
    digest = hashlib.sha256(weights).hexdigest()
    if digest != record.get("weights_sha256"):
        raise FormatError("weights.bin checksum mismatch (corrupt checkpoint)")
    state: dict[str, torch.Tensor] = {}
    try:
        for p in record["params"]:
            np_dtype = _TAG_TO_NP[p["dtype"]]
            shape = tuple(int(s) for s in p["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = int(p["offset"])
            nbytes = count * np.dtype(np_dtype).itemsize
            arr = np.frombuffer(weights, dtype=np_dtype, count=count, offset=start)
            state[p["name"]] = torch.from_numpy(arr.copy()).reshape(shape).to(
                _TAG_TO_TORCH[p["dtype"]]
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed parameter table: {exc}") from exc
    return CheckpointRecord(
        stage=stage,
        config=record.get("config", {}),
        checkpoint_id=record.get("checkpoint_id", ""),
        seed=int(record.get("seed", 0)),
        upstream=dict(record.get("upstream", {})),
        metadata=dict(record.get("metadata", {})),
        state_dict=state,
    )
