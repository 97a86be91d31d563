"""Dataset serialization.

A dataset is a directory:

    manifest.json            split ids, file map, generator settings
    samples/<id>.json        one clip per file
    cues/<id>.json           optional cue cache, written by the cue stage

Arrays are stored as base64 little-endian float32 with explicit shape
headers. JSON is emitted canonically (sorted keys, fixed indent, no
timestamps) so identical content yields identical bytes.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, FormatError
from .entities import EntitySpec, InteractionSample, MotionSequence

DATASET_FORMAT_VERSION = 1


def canonical_json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def encode_array(arr: np.ndarray) -> dict:
    """Array -> {"shape", "dtype": "f32le", "data": base64}."""
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return {
        "shape": [int(s) for s in arr.shape],
        "dtype": "f32le",
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_array(obj: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj["shape"])
        dtype = obj["dtype"]
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed array record: {exc}") from exc
    if dtype != "f32le":
        raise FormatError(f"unsupported array dtype tag {dtype!r}")
    expected = int(np.prod(shape)) * 4 if shape else 4
    if len(raw) != expected:
        raise FormatError(f"array payload is {len(raw)} bytes, shape {shape} needs {expected}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)


@dataclass
class DatasetManifest:
    seed: int
    fps: float
    split_ratios: tuple[float, float, float]
    splits: dict[str, list[str]]
    files: dict[str, str]
    generator: dict = field(default_factory=dict)
    format_version: int = DATASET_FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.format_version != DATASET_FORMAT_VERSION:
            raise FormatError(
                f"dataset format version {self.format_version} unsupported "
                f"(expected {DATASET_FORMAT_VERSION})"
            )
        for name in ("train", "val", "test"):
            if name not in self.splits:
                raise FormatError(f"manifest splits missing {name!r}")
        listed = [i for ids in self.splits.values() for i in ids]
        if len(listed) != len(set(listed)):
            raise FormatError("manifest splits overlap")
        missing = set(listed) - set(self.files)
        if missing:
            raise FormatError(f"split ids without files: {sorted(missing)[:4]}")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "seed": self.seed,
            "fps": self.fps,
            "split_ratios": list(self.split_ratios),
            "splits": {k: list(v) for k, v in self.splits.items()},
            "files": dict(self.files),
            "generator": self.generator,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            return cls(
                seed=int(d["seed"]),
                fps=float(d["fps"]),
                split_ratios=tuple(d["split_ratios"]),
                splits={k: list(v) for k, v in d["splits"].items()},
                files=dict(d["files"]),
                generator=d.get("generator", {}),
                format_version=int(d.get("format_version", -1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed manifest: {exc}") from exc


def _sequence_to_dict(seq: MotionSequence) -> dict:
    d = {
        "kind": seq.entity.kind,
        "keypoint_names": list(seq.entity.keypoint_names),
        "frames": encode_array(seq.frames),
    }
    if seq.entity.half_extents is not None:
        d["half_extents"] = [float(h) for h in seq.entity.half_extents]
    return d


def _sequence_from_dict(d: dict, fps: float) -> MotionSequence:
    spec = EntitySpec(
        kind=d["kind"],
        keypoint_names=tuple(d["keypoint_names"]),
        half_extents=tuple(d["half_extents"]) if "half_extents" in d else None,
    )
    return MotionSequence(entity=spec, frames=decode_array(d["frames"]), fps=fps)


def sample_to_dict(sample: InteractionSample, sample_id: str) -> dict:
    return {
        "format_version": DATASET_FORMAT_VERSION,
        "id": sample_id,
        "text": sample.text,
        "fps": sample.fps,
        "factors": {k: float(v) for k, v in sorted(sample.factors_gt.items())},
        "humans": [_sequence_to_dict(m) for m in sample.humans],
        "objects": [_sequence_to_dict(m) for m in sample.objects],
        "contacts": encode_array(sample.contacts_gt.astype(np.float32)),
    }


def sample_from_dict(d: dict) -> InteractionSample:
    try:
        fps = float(d["fps"])
        humans = [_sequence_from_dict(h, fps) for h in d["humans"]]
        objects = [_sequence_from_dict(o, fps) for o in d["objects"]]
        contacts = decode_array(d["contacts"]) > 0.5
        return InteractionSample(
            humans=humans,
            objects=objects,
            text=d["text"],
            contacts_gt=contacts,
            factors_gt={k: float(v) for k, v in d.get("factors", {}).items()},
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, ConfigurationError) as exc:
        raise FormatError(f"malformed sample record: {exc}") from exc


def save_dataset(
    path: str | Path,
    samples: dict[str, InteractionSample],
    manifest: DatasetManifest,
) -> Path:
    """Write a dataset directory; returns its path."""
    root = Path(path)
    (root / "samples").mkdir(parents=True, exist_ok=True)
    for sid, sample in samples.items():
        rel = manifest.files.get(sid)
        if rel is None:
            raise ConfigurationError(f"manifest has no file entry for sample {sid!r}")
        (root / rel).write_text(canonical_json_dumps(sample_to_dict(sample, sid)))
    (root / "manifest.json").write_text(canonical_json_dumps(manifest.to_dict()))
    return root


def load_manifest(path: str | Path) -> DatasetManifest:
    mpath = Path(path) / "manifest.json"
    if not mpath.is_file():
        raise FormatError(f"{path} is not a dataset directory (no manifest.json)")
    try:
        raw = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest.json is not valid JSON: {exc}") from exc
    return DatasetManifest.from_dict(raw)


def load_dataset(path: str | Path) -> tuple[dict[str, InteractionSample], DatasetManifest]:
    root = Path(path)
    manifest = load_manifest(root)
    samples: dict[str, InteractionSample] = {}
    for sid in sorted(manifest.files):
        fpath = root / manifest.files[sid]
        try:
            raw = json.loads(fpath.read_text())
        except FileNotFoundError as exc:
            raise FormatError(f"sample {sid}: file {fpath.name} missing") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"sample {sid}: invalid JSON: {exc}") from exc
        try:
            samples[sid] = sample_from_dict(raw)
        except FormatError as exc:
            raise FormatError(f"sample {sid}: {exc}") from exc
    return samples, manifest


def save_cue_hierarchy(dataset_dir: str | Path, sample_id: str, payload: dict) -> Path:
    cdir = Path(dataset_dir) / "cues"
    cdir.mkdir(parents=True, exist_ok=True)
    out = cdir / f"{sample_id}.json"
    out.write_text(canonical_json_dumps(payload))
    return out


def load_cue_hierarchy(dataset_dir: str | Path, sample_id: str) -> dict:
    path = Path(dataset_dir) / "cues" / f"{sample_id}.json"
    if not path.is_file():
        raise FormatError(f"no cached cues for sample {sample_id!r} under {path.parent}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"cue cache for {sample_id!r} is not valid JSON: {exc}") from exc
