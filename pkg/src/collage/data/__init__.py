from .entities import (
    CONTACT_JOINT_INDICES,
    CONTACT_JOINT_NAMES,
    HUMAN_JOINT_NAMES,
    OBJECT_KEYPOINT_NAMES,
    EntitySpec,
    InteractionSample,
    MotionSequence,
    box_spec,
    human_spec,
)
from .generator import GeneratorConfig, generate_dataset, generate_sample, sample_id
from .geometry import (
    BoxPose,
    box_pose_from_corners,
    box_pose_from_corners_t,
    box_signed_distance_t,
    contact_ramp,
    contact_ramp_t,
    signed_distance,
)
from .io import (
    DATASET_FORMAT_VERSION,
    DatasetManifest,
    canonical_json_dumps,
    decode_array,
    encode_array,
    load_cue_hierarchy,
    load_dataset,
    load_manifest,
    sample_from_dict,
    sample_to_dict,
    save_cue_hierarchy,
    save_dataset,
)
from .normalize import (
    NormalizationStats,
    compute_normalization_stats,
    denormalize_features,
    flatten_features,
    normalize_features,
    unflatten_features,
)

__all__ = [
    "CONTACT_JOINT_INDICES",
    "CONTACT_JOINT_NAMES",
    "HUMAN_JOINT_NAMES",
    "OBJECT_KEYPOINT_NAMES",
    "EntitySpec",
    "InteractionSample",
    "MotionSequence",
    "box_spec",
    "human_spec",
    "GeneratorConfig",
    "generate_dataset",
    "generate_sample",
    "sample_id",
    "BoxPose",
    "box_pose_from_corners",
    "box_pose_from_corners_t",
    "box_signed_distance_t",
    "contact_ramp",
    "contact_ramp_t",
    "signed_distance",
    "DATASET_FORMAT_VERSION",
    "DatasetManifest",
    "canonical_json_dumps",
    "decode_array",
    "encode_array",
    "load_cue_hierarchy",
    "load_dataset",
    "load_manifest",
    "sample_from_dict",
    "sample_to_dict",
    "save_cue_hierarchy",
    "save_dataset",
    "NormalizationStats",
    "compute_normalization_stats",
    "denormalize_features",
    "flatten_features",
    "normalize_features",
    "unflatten_features",
]
