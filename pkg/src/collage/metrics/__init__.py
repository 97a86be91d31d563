"""Evaluation: learned embedding space, generative and geometric metrics,
disentanglement scoring, and report containers."""

from .evaluator import (
    EvaluatorConfig,
    EvaluatorTrainResult,
    MotionTextEvaluator,
    encode_motions,
    encode_texts,
    motion_feature_matrix,
    train_evaluator,
)
from .generative import diversity, fid, frechet_distance, mm_dist, multimodality, r_precision
from .interaction import contact_accuracy, predicted_contacts, rr_joint_error, rr_keypoint_error
from .mig import (
    MigResult,
    discretize_factor,
    entropy,
    mig_score,
    modal_code_labels,
    modal_code_matrix,
    mutual_information,
)
from .report import MetricReport, MetricValue

__all__ = [
    "EvaluatorConfig",
    "EvaluatorTrainResult",
    "MotionTextEvaluator",
    "encode_motions",
    "encode_texts",
    "motion_feature_matrix",
    "train_evaluator",
    "diversity",
    "fid",
    "frechet_distance",
    "mm_dist",
    "multimodality",
    "r_precision",
    "contact_accuracy",
    "predicted_contacts",
    "rr_joint_error",
    "rr_keypoint_error",
    "MigResult",
    "discretize_factor",
    "entropy",
    "mig_score",
    "modal_code_labels",
    "modal_code_matrix",
    "mutual_information",
    "MetricReport",
    "MetricValue",
]
