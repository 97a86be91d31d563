from .config import HvqConfig, LossWeights
from .losses import GeometryContext, LossBreakdown, compute_losses
from .model import HierarchicalMotionVqvae, LevelLatents, VqvaeOutput
from .quantizer import VectorQuantizerEma
from .train import (
    MotionTensors,
    TrainSettings,
    VqvaeTrainResult,
    build_motion_tensors,
    encode_all,
    train_vqvae,
)

__all__ = [
    "HvqConfig",
    "LossWeights",
    "GeometryContext",
    "LossBreakdown",
    "compute_losses",
    "HierarchicalMotionVqvae",
    "LevelLatents",
    "VqvaeOutput",
    "VectorQuantizerEma",
    "MotionTensors",
    "TrainSettings",
    "VqvaeTrainResult",
    "build_motion_tensors",
    "encode_all",
    "train_vqvae",
]
