from .model import (
    AssociationConfig,
    AssociationEmbedders,
    AugmentedCueSet,
    association_loss,
    augment_cues,
    combined_level_cues,
    top_u_codes,
)
from .train import (
    AssocTrainResult,
    LevelPositives,
    mine_positives,
    retrieval_accuracy,
    train_association,
    union_codebooks,
)

__all__ = [
    "AssociationConfig",
    "AssociationEmbedders",
    "AugmentedCueSet",
    "association_loss",
    "augment_cues",
    "combined_level_cues",
    "top_u_codes",
    "AssocTrainResult",
    "LevelPositives",
    "mine_positives",
    "retrieval_accuracy",
    "train_association",
    "union_codebooks",
]
