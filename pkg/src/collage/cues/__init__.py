from .embedder import CueEmbedding, HashingTextEmbedder, build_cue_embeddings
from .llm import LlmClientConfig, fetch_llm_cues
from .templates import CueHierarchy, CueLevel, normalize_text, template_cues

__all__ = [
    "CueEmbedding",
    "HashingTextEmbedder",
    "build_cue_embeddings",
    "LlmClientConfig",
    "fetch_llm_cues",
    "CueHierarchy",
    "CueLevel",
    "normalize_text",
    "template_cues",
]
