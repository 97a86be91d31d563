"""Deterministic hierarchical planning cues.

Level 1 describes the whole task; deeper levels refine it (phases, roles,
limb-level detail, then named fine-grained aspects). Each level carries one
text for the agents and one for the objects. Pure functions of
(sample text, factors, level count).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..data.generator import FACTOR_NAMES, factor_words
from ..errors import ConfigurationError

_DEFAULT_WORDS = {
    "size": "medium",
    "speed": "steady",
    "height": "waist",
    "side": "either",
    "heading": "across the room",
}

_FINE_ASPECTS = (
    "step timing",
    "wrist alignment",
    "torso lean",
    "gaze direction",
    "breathing rhythm",
    "finger pressure",
)


def normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip().lower())


@dataclass(frozen=True)
class CueLevel:
    humans: str
    objects: str

    def __post_init__(self) -> None:
        if not self.humans or not self.objects:
            raise ConfigurationError("cue level texts must be non-empty")


@dataclass(frozen=True)
class CueHierarchy:
    """Cue texts from coarse (level 1) to fine (level L)."""

    levels: tuple[CueLevel, ...]
    provenance: str = "template"
    source_text: str = ""

    def __post_init__(self) -> None:
        if len(self.levels) < 1:
            raise ConfigurationError("cue hierarchy needs at least one level")
        if self.provenance not in ("template", "llm"):
            raise ConfigurationError(f"provenance must be template|llm, got {self.provenance!r}")

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "source_text": self.source_text,
            "levels": [{"humans": lv.humans, "objects": lv.objects} for lv in self.levels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CueHierarchy":
        try:
            levels = tuple(CueLevel(humans=lv["humans"], objects=lv["objects"]) for lv in d["levels"])
            return cls(
                levels=levels,
                provenance=d.get("provenance", "template"),
                source_text=d.get("source_text", ""),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed cue hierarchy record: {exc}") from exc


def _words(factors: dict[str, float]) -> dict[str, str]:
    unknown = set(factors) - set(FACTOR_NAMES)
    if unknown:
        raise ConfigurationError(f"unknown factor keys: {sorted(unknown)}")
    if set(factors) == set(FACTOR_NAMES):
        return factor_words(factors)
    words = dict(_DEFAULT_WORDS)
    if factors:
        full = {name: factors.get(name, 0.0) for name in FACTOR_NAMES}
        computed = factor_words(full)
        for key, factor in (
            ("size", "object_size"),
            ("speed", "speed"),
            ("height", "carry_height"),
            ("side", "grasp_side"),
            ("heading", "heading"),
        ):
            if factor in factors:
                words[key] = computed[key]
    return words


def template_cues(sample_text: str, factors: dict[str, float], levels: int) -> CueHierarchy:
    """Build an L-level cue hierarchy from a clip description and its factors."""
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    text = normalize_text(sample_text)
    if not text:
        raise ConfigurationError("sample text must be non-empty")
    w = _words(factors)
    built: list[CueLevel] = []
    for level in range(1, levels + 1):
        if level == 1:
            lv = CueLevel(
                humans=text,
                objects=f"a {w['size']} box is carried {w['heading']} at {w['height']} height",
            )
        elif level == 2:
            lv = CueLevel(
                humans=(
                    f"approach and grip the box, hold it at {w['height']} height, travel "
                    f"{w['heading']} at a {w['speed']} pace, then release"
                ),
                objects=(
                    f"the box is lifted to {w['height']} height, travels {w['heading']}, "
                    f"and settles"
                ),
            )
        elif level == 3:
            lv = CueLevel(
                humans=(
                    f"one carrier leads {w['heading']} while the other mirrors them from the "
                    f"opposite face; both keep the grip toward the {w['side']} side"
                ),
                objects=(
                    f"the box stays level between the two carriers with the grip shifted to "
                    f"the {w['side']} side"
                ),
            )
        elif level == 4:
            lv = CueLevel(
                humans=(
                    f"arms extend to the {w['side']}-side grip at {w['height']} height; legs "
                    f"step at a {w['speed']} cadence"
                ),
                objects=f"a {w['size']} box held rigid at its {w['side']}-side grip points",
            )
        else:
            aspect = _FINE_ASPECTS[(level - 5) % len(_FINE_ASPECTS)]
            lv = CueLevel(
                humans=(
                    f"detail {level}: refine {aspect}, keeping the {w['speed']} cadence and a "
                    f"steady {w['side']}-side grip"
                ),
                objects=f"detail {level}: box pose steady at {w['height']} height",
            )
        built.append(lv)
    return CueHierarchy(levels=tuple(built), provenance="template", source_text=text)
