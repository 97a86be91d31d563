"""Optional external language-model cue provider.

When an endpoint is configured, cue hierarchies are requested over HTTP with
a strict JSON contract; any transport or schema failure retries and then
falls back to the deterministic templates so pipelines never stall on an
external service.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConfigurationError
from .templates import CueHierarchy, CueLevel, template_cues

log = logging.getLogger(__name__)

# transport(url, payload, headers, timeout_s) -> (status_code, body_text)
Transport = Callable[[str, dict, dict, float], tuple[int, str]]

_PROMPT = (
    "Decompose the following two-person object-carrying clip into {levels} planning levels, "
    "from the whole task down to fine detail. Respond with JSON only: "
    '{{"cues": [{{"level": <1..{levels}>, "humans": "<agent cue>", "objects": "<object cue>"}}]}} '
    "with exactly one entry per level. Clip: {text}"
)


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str = ""
    api_key: str = ""
    model: str = "default"
    timeout_s: float = 10.0
    max_retries: int = 2
    backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ConfigurationError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")

    @classmethod
    def from_env(cls) -> "LlmClientConfig":
        import os

        return cls(
            endpoint=os.environ.get("COLLAGE_LLM_ENDPOINT", ""),
            api_key=os.environ.get("COLLAGE_LLM_API_KEY", ""),
        )


def _requests_transport(url: str, payload: dict, headers: dict, timeout_s: float) -> tuple[int, str]:
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=timeout_s)
    return resp.status_code, resp.text


def _parse_response(body: str, levels: int) -> CueHierarchy:
    obj = json.loads(body)
    cues = obj["cues"]
    if not isinstance(cues, list) or len(cues) != levels:
        raise ValueError(f"expected {levels} cue entries, got {len(cues) if isinstance(cues, list) else type(cues)}")
    by_level: dict[int, CueLevel] = {}
    for entry in cues:
        lvl = int(entry["level"])
        humans = entry["humans"]
        objects = entry["objects"]
        if not isinstance(humans, str) or not isinstance(objects, str) or not humans or not objects:
            raise ValueError(f"level {lvl}: cue texts must be non-empty strings")
        if lvl in by_level:
            raise ValueError(f"duplicate level {lvl}")
        by_level[lvl] = CueLevel(humans=humans, objects=objects)
    if sorted(by_level) != list(range(1, levels + 1)):
        raise ValueError(f"levels present: {sorted(by_level)}, expected 1..{levels}")
    return CueHierarchy(
        levels=tuple(by_level[l] for l in range(1, levels + 1)), provenance="llm"
    )


def fetch_llm_cues(
    sample_text: str,
    levels: int,
    config: LlmClientConfig,
    factors: dict[str, float] | None = None,
    transport: Transport | None = None,
) -> CueHierarchy:
    """Cue hierarchy from the configured endpoint, else template fallback."""
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    if not config.endpoint:
        log.info("no cue endpoint configured; using template cues")
        return template_cues(sample_text, factors or {}, levels)
    send = transport or _requests_transport
    payload = {
        "model": config.model,
        "prompt": _PROMPT.format(levels=levels, text=sample_text),
        "levels": levels,
    }
    headers = {"content-type": "application/json"}
    if config.api_key:
        headers["authorization"] = f"Bearer {config.api_key}"
    last_err = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt and config.backoff_s:
            time.sleep(config.backoff_s * attempt)
        try:
            status, body = send(config.endpoint, payload, headers, config.timeout_s)
        except Exception as exc:  # transport-level failure
            last_err = f"transport error: {exc}"
            log.warning("cue request attempt %d failed: %s", attempt + 1, last_err)
            continue
        if status != 200:
            last_err = f"http status {status}"
            log.warning("cue request attempt %d failed: %s", attempt + 1, last_err)
            continue
        try:
            return _parse_response(body, levels)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            last_err = f"malformed response: {exc}"
            log.warning("cue request attempt %d failed: %s", attempt + 1, last_err)
    log.warning("cue endpoint unusable after %d attempts (%s); falling back to templates",
                config.max_retries + 1, last_err)
    return template_cues(sample_text, factors or {}, levels)
