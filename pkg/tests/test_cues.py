"""Hierarchical planning cues: templates, hashed embedder, and remote client."""

import json

import numpy as np
import pytest

from collage.cues import (
    CueHierarchy,
    CueLevel,
    HashingTextEmbedder,
    LlmClientConfig,
    build_cue_embeddings,
    fetch_llm_cues,
    normalize_text,
    template_cues,
)
from collage.errors import ConfigurationError

FACTORS = {
    "carry_height": 1.1,
    "speed": 0.9,
    "heading": 0.4,
    "grasp_side": 1.0,
    "object_size": 0.5,
}
TEXT = "Two people carry a small box across the room."


# ---------------------------------------------------------------- templates


def test_normalize_text_collapses_whitespace_and_case():
    assert normalize_text("  Two  People\tCarry\n") == "two people carry"


def test_template_cues_deterministic_and_structured():
    a = template_cues(TEXT, FACTORS, levels=6)
    b = template_cues(TEXT, FACTORS, levels=6)
    assert a == b
    assert a.num_levels == 6
    assert a.provenance == "template"
    assert a.source_text == normalize_text(TEXT)
    assert a.levels[0].humans == normalize_text(TEXT)
    for lv in a.levels:
        assert lv.humans and lv.objects


def test_template_cues_levels_are_distinct():
    h = template_cues(TEXT, FACTORS, levels=8)
    human_texts = [lv.humans for lv in h.levels]
    assert len(set(human_texts)) == len(human_texts)


def test_template_cues_reflect_factor_changes():
    low = template_cues(TEXT, dict(FACTORS, carry_height=0.4), levels=2)
    high = template_cues(TEXT, dict(FACTORS, carry_height=1.6), levels=2)
    assert low.levels[1].humans != high.levels[1].humans
    assert low.levels[0].objects != high.levels[0].objects


def test_template_cues_partial_factors_use_defaults():
    h = template_cues(TEXT, {}, levels=2)
    assert "waist height" in h.levels[0].objects
    h2 = template_cues(TEXT, {"carry_height": 1.6}, levels=2)
    assert "waist height" not in h2.levels[0].objects


def test_template_cues_validation():
    with pytest.raises(ConfigurationError):
        template_cues(TEXT, FACTORS, levels=0)
    with pytest.raises(ConfigurationError):
        template_cues("   ", FACTORS, levels=2)
    with pytest.raises(ConfigurationError):
        template_cues(TEXT, {"mass": 3.0}, levels=2)


def test_hierarchy_dict_roundtrip():
    h = template_cues(TEXT, FACTORS, levels=4)
    back = CueHierarchy.from_dict(h.to_dict())
    assert back == h


def test_hierarchy_rejects_malformed():
    with pytest.raises(ConfigurationError):
        CueHierarchy.from_dict({"levels": [{"humans": "a"}]})
    with pytest.raises(ConfigurationError):
        CueHierarchy(levels=())
    with pytest.raises(ConfigurationError):
        CueHierarchy(levels=(CueLevel("a", "b"),), provenance="oracle")
    with pytest.raises(ConfigurationError):
        CueLevel(humans="", objects="b")


# ----------------------------------------------------------------- embedder


def test_embedder_deterministic_across_instances():
    a = HashingTextEmbedder(dim=128, seed=7).embed(TEXT)
    b = HashingTextEmbedder(dim=128, seed=7).embed(TEXT)
    np.testing.assert_array_equal(a, b)


def test_embedder_seed_changes_vectors():
    a = HashingTextEmbedder(dim=128, seed=7).embed(TEXT)
    b = HashingTextEmbedder(dim=128, seed=8).embed(TEXT)
    assert not np.allclose(a, b)


def test_embedding_is_unit_norm_float32():
    for text in (TEXT, "x", "lift the crate"):
        vec = HashingTextEmbedder(dim=64, seed=0).embed(text)
        assert vec.dtype == np.float32
        assert vec.shape == (64,)
        np.testing.assert_allclose(np.linalg.norm(vec), 1.0, atol=1e-6)


def test_embedding_matches_bucket_reconstruction():
    emb = HashingTextEmbedder(dim=96, seed=3)
    vec = np.zeros(96)
    for bucket, sign in emb.ngram_buckets(TEXT):
        vec[bucket] += sign
    vec /= np.linalg.norm(vec)
    np.testing.assert_allclose(emb.embed(TEXT), vec.astype(np.float32), atol=1e-7)


def test_embedding_invariant_to_surface_whitespace():
    emb = HashingTextEmbedder(dim=64, seed=1)
    np.testing.assert_array_equal(emb.embed("Lift  THE box"), emb.embed("lift the box"))


def test_embedder_id_encodes_configuration():
    emb = HashingTextEmbedder(dim=256, seed=5, ngram_sizes=(2, 4))
    assert emb.embedder_id == "hashgram-v1-d256-n2.4-s5"


def test_embedder_validation():
    with pytest.raises(ConfigurationError):
        HashingTextEmbedder(dim=4)
    with pytest.raises(ConfigurationError):
        HashingTextEmbedder(ngram_sizes=())
    with pytest.raises(ConfigurationError):
        HashingTextEmbedder().embed("   ")


def test_build_cue_embeddings_stacks_per_level_rows():
    emb = HashingTextEmbedder(dim=64, seed=2)
    h = template_cues(TEXT, FACTORS, levels=3)
    ce = build_cue_embeddings(h, emb)
    assert ce.vectors.shape == (3, 2, 64)
    assert ce.num_levels == 3 and ce.dim == 64
    assert ce.embedder_id == emb.embedder_id
    np.testing.assert_array_equal(ce.vectors[1, 0], emb.embed(h.levels[1].humans))
    np.testing.assert_array_equal(ce.vectors[2, 1], emb.embed(h.levels[2].objects))


# -------------------------------------------------------------- remote cues


def _valid_body(levels):
    return json.dumps(
        {
            "cues": [
                {"level": l, "humans": f"agents level {l}", "objects": f"objects level {l}"}
                for l in range(1, levels + 1)
            ]
        }
    )


def test_fetch_without_endpoint_falls_back_to_templates():
    got = fetch_llm_cues(TEXT, 3, LlmClientConfig(), factors=FACTORS)
    assert got == template_cues(TEXT, FACTORS, 3)
    assert got.provenance == "template"


def test_fetch_parses_remote_hierarchy():
    calls = []

    def transport(url, payload, headers, timeout_s):
        calls.append((url, payload, headers))
        return 200, _valid_body(payload["levels"])

    cfg = LlmClientConfig(endpoint="http://cues.local/v1", api_key="k", model="m")
    got = fetch_llm_cues(TEXT, 4, cfg, factors=FACTORS, transport=transport)
    assert got.provenance == "llm"
    assert got.num_levels == 4
    assert got.levels[2].humans == "agents level 3"
    url, payload, headers = calls[0]
    assert url == "http://cues.local/v1"
    assert payload["model"] == "m" and payload["levels"] == 4
    assert headers["authorization"] == "Bearer k"


def test_fetch_accepts_out_of_order_levels():
    body = json.dumps(
        {
            "cues": [
                {"level": 2, "humans": "second", "objects": "o2"},
                {"level": 1, "humans": "first", "objects": "o1"},
            ]
        }
    )
    cfg = LlmClientConfig(endpoint="http://cues.local")
    got = fetch_llm_cues(TEXT, 2, cfg, transport=lambda *a: (200, body))
    assert [lv.humans for lv in got.levels] == ["first", "second"]


def test_fetch_retries_then_falls_back():
    attempts = []

    def failing(url, payload, headers, timeout_s):
        attempts.append(1)
        raise OSError("connection refused")

    cfg = LlmClientConfig(endpoint="http://cues.local", max_retries=2, backoff_s=0.0)
    got = fetch_llm_cues(TEXT, 2, cfg, factors=FACTORS, transport=failing)
    assert len(attempts) == 3
    assert got == template_cues(TEXT, FACTORS, 2)


@pytest.mark.parametrize(
    "response",
    [
        (500, "upstream error"),
        (200, "not json"),
        (200, json.dumps({"cues": []})),
        (200, json.dumps({"cues": [{"level": 1, "humans": "a", "objects": ""}]})),
        (
            200,
            json.dumps(
                {
                    "cues": [
                        {"level": 1, "humans": "a", "objects": "b"},
                        {"level": 1, "humans": "c", "objects": "d"},
                    ]
                }
            ),
        ),
    ],
)
def test_fetch_rejects_bad_responses(response):
    cfg = LlmClientConfig(endpoint="http://cues.local", max_retries=0, backoff_s=0.0)
    got = fetch_llm_cues(TEXT, 2 if "cues" in response[1] else 2, cfg, transport=lambda *a: response)
    assert got.provenance == "template"


def test_client_config_validation_and_env(monkeypatch):
    with pytest.raises(ConfigurationError):
        LlmClientConfig(timeout_s=0.0)
    with pytest.raises(ConfigurationError):
        LlmClientConfig(max_retries=-1)
    monkeypatch.setenv("COLLAGE_LLM_ENDPOINT", "http://cues.local")
    monkeypatch.setenv("COLLAGE_LLM_API_KEY", "secret")
    cfg = LlmClientConfig.from_env()
    assert cfg.endpoint == "http://cues.local" and cfg.api_key == "secret"
