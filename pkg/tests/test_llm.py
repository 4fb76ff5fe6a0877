import dataclasses
import logging

import pytest

from sgplan.automaton import compile
from sgplan.fixtures import (GUIDANCE_RESPONSES, HOUSE_MISSION, TRANSLATION_RESPONSES, build_house, data_path,
                             house_scene)
from sgplan.heuristics import Call, LlmGuidance, remaining_mission
from sgplan.llm import (FEW_SHOT, NEEDS_HUMAN_REPHRASE, LiveTransport, RecordTransport, ReplayMismatch,
                        ReplayTransport, ScriptedTransport, Transcript, TransportError, build_translation_prompts,
                        extract_entities, fetch_guidance, formula_file_text, guidance_prompt, parse_calls,
                        prompt_hash, translate)
from sgplan.ltl import Atom, Eventually, parse_prefix
from sgplan.scene import SceneSpec, generate_scene

EXPECTED = "& F & bedroom_2 F & kitchen_3 F oven_11 ! tv_9"


@pytest.fixture(scope="module")
def house():
    return build_house()


# translation


def test_replayed_house_translation(house):
    s = translate(HOUSE_MISSION, house, ReplayTransport(data_path("house_translate.json")))
    assert s.ok and s.attempts == 2
    assert s.formula == parse_prefix(EXPECTED)
    assert s.mu_regex == ["bedroom_2", "kitchen_3", "oven_11", "tv_9"]
    assert s.unknown_entities == []
    assert len(s.transcript) == 3
    assert formula_file_text(s.formula) == "& F & p2 F & p3 F p11 ! p9\n"
    # the rejected first answer used G
    assert "G ! tv_9" in s.transcript[1][1]


def test_correction_loop(house):
    t = ScriptedTransport(["go to the bedroom_2", "G bedroom_2", "F bedroom_2"])
    s = translate("go to the bedroom 2", house, t)
    assert s.ok and s.attempts == 2 and s.formula == Eventually(Atom("bedroom_2"))
    # the retry carries the checker's diagnostic and the rejected answer
    assert "always operator" in t.prompts[2] and "G bedroom_2" in t.prompts[2]


def test_exhaustion_needs_rephrase(house):
    t = ScriptedTransport(["go to the attic_77", "F & attic_77", "F attic_77"])
    s = translate("go to the attic", house, t, max_attempts=2)
    assert s.outcome == NEEDS_HUMAN_REPHRASE and not s.ok
    assert s.attempts == 2 and s.formula is None
    assert "attic_77" in s.diagnostic
    assert s.unknown_entities == ["attic_77"]


def test_max_attempts_must_be_positive(house):
    with pytest.raises(ValueError):
        translate("x", house, ScriptedTransport([]), max_attempts=0)


def test_fenced_answers_are_accepted(house):
    t = ScriptedTransport(["go to the bedroom_2", "```\nFormula: F bedroom_2\n```"])
    assert translate("go to the bedroom 2", house, t).formula == Eventually(Atom("bedroom_2"))


def test_entity_extraction(house):
    found, unknown = extract_entities("go to bedroom_2, the (11) and Kitchen_3, skip ghost_99 and (42)", house)
    assert found == ["bedroom_2", "oven_11", "kitchen_3"]
    assert unknown == ["ghost_99", "(42)"]


# prompts


def test_prompts_are_deterministic(house):
    h = house.attribute_hierarchy()
    a = build_translation_prompts(h, HOUSE_MISSION, "m", ["oven_11"])
    b = build_translation_prompts(build_house().attribute_hierarchy(), HOUSE_MISSION, "m", ["oven_11"])
    assert a == b
    assert prompt_hash(a["unique"]) == prompt_hash(b["unique"])
    assert h in a["unique"]


def test_translation_prompt_omits_hierarchy(house):
    h = house.attribute_hierarchy()
    p = build_translation_prompts(h, HOUSE_MISSION, "go to the oven_11", ["oven_11"])["translate"]
    assert "living room (1)" not in p and h not in p
    big = generate_scene(SceneSpec(floors=3, rooms=(4, 4), room_size=(9, 9)), 0)
    q = build_translation_prompts(big.attribute_hierarchy(), HOUSE_MISSION, "go to the oven_11",
                                  ["oven_11"])["translate"]
    assert q == p  # size does not depend on the scene


def test_few_shot_block_covers_operators():
    formulas = [f for _, f in FEW_SHOT]
    assert len(formulas) >= 3
    tokens = set(" ".join(formulas).split())
    assert {"F", "U", "&", "!"} <= tokens
    for f in formulas:
        parse_prefix(f)


# guidance


def test_replayed_guidance(house):
    dfa = compile(parse_prefix(EXPECTED))
    q = dfa.step(dfa.initial, frozenset({"bedroom_2"}))
    states = [(1, q)] + [(1, f) for f in dfa.accepting]
    guidance = fetch_guidance(house, dfa, states, ReplayTransport(data_path("house_guidance.json")))
    assert guidance.plans[1, q] == [Call("move", 1, 3), Call("reach", 3, 11)]
    assert all(guidance.plans[1, f] == [] for f in dfa.accepting)


def test_accepting_state_sends_nothing(house, tmp_path):
    dfa = compile(parse_prefix("F oven_11"))
    acc = next(iter(dfa.accepting))
    guidance = fetch_guidance(house, dfa, [(1, acc)], ScriptedTransport([]), cache=tmp_path / "g.json")
    assert guidance.plans == {(1, acc): []}
    assert LlmGuidance.load(tmp_path / "g.json") == guidance


def test_malformed_calls_are_dropped(house, caplog):
    text = '<plan><call fn="move" from="1" to="3"/><call fn="move" from="x" to="3"/></plan>'
    assert parse_calls(text, ["move", "reach"]) == ([Call("move", 1, 3)], 1)
    assert parse_calls('<call fn="fly" from="1" to="2"/>', ["move"]) == ([], 1)
    dfa = compile(parse_prefix("F oven_11"))
    with caplog.at_level(logging.WARNING):
        g = fetch_guidance(house, dfa, [(1, dfa.initial)], ScriptedTransport([text]))
    assert g.plans[1, dfa.initial] == [Call("move", 1, 3)]
    assert "malformed" in caplog.text


def test_unknown_attribute_rejects_plan(house):
    dfa = compile(parse_prefix("F oven_11"))
    bad = '<call fn="move" from="1" to="3"/><call fn="reach" from="3" to="404"/>'
    g = fetch_guidance(house, dfa, [(1, dfa.initial)], ScriptedTransport([bad]))
    assert (1, dfa.initial) not in g.plans


def test_guidance_prompt_components(house):
    dfa = compile(parse_prefix(EXPECTED))
    q = dfa.step(dfa.initial, frozenset({"bedroom_2"}))
    p = guidance_prompt(house, 1, remaining_mission(dfa, q, house))
    assert "The living room 1 connects to bedroom 2, kitchen 3" in p
    assert "move(a, b)" in p and "reach(a, b)" in p
    assert "Example:" in p
    assert "in the living room 1" in p and "visit the kitchen 3 and reach the oven 11" in p
    custom = guidance_prompt(house, 1, "reach the sink 12", [("open", "open(a, b) opens door b")])
    assert "open(a, b)" in custom and "move(a, b)" not in custom
    assert "visit the kitchen 3 and reach the oven 11" in GUIDANCE_RESPONSES


# transports


def test_record_then_replay_is_identical(tmp_path, house):
    path = tmp_path / "t.json"
    recorded = translate(HOUSE_MISSION, house, RecordTransport(ScriptedTransport(TRANSLATION_RESPONSES), path))
    replayed = translate(HOUSE_MISSION, house, ReplayTransport(path))
    assert dataclasses.asdict(recorded) == dataclasses.asdict(replayed)
    assert Transcript.load(path) == Transcript.load(data_path("house_translate.json"))


def test_replay_detects_drift(tmp_path, house):
    t = ReplayTransport(data_path("house_translate.json"))
    with pytest.raises(ReplayMismatch):
        t.send("a different prompt")
    t = ReplayTransport(Transcript())
    with pytest.raises(ReplayMismatch, match="exhausted"):
        t.send("anything")


def test_transcript_errors(tmp_path):
    with pytest.raises(TransportError):
        Transcript.load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("[1, 2")
    with pytest.raises(TransportError):
        Transcript.load(tmp_path / "bad.json")
    (tmp_path / "other.json").write_text('{"format": "something"}')
    with pytest.raises(TransportError):
        Transcript.load(tmp_path / "other.json")


def test_live_transport_configuration(monkeypatch):
    monkeypatch.delenv("SGPLAN_LLM_URL", raising=False)
    with pytest.raises(TransportError, match="SGPLAN_LLM_URL"):
        LiveTransport()
    monkeypatch.setenv("SGPLAN_LLM_URL", "http://127.0.0.1:9/v1")
    monkeypatch.setenv("SGPLAN_LLM_MODEL", "m")
    live = LiveTransport(min_interval=0)
    assert live.url.endswith("/v1") and live.model == "m" and live.temperature == 0.0
    with pytest.raises(TransportError):
        live.send("hello")


def test_scripted_transport_runs_out():
    t = ScriptedTransport(["one"])
    assert t.send("a") == "one"
    with pytest.raises(TransportError):
        t.send("b")


def test_house_scene_loads():
    assert house_scene().to_dict() == build_house().to_dict()
