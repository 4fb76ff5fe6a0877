"""Regenerate the packaged house scene and its transcripts.

Run after changing a prompt template; the replay tests fail loudly until
the transcripts are rebuilt.
"""
from sgplan.automaton import compile
from sgplan.fixtures import (GUIDANCE_RESPONSES, HOUSE_MISSION, TRANSLATION_RESPONSES,
                             build_house, data_path)
from sgplan.heuristics import remaining_mission
from sgplan.llm import RecordTransport, ScriptedTransport, fetch_guidance, translate

house = build_house()
house.save(data_path("house.json"))

rec = RecordTransport(ScriptedTransport(TRANSLATION_RESPONSES))
session = translate(HOUSE_MISSION, house, rec)
assert session.ok, session.diagnostic
rec.transcript.save(data_path("house_translate.json"))
print("formula:", session.formula_text, "after", session.attempts, "attempts")

dfa = compile(session.formula)
post_bedroom = dfa.step(dfa.initial, {"bedroom_2"})
remaining = remaining_mission(dfa, post_bedroom, house)
rec = RecordTransport(ScriptedTransport([GUIDANCE_RESPONSES[remaining]]))
guidance = fetch_guidance(house, dfa, [(1, post_bedroom)], rec)
rec.transcript.save(data_path("house_guidance.json"))
print("guidance:", guidance.plans)
