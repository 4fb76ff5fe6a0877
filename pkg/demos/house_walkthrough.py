"""Translate the house mission from a replayed transcript, then plan it.

Shows each stage: the formula, the automaton, the hierarchy the language
model sees, the guidance it returned, and the anytime plan sequence.
"""
from sgplan.automaton import compile
from sgplan.cli import setup_config
from sgplan.domain import build_domain
from sgplan.fixtures import HOUSE_MISSION, HOUSE_START, data_path, house_scene
from sgplan.heuristics import build_tables, remaining_mission
from sgplan.llm import ReplayTransport, fetch_guidance, translate
from sgplan.ltl import parse_prefix
from sgplan.planner import Infeasible, plan, solve

house = house_scene()
print(house.attribute_hierarchy())

session = translate(HOUSE_MISSION, house, ReplayTransport(data_path("house_translate.json")))
print(f"mission: {HOUSE_MISSION}")
print(f"formula: {session.formula_text} ({session.attempts} attempts)")

dfa = compile(session.formula)
print(f"automaton: {len(dfa)} states, accepting {sorted(dfa.accepting)}")

post_bedroom = dfa.step(dfa.initial, {"bedroom_2"})
print("after the bedroom:", remaining_mission(dfa, post_bedroom, house))
guidance = fetch_guidance(house, dfa, [(1, post_bedroom)], ReplayTransport(data_path("house_guidance.json")))
for (attr, q), calls in guidance.plans.items():
    print(f"  guidance from attribute {attr} in state {q}: {calls}")

dom = build_domain(house, dfa, HOUSE_START)
table = build_tables(dom)
print(f"h at start: {table.h(dom.start_index, dfa.initial):g}")
for result in plan(dom, table, guidance, setup_config("ALL", dom).cfg):
    it = result.log[-1]
    print(f"w1={it.w1:<5g} w2={it.w2:<5g} cost={result.cost:g} optimal={result.optimal} "
          f"expansions={result.expansions}")
print("path:", result.path)
print("labels:", [sorted(house.labels[house.index(s)]) for s in result.path])

# A top-level "! tv_9" only constrains the first node, so the path above may
# cross the tv. Avoiding it everywhere needs "until"; the tv blocks the only
# bedroom door, so that mission has no solution here.
strict = parse_prefix("U ! tv_9 & bedroom_2 F oven_11")
dom = build_domain(house, compile(strict), HOUSE_START)
try:
    solve(dom, build_tables(dom))
except Infeasible as exc:
    print(f"strict avoidance: infeasible ({exc.reason})")
