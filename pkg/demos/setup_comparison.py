"""Compare search setups on a generated three-floor building.

Every setup reaches the same optimal cost; they differ in how many states
they expand and how quickly a first plan appears.
"""
import time

from sgplan.automaton import compile
from sgplan.cli import SETUPS, setup_config
from sgplan.domain import build_domain
from sgplan.fixtures import benchmark_fixture
from sgplan.heuristics import build_tables, mock_guidance
from sgplan.ltl import parse_prefix
from sgplan.planner import plan

scene, mission, start = benchmark_fixture()
print(f"{len(scene)} nodes, mission {mission}, start {start}")
dom = build_domain(scene, compile(parse_prefix(mission)), start)
t0 = time.perf_counter()
table = build_tables(dom)
print(f"heuristic tables in {time.perf_counter() - t0:.2f}s")
guidance = mock_guidance(dom, table)

print(f"{'setup':<7} {'first':>8} {'final':>8} {'expansions':>10} {'time':>7}")
for name in SETUPS:
    t0 = time.perf_counter()
    results = list(plan(dom, table, guidance, setup_config(name, dom).cfg))
    print(f"{name:<7} {results[0].cost:>8g} {results[-1].cost:>8g} {results[-1].expansions:>10} "
          f"{time.perf_counter() - t0:>7.2f}")
