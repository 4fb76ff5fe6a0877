"""Command-line interface: translate, plan, bench, gen, hierarchy."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import automaton
from .domain import build_domain
from .heuristics import HeuristicTable, LlmGuidance, build_tables, mock_guidance
from .llm import (NEEDS_HUMAN_REPHRASE, LiveTransport, RecordTransport, ReplayTransport,
                  TransportError, formula_file_text, translate)
from .ltl import LtlError, parse_prefix, print_prefix, read_formula_file
from .planner import LLM, LTL, Infeasible, SearchConfig, TimeBudgetExceeded, plan
from .scene import FLOOR, OBJECT, ROOM, SceneError, SceneSpec, UnknownNode, generate_scene, load_scene

log = logging.getLogger("sgplan")

EXIT_OK, EXIT_ERROR, EXIT_REPHRASE, EXIT_INFEASIBLE = 0, 1, 2, 3

SETUPS = ("ALL", "OCC", "OBJ", "ROOM", "FLR", "NO-LLM", "A*")
_SETUP_LEVEL = {"OCC": "occupancy", "OBJ": OBJECT, "ROOM": ROOM, "FLR": FLOOR}

BENCH_SCHEMA = 1
BENCH_COLUMNS = ("schema", "scene", "mission", "start", "setup", "status", "first_time", "first_cost",
                 "final_cost", "first_over_final", "final_time", "optimal", "iterations",
                 "expansions", "expansions_per_iteration")


@dataclass
class BenchSetup:
    name: str
    cfg: SearchConfig


def setup_config(name: str, dom, base: SearchConfig | None = None) -> BenchSetup:
    """Levels and heuristics per benchmark setup."""
    base = base or SearchConfig()
    kinds = [lv.kind for lv in dom.levels]
    every = list(range(len(kinds)))
    kw = dict(w1=base.w1, w2=base.w2, decay=base.decay, time_budget=base.time_budget,
              inflate_anchor=base.inflate_anchor)
    if name == "A*":
        return BenchSetup(name, SearchConfig(enabled_levels=[0], enabled_heuristics={0: (LTL,)}, **kw))
    if name == "NO-LLM":
        return BenchSetup(name, SearchConfig(enabled_levels=every, **kw))
    if name == "ALL":
        return BenchSetup(name, SearchConfig(enabled_levels=every,
                                             enabled_heuristics={k: (LTL, LLM) for k in every}, **kw))
    if name in _SETUP_LEVEL:
        kind = _SETUP_LEVEL[name]
        heur = {k: ((LTL, LLM) if kinds[k] == kind else (LTL,)) for k in every}
        if kind not in kinds:
            log.warning("setup %s: scene has no %s level", name, kind)
        return BenchSetup(name, SearchConfig(enabled_levels=every, enabled_heuristics=heur, **kw))
    raise ValueError(f"unknown setup {name!r}; choose from {', '.join(SETUPS)}")


def _scene_or_exit(path):
    try:
        return load_scene(path)
    except (OSError, SceneError) as exc:
        print(f"error: cannot load scene {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _transport(args):
    if args.mode == "replay":
        if not args.transcript:
            raise TransportError("replay mode needs --transcript")
        return ReplayTransport(args.transcript)
    live = LiveTransport(min_interval=args.min_interval)
    if args.mode == "record":
        if not args.transcript:
            raise TransportError("record mode needs --transcript")
        return RecordTransport(live, args.transcript)
    return live


# ---------------------------------------------------------------- commands


def cmd_translate(args) -> int:
    scene = _scene_or_exit(args.scene)
    alphabet = [a.prop for a in scene.attributes.values()]
    if args.formula:
        try:
            phi = parse_prefix(args.formula, alphabet)
            dfa = automaton.compile(phi)
        except LtlError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_REPHRASE
    else:
        try:
            session = translate(args.mission, scene, _transport(args), args.max_attempts)
        except TransportError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        if session.outcome == NEEDS_HUMAN_REPHRASE:
            print(f"needs human rephrase after {session.attempts} attempts: {session.diagnostic}",
                  file=sys.stderr)
            return EXIT_REPHRASE
        phi = session.formula
        dfa = automaton.compile(phi)
        print(f"unique-id mission: {session.mu_unique}")
    Path(args.out).write_text(formula_file_text(phi), encoding="utf-8")
    if args.automaton:
        Path(args.automaton).write_text(dfa.to_text(), encoding="utf-8")
    print(f"formula: {print_prefix(phi, short_ids=True)}")
    print(f"automaton: {len(dfa)} states, accepting {sorted(dfa.accepting)}, sink {dfa.sink}")
    return EXIT_OK


def _read_formula(path, scene):
    alphabet = [a.prop for a in scene.attributes.values()]
    formulas = read_formula_file(path, alphabet)
    if len(formulas) != 1:
        raise LtlError(f"{path}: expected exactly one formula, found {len(formulas)}")
    return formulas[0]


def _cache_key(scene_path, formula_text: str) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(Path(scene_path).read_bytes())
    h.update(formula_text.encode())
    return h.hexdigest()


def _tables(dom, cache, key) -> HeuristicTable:
    if cache:
        table = HeuristicTable.load(cache, key)
        if table is not None:
            return table
    table = build_tables(dom)
    if cache:
        table.save(cache, key)
    return table


def cmd_plan(args) -> int:
    scene = _scene_or_exit(args.scene)
    try:
        phi = _read_formula(args.formula, scene)
        dfa = automaton.compile(phi)
        dom = build_domain(scene, dfa, args.start)
    except LtlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except UnknownNode as exc:
        print(f"error: unknown start node {exc}", file=sys.stderr)
        return EXIT_ERROR
    table = _tables(dom, args.cache, _cache_key(args.scene, print_prefix(phi)))
    guidance = None
    if args.guidance == "mock":
        guidance = mock_guidance(dom, table)
    elif args.guidance:
        try:
            guidance = LlmGuidance.load(args.guidance)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read guidance: {exc}", file=sys.stderr)
            return EXIT_ERROR
    setup = setup_config(args.setup, dom, SearchConfig(time_budget=args.budget))
    if guidance is None and any(LLM in h for h in (setup.cfg.enabled_heuristics or {}).values()):
        log.warning("setup %s without guidance: LLM heuristic falls back to 0", args.setup)
    result = None
    try:
        print(f"{'iter':>4} {'w1':>6} {'w2':>6} {'cost':>10} {'expansions':>10} {'time':>8}")
        for result in plan(dom, table, guidance, setup.cfg):
            it = result.log[-1]
            print(f"{len(result.log):>4} {it.w1:>6.2f} {it.w2:>6.2f} {result.cost:>10.3f} "
                  f"{it.total():>10} {it.wall_time:>8.3f}")
    except Infeasible as exc:
        print(f"infeasible: {exc.reason}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TimeBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    result.save(args.out, dom)
    print(f"cost {result.cost:g}, optimal={result.optimal}, {len(result.path)} nodes -> {args.out}")
    return EXIT_OK


def _bench_row(job) -> dict:
    scene_path, mission_path, mission_index, start, setup_name, budget, use_mock = job
    row = {"schema": BENCH_SCHEMA, "scene": scene_path, "mission": f"{mission_path}:{mission_index}",
           "start": start, "setup": setup_name}
    try:
        scene = load_scene(scene_path)
        phi = read_formula_file(mission_path, [a.prop for a in scene.attributes.values()])[mission_index]
        dom = build_domain(scene, automaton.compile(phi), start)
        table = build_tables(dom)
        setup = setup_config(setup_name, dom, SearchConfig(time_budget=budget))
        guidance = mock_guidance(dom, table) if use_mock else None
        t0 = time.perf_counter()
        results = []
        for r in plan(dom, table, guidance, setup.cfg):
            results.append((time.perf_counter() - t0, r))
        first_t, first = results[0]
        last_t, last = results[-1]
        row.update(status="ok", first_time=f"{first_t:.6f}", first_cost=first.cost, final_cost=last.cost,
                   first_over_final=(first.cost / last.cost if last.cost else 1.0),
                   final_time=f"{last_t:.6f}", optimal=last.optimal, iterations=len(last.log),
                   expansions=last.expansions,
                   expansions_per_iteration=json.dumps([it.expansions for it in last.log], sort_keys=True))
    except Exception as exc:  # per-row failures are data, not crashes
        row.update(status=f"{type(exc).__name__}: {exc}")
    return row


def bench_jobs(scenes: Sequence[str], missions: Sequence[str], starts: int, setups: Sequence[str],
               budget, seed: int, use_mock: bool) -> list[tuple]:
    jobs = []
    for scene_path in scenes:
        scene = load_scene(scene_path)
        rng = np.random.default_rng(seed)
        picks = [scene.node_id(int(i)) for i in rng.choice(len(scene), size=starts, replace=starts > len(scene))]
        for mission_path in missions:
            n = len(read_formula_file(mission_path))
            for k in range(n):
                for start in picks:
                    for setup in setups:
                        jobs.append((scene_path, mission_path, k, start, setup, budget, use_mock))
    return jobs


def run_bench(jobs: Sequence[tuple], out, n_jobs: int = 1) -> list[dict]:
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_bench_row, jobs))
    else:
        rows = [_bench_row(j) for j in jobs]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows


def cmd_bench(args) -> int:
    for name in args.setups:
        if name not in SETUPS:
            print(f"error: unknown setup {name!r}", file=sys.stderr)
            return EXIT_ERROR
    jobs = bench_jobs(args.scenes, args.missions, args.starts, args.setups, args.budget, args.seed,
                      args.guidance == "mock")
    rows = run_bench(jobs, args.out, args.jobs)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} rows ({failed} failed) -> {args.out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        spec = SceneSpec(floors=args.floors, rooms=tuple(args.rooms), room_size=tuple(args.room_size),
                         objects_per_room=args.objects, pitch=args.pitch, staircase=args.staircase)
        scene = generate_scene(spec, args.seed)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    scene.save(args.out)
    print(f"{len(scene)} nodes, {len(scene.edges)} edges, {len(scene.attributes)} attributes -> {args.out}")
    return EXIT_OK


def cmd_hierarchy(args) -> int:
    scene = _scene_or_exit(args.scene)
    try:
        text = scene.attribute_hierarchy()
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _pair(text: str) -> tuple[int, int]:
    a, _, b = text.lower().partition("x")
    return int(a), int(b or a)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("translate", help="natural-language mission to formula and automaton")
    t.add_argument("scene")
    t.add_argument("mission", nargs="?", default="")
    t.add_argument("--formula", help="prefix formula; skips the language model")
    t.add_argument("--mode", choices=("replay", "record", "live"), default="replay")
    t.add_argument("--transcript")
    t.add_argument("--max-attempts", type=int, default=3)
    t.add_argument("--min-interval", type=float, default=1.0, help="seconds between live requests")
    t.add_argument("-o", "--out", default="mission.ltl")
    t.add_argument("--automaton", help="write the automaton as text here")
    t.set_defaults(func=cmd_translate)

    pl = sub.add_parser("plan", help="plan a mission in a scene")
    pl.add_argument("scene")
    pl.add_argument("formula", help="file with one prefix formula")
    pl.add_argument("--start", type=int, required=True)
    pl.add_argument("--setup", choices=SETUPS, default="ALL")
    pl.add_argument("--budget", type=float, default=None, help="time budget in seconds")
    pl.add_argument("--guidance", help="guidance file, or 'mock' for label-chain guidance")
    pl.add_argument("--cache", help="heuristic cache file")
    pl.add_argument("-o", "--out", default="plan.json")
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="run setups over scenes, missions and start nodes")
    b.add_argument("--scenes", nargs="+", required=True)
    b.add_argument("--missions", nargs="+", required=True, help="formula files, one mission per line")
    b.add_argument("--starts", type=int, default=2)
    b.add_argument("--setups", nargs="+", default=list(SETUPS))
    b.add_argument("--budget", type=float, default=None)
    b.add_argument("--guidance", choices=("mock", "none"), default="mock")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("-o", "--out", default="bench.csv")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="generate a synthetic scene")
    g.add_argument("--floors", type=int, default=1)
    g.add_argument("--rooms", type=_pair, default=(2, 2), help="rooms per floor, e.g. 3x2")
    g.add_argument("--room-size", type=_pair, default=(5, 5), help="cells per room, e.g. 6x6")
    g.add_argument("--objects", type=int, default=1, help="objects per room")
    g.add_argument("--pitch", type=float, default=0.5)
    g.add_argument("--staircase", choices=("random", "corner"), default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", default="scene.json")
    g.set_defaults(func=cmd_gen)

    h = sub.add_parser("hierarchy", help="print the attribute hierarchy")
    h.add_argument("scene")
    h.add_argument("-o", "--out")
    h.set_defaults(func=cmd_hierarchy)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "translate" and not args.formula and not args.mission:
        print("error: a mission or --formula is required", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
