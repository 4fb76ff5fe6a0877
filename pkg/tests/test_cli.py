import csv
import json
import logging

import pytest

from sgplan.cli import BENCH_COLUMNS, SETUPS, _bench_row, main, setup_config
from sgplan.domain import build_domain
from sgplan.automaton import compile
from sgplan.fixtures import HOUSE_MISSION, benchmark_fixture, data_path
from sgplan.heuristics import build_tables, mock_guidance
from sgplan.llm import RecordTransport, ScriptedTransport, translate
from sgplan.ltl import parse_prefix
from sgplan.planner import LLM, LTL
from sgplan.scene import OBJECT, load_scene

HOUSE = str(data_path("house.json"))


def run(*argv):
    return main([str(a) for a in argv])


def test_translate_replay(tmp_path):
    out, dfa = tmp_path / "m.ltl", tmp_path / "m.dfa"
    code = run("translate", HOUSE, HOUSE_MISSION, "--transcript", data_path("house_translate.json"),
               "-o", out, "--automaton", dfa)
    assert code == 0
    assert out.read_text() == "& F & p2 F & p3 F p11 ! p9\n"
    assert dfa.read_text().startswith("initial: 0\naccepting: ")


def test_translate_missing_transcript(tmp_path, capsys):
    assert run("translate", HOUSE, HOUSE_MISSION, "--transcript", tmp_path / "nope.json") == 1
    assert "cannot read transcript" in capsys.readouterr().err
    assert run("translate", HOUSE, HOUSE_MISSION) == 1


def test_translate_formula_bypass(tmp_path):
    out = tmp_path / "m.ltl"
    assert run("translate", HOUSE, "--formula", "F & p3 F p11", "-o", out) == 0
    assert out.read_text() == "F & p3 F p11\n"
    assert run("translate", HOUSE, "--formula", "G p3", "-o", out) == 2


def test_translate_needs_rephrase(tmp_path, capsys):
    path = tmp_path / "t.json"
    scripted = ScriptedTransport(["go to the attic_77"] + ["F attic_77"] * 3)
    translate("go to the attic", load_scene(HOUSE), RecordTransport(scripted, path))
    assert run("translate", HOUSE, "go to the attic", "--transcript", path) == 2
    assert "needs human rephrase" in capsys.readouterr().err


@pytest.fixture
def small(tmp_path):
    scene = tmp_path / "s.json"
    assert run("gen", "--floors", 1, "--rooms", "2x2", "--room-size", "5x5", "--seed", 1, "-o", scene) == 0
    g = load_scene(scene)
    obj = next(a for a in g.attributes.values() if a.kind == OBJECT)
    formula = tmp_path / "f.ltl"
    formula.write_text(f"F {obj.prop}\n")
    return scene, formula, g


def test_plan_astar(small, tmp_path, capsys):
    scene, formula, g = small
    out = tmp_path / "p.json"
    assert run("plan", scene, formula, "--start", 0, "--setup", "A*", "-o", out) == 0
    doc = json.loads(out.read_text())
    assert doc["optimal"] is True and doc["path"][0] == 0
    table = capsys.readouterr().out
    assert "iter" in table and "expansions" in table


def test_plan_all_without_guidance_warns(small, tmp_path, caplog):
    scene, formula, _ = small
    with caplog.at_level(logging.WARNING):
        assert run("plan", scene, formula, "--start", 0, "--setup", "ALL", "-o", tmp_path / "p.json") == 0
    assert "falls back to 0" in caplog.text


def test_plan_errors(small, tmp_path, capsys):
    scene, formula, _ = small
    assert run("plan", scene, formula, "--start", 99999, "-o", tmp_path / "p.json") == 1
    bad = tmp_path / "bad.ltl"
    bad.write_text("F nothing_1\n")
    assert run("plan", scene, bad, "--start", 0) == 1
    infeasible = tmp_path / "inf.ltl"
    infeasible.write_text("& F bed_10 false\n")
    assert run("plan", HOUSE, infeasible, "--start", 14) == 3
    assert "infeasible" in capsys.readouterr().err


def test_plan_cache_and_guidance(tmp_path):
    formula = tmp_path / "m.ltl"
    formula.write_text("& F & p2 F & p3 F p11 ! p9\n")
    cache = tmp_path / "h.json"
    for _ in range(2):
        assert run("plan", HOUSE, formula, "--start", 14, "--cache", cache, "--guidance", "mock",
                   "-o", tmp_path / "p.json") == 0
    assert json.loads(cache.read_text())["format"] == "sgplan-heuristics"
    assert json.loads((tmp_path / "p.json").read_text())["cost"] == 8.0
    dom = build_domain(load_scene(HOUSE), compile(parse_prefix(formula.read_text())), 14)
    mock_guidance(dom, build_tables(dom)).save(tmp_path / "g.json")
    assert run("plan", HOUSE, formula, "--start", 14, "--guidance", tmp_path / "g.json",
               "-o", tmp_path / "q.json") == 0
    assert json.loads((tmp_path / "q.json").read_text())["cost"] == 8.0
    assert run("plan", HOUSE, formula, "--start", 14, "--guidance", tmp_path / "none.json") == 1


def test_gen_and_hierarchy(tmp_path, capsys):
    scene = tmp_path / "g.json"
    assert run("gen", "--floors", 2, "--rooms", "2x1", "--room-size", "4", "--seed", 3, "-o", scene) == 0
    capsys.readouterr()
    assert run("hierarchy", scene) == 0
    text = capsys.readouterr().out
    assert text.startswith("floor") and "staircase" in text
    assert run("hierarchy", scene, "-o", tmp_path / "h.txt") == 0
    assert (tmp_path / "h.txt").read_text() == text
    assert run("gen", "--floors", 0, "-o", scene) == 1


def test_setups_match_their_definitions():
    g, mission, start = benchmark_fixture()
    dom = build_domain(g, compile(parse_prefix(mission)), start)
    every = list(range(dom.num_levels))
    astar = setup_config("A*", dom).cfg
    assert astar.enabled_levels == [0] and astar.enabled_heuristics == {0: (LTL,)}
    assert setup_config("NO-LLM", dom).cfg.enabled_heuristics is None
    assert setup_config("ALL", dom).cfg.enabled_heuristics == {k: (LTL, LLM) for k in every}
    for name, k in (("OCC", 0), ("OBJ", 1), ("ROOM", 2), ("FLR", 3)):
        heur = setup_config(name, dom).cfg.enabled_heuristics
        assert [k2 for k2, h in heur.items() if LLM in h] == [k]
    with pytest.raises(ValueError):
        setup_config("FAST", dom)


def test_bench_rows(tmp_path):
    scenes = [HOUSE, tmp_path / "g.json"]
    assert run("gen", "--seed", 5, "-o", scenes[1]) == 0
    missions = tmp_path / "m.ltl"
    missions.write_text("# ids resolve per scene\nF p0\nF & p0 X p0\n")
    out = tmp_path / "b.csv"
    assert run("bench", "--scenes", *scenes, "--missions", missions, "--starts", 2,
               "--setups", "A*", "NO-LLM", "ALL", "--jobs", 2, "-o", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 2 * 2 * 3
    assert list(rows[0]) == list(BENCH_COLUMNS)
    assert all(r["status"] == "ok" and r["schema"] == "1" for r in rows)
    # optimality is setup independent
    finals = {}
    for r in rows:
        finals.setdefault((r["scene"], r["mission"], r["start"]), set()).add(r["final_cost"])
    assert all(len(v) == 1 for v in finals.values())


def test_bench_records_failures(tmp_path):
    missions = tmp_path / "m.ltl"
    missions.write_text("F bed_10\nU ! tv_9 bed_10\n")
    out = tmp_path / "b.csv"
    assert run("bench", "--scenes", HOUSE, "--missions", missions, "--starts", 3, "--setups", "NO-LLM",
               "-o", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 6
    assert all(r["status"] == "ok" for r in rows[:3])
    assert any(r["status"].startswith("Infeasible") for r in rows[3:])
    assert run("bench", "--scenes", HOUSE, "--missions", missions, "--setups", "FAST", "-o", out) == 1


def test_guidance_beats_no_guidance_on_benchmark(tmp_path):
    g, mission, start = benchmark_fixture()
    g.save(tmp_path / "bench.json")
    (tmp_path / "bench.ltl").write_text(mission + "\n")
    rows = {s: _bench_row((str(tmp_path / "bench.json"), str(tmp_path / "bench.ltl"), 0, start, s, None, True))
            for s in ("NO-LLM", "ALL")}
    assert rows["ALL"]["status"] == rows["NO-LLM"]["status"] == "ok"
    assert rows["ALL"]["expansions"] < rows["NO-LLM"]["expansions"]
    assert rows["ALL"]["final_cost"] == rows["NO-LLM"]["final_cost"]
    assert set(SETUPS) >= set(rows)
