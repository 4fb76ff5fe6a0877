import numpy as np
import pytest

from sgplan.automaton import compile
from sgplan.domain import ProductState, build_domain, is_goal, successors
from sgplan.fixtures import HOUSE_START, build_house
from sgplan.ltl import parse_prefix
from sgplan.planner import path_cost
from sgplan.scene import OBJECT, ROOM, SceneGraph, SceneSpec, generate_scene

INF = float("inf")


@pytest.fixture(scope="module")
def house():
    return build_house()


def dom_for(g, text, start):
    return build_domain(g, compile(parse_prefix(text)), start)


def grid(n, attributes=()):
    nodes = [{"id": y * n + x, "xyz": [x, y, 0], "floor": 0} for y in range(n) for x in range(n)]
    edges = [{"u": y * n + x, "v": y * n + x + 1, "cost": 1.0} for y in range(n) for x in range(n - 1)]
    edges += [{"u": y * n + x, "v": (y + 1) * n + x, "cost": 1.0} for y in range(n - 1) for x in range(n)]
    return SceneGraph(nodes, edges, list(attributes))


def test_house_has_four_levels(house):
    dom = dom_for(house, "F oven_11", HOUSE_START)
    assert [lv.kind for lv in dom.levels] == ["occupancy", OBJECT, ROOM, "floor"]
    assert dom.start == ProductState(HOUSE_START, dom.dfa.initial)
    assert not is_goal(dom, dom.start)


def test_accepting_start_is_goal(house):
    dom = dom_for(house, "true", HOUSE_START)
    assert is_goal(dom, dom.start)
    q_acc = next(iter(dom_for(house, "F oven_11", 0).accepting))
    assert dom_for(house, "F oven_11", 0).is_goal(ProductState(0, q_acc))


def test_free_cell_has_grid_successors():
    lamp = {"id": 1, "name": "lamp", "kind": OBJECT, "node_ids": [0], "center": [0, 0, 0]}
    g = grid(3, [lamp])
    dom = dom_for(g, "F lamp_1", 0)
    out = successors(dom, 0, ProductState(4, dom.dfa.initial))
    assert sorted(x.node for x, _ in out) == [1, 3, 5, 7]
    assert all(x.q == dom.dfa.initial and c == 1.0 for x, c in out)


def test_anchor_count_is_degree_plus_level_actions(house):
    dom = dom_for(house, "& F & bedroom_2 F & kitchen_3 F oven_11 ! tv_9", HOUSE_START)
    for s in (HOUSE_START, 8 * 12 + 8, 10 * 12 + 1):
        i = house.index(s)
        want = len(house.adj[i])
        for k in range(1, dom.num_levels):
            if dom.levels[k].members[i]:
                want += len(dom.macro_actions(k, i))
        assert len(successors(dom, 0, ProductState(s, dom.dfa.initial))) == want


def test_object_level_moves_straight_to_target(house):
    dom = dom_for(house, "F tv_9", HOUSE_START)
    couch = house.attributes[8]
    s = couch.node_ids[0]
    out = [(x, c) for x, c in successors(dom, 1, ProductState(s, dom.dfa.initial))]
    boundary = [house.node_id(i) for i in house.boundary(9)]
    to_tv = [(x, c) for x, c in out if x.node in boundary and x.node in house.attributes[9].node_ids]
    d, arg = house.shortest_dist(s, boundary)
    assert (ProductState(arg, dom.macro_q(9, house.index(s), dom.dfa.initial)), d) in to_tv
    # one action per target attribute
    assert len(out) == len({b for b, _, _ in dom.macro_actions(1, house.index(s))})


def test_unreachable_room_is_omitted():
    nodes = [{"id": i, "xyz": [i, 0, 0], "floor": 0} for i in range(4)]
    edges = [{"u": 0, "v": 1, "cost": 1.0}, {"u": 2, "v": 3, "cost": 1.0}]
    rooms = [{"id": 1, "name": "den", "kind": ROOM, "node_ids": [0, 1], "center": [0, 0, 0]},
             {"id": 2, "name": "tv room", "kind": ROOM, "node_ids": [2, 3], "center": [0, 0, 0]}]
    g = SceneGraph(nodes, edges, rooms)
    dom = dom_for(g, "F tv_room_2", 0)
    assert successors(dom, 1, ProductState(0, dom.dfa.initial)) == []


def test_non_member_has_no_level_successors(house):
    dom = dom_for(house, "F oven_11", HOUSE_START)
    free = next(s for s in house.ids.tolist() if not dom.levels[1].members[house.index(s)])
    assert successors(dom, 1, ProductState(free, dom.dfa.initial)) == []


@pytest.mark.parametrize("seed", range(3))
def test_level_actions_are_sound(seed):
    g = generate_scene(SceneSpec(floors=2, rooms=(2, 2), room_size=(4, 4)), seed)
    objs = [a.prop for a in g.attributes.values() if a.kind == OBJECT]
    rooms = [a.prop for a in g.attributes.values() if a.kind == ROOM]
    dom = dom_for(g, f"& F & {objs[0]} F {objs[-1]} U ! {rooms[1]} {objs[-1]}", g.node_id(0))
    rng = np.random.default_rng(seed)
    for i in rng.choice(len(g), 40, replace=False).tolist():
        for q in range(len(dom.dfa)):
            for level in range(1, dom.num_levels):
                if not dom.levels[level].members[i]:
                    continue
                for j, nq, c, b in dom.successors_index(level, i, q):
                    path = dom.macro_path(b, i)
                    assert path[0] == i and path[-1] == j
                    # cost equals the occupancy shortest path to the target boundary
                    assert c == path_cost(dom, path)
                    d, arg = g.shortest_dist(g.node_id(i), [g.node_id(t) for t in g.boundary(b)])
                    assert c == d and g.index(arg) == j
                    # q is the departure-label replay of that path
                    word = [g.labels[k] for k in path[:-1]]
                    assert nq == dom.dfa.run(word, q)


def test_dump_level(house):
    dom = dom_for(house, "F oven_11", HOUSE_START)
    text = dom.dump_level(0)
    assert text.startswith("level 0: occupancy\n")
    assert "0 --{0.5}--> 1" in text
    assert dom.dump_level(2).startswith("level 2: room\n")
