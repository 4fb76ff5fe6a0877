"""Packaged example data: a four-room house and its recorded LLM exchanges.

The house is a 12 x 12 grid (0.5 m pitch) on one floor::

    kitchen 3   | bathroom 4
    ------------+-----------
    living 1    | bedroom 2

with a couch (8) and a tv (9) in the living room, a bed (10) in the
bedroom, an oven (11) and a sink (12) in the kitchen and a toilet (13) in
the bathroom. The transcripts are hand-authored in the recorded format; the
prompt hashes match the current templates, so they replay offline.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .scene import FLOOR, OBJECT, ROOM, Attribute, SceneGraph, SceneSpec, generate_scene, load_scene

PITCH = 0.5
SIZE = 12
HALF = 6

HOUSE_MISSION = ("go to the bedroom 2, then visit the kitchen 3, reach the oven 11, "
                 "and always avoid the TV 9")
HOUSE_START = 14  # living room, clear of the tv

_ROOMS = (  # id, name, x range, y range, connections
    (1, "living room", (0, HALF), (0, HALF), (2, 3)),
    (2, "bedroom", (HALF, SIZE), (0, HALF), (1, 4)),
    (3, "kitchen", (0, HALF), (HALF, SIZE), (1,)),
    (4, "bathroom", (HALF, SIZE), (HALF, SIZE), (2,)),
)
_DOORS = (((5, 2), (6, 2)), ((3, 5), (3, 6)), ((8, 5), (8, 6)))
_OBJECTS = (  # id, name, room, cell
    (8, "couch", 1, (1, 4)),
    (9, "tv", 1, (4, 1)),
    (10, "bed", 2, (10, 3)),
    (11, "oven", 3, (1, 10)),
    (12, "sink", 3, (4, 10)),
    (13, "toilet", 4, (10, 10)),
)


def _nid(x: int, y: int) -> int:
    return y * SIZE + x


def _room_of(x: int, y: int) -> int:
    for rid, _, (x0, x1), (y0, y1), _ in _ROOMS:
        if x0 <= x < x1 and y0 <= y < y1:
            return rid
    raise ValueError((x, y))


def build_house() -> SceneGraph:
    nodes = [{"id": _nid(x, y), "xyz": [x * PITCH, y * PITCH, 0.0], "floor": 0}
             for y in range(SIZE) for x in range(SIZE)]
    edges = []
    for y in range(SIZE):
        for x in range(SIZE):
            for x2, y2 in ((x + 1, y), (x, y + 1)):
                if x2 < SIZE and y2 < SIZE and _room_of(x, y) == _room_of(x2, y2):
                    edges.append({"u": _nid(x, y), "v": _nid(x2, y2), "cost": PITCH})
    for a, b in _DOORS:
        edges.append({"u": _nid(*a), "v": _nid(*b), "cost": PITCH})

    def center(ids):
        return np.mean([nodes[i]["xyz"] for i in ids], axis=0)

    everything = [n["id"] for n in nodes]
    attrs = [Attribute(0, "floor", FLOOR, tuple(everything), center(everything))]
    for rid, name, (x0, x1), (y0, y1), conn in _ROOMS:
        ids = [_nid(x, y) for y in range(y0, y1) for x in range(x0, x1)]
        attrs.append(Attribute(rid, name, ROOM, tuple(ids), center(ids), conn, 0))
    for oid, name, rid, (cx, cy) in _OBJECTS:
        ids = [_nid(x, y) for y in range(cy - 1, cy + 2) for x in range(cx - 1, cx + 2)
               if 0 <= x < SIZE and 0 <= y < SIZE and _room_of(x, y) == rid]
        attrs.append(Attribute(oid, name, OBJECT, tuple(ids), np.array(nodes[_nid(cx, cy)]["xyz"]), (), rid))
    return SceneGraph(nodes, edges, attrs)


def data_path(name: str) -> Path:
    return Path(str(resources.files("sgplan") / "data" / name))


def house_scene() -> SceneGraph:
    return load_scene(data_path("house.json"))


# canned answers behind the packaged transcripts

TRANSLATION_RESPONSES = (
    "go to the bedroom_2, then visit the kitchen_3, reach the oven_11, and always avoid the tv_9",
    "& F & bedroom_2 F & kitchen_3 F oven_11 G ! tv_9",
    "& F & bedroom_2 F & kitchen_3 F oven_11 ! tv_9",
)

GUIDANCE_RESPONSES = {
    # (context attribute, remaining mission) -> reply
    "visit the kitchen 3 and reach the oven 11":
        '<plan>\n<call fn="move" from="1" to="3"/>\n<call fn="reach" from="3" to="11"/>\n</plan>',
}


# three-floor benchmark: 4x4 rooms of 7x7 cells per floor, one object per room

BENCH_SPEC = SceneSpec(floors=3, rooms=(4, 4), room_size=(7, 7), objects_per_room=1)
BENCH_SEED = 4
BENCH_START = 5


def benchmark_fixture() -> tuple[SceneGraph, str, int]:
    """Scene, a three-object sequencing mission and a start node."""
    g = generate_scene(BENCH_SPEC, seed=BENCH_SEED)
    rng = np.random.default_rng(BENCH_SEED)
    objs = [a for a in g.attributes.values() if a.kind == OBJECT and a.name != "staircase"]
    o = [objs[i] for i in rng.choice(len(objs), 3, replace=False)]
    return g, f"F & {o[0].prop} F & {o[1].prop} F {o[2].prop}", BENCH_START
