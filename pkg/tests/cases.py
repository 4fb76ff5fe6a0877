"""Planning fixtures shared by the planner and acceptance tests."""
from dataclasses import dataclass

from sgplan.fixtures import HOUSE_START, build_house
from sgplan.scene import OBJECT, ROOM, SceneSpec, generate_scene


@dataclass(frozen=True)
class Case:
    name: str
    spec: SceneSpec | None  # None means the house
    seed: int
    mission: str  # prefix formula, may use {o0}, {r0}... placeholders
    start: int

    def scene(self):
        return build_house() if self.spec is None else generate_scene(self.spec, self.seed)

    def formula(self, g) -> str:
        objs = [a.prop for a in sorted(g.attributes.values(), key=lambda a: a.id)
                if a.kind == OBJECT and a.name != "staircase"]
        rooms = [a.prop for a in sorted(g.attributes.values(), key=lambda a: a.id) if a.kind == ROOM]
        names = {f"o{i}": p for i, p in enumerate(objs)}
        names.update({f"r{i}": p for i, p in enumerate(rooms)})
        names["olast"], names["rlast"] = objs[-1], rooms[-1]
        return self.mission.format(**names)


ONE = SceneSpec(floors=1, rooms=(2, 2), room_size=(5, 5), objects_per_room=1)
ONE_BIG = SceneSpec(floors=1, rooms=(3, 2), room_size=(6, 6), objects_per_room=2)
TWO = SceneSpec(floors=2, rooms=(2, 2), room_size=(4, 4), objects_per_room=1)
THREE_BIG = SceneSpec(floors=3, rooms=(3, 3), room_size=(6, 6), objects_per_room=1)
TWO_BIG = SceneSpec(floors=2, rooms=(3, 3), room_size=(7, 7), objects_per_room=2)
THREE = SceneSpec(floors=3, rooms=(2, 2), room_size=(4, 4), objects_per_room=1, staircase="corner")

CASES = (
    Case("house-mission", None, 0, "& F & bedroom_2 F & kitchen_3 F oven_11 ! tv_9", HOUSE_START),
    Case("house-reach", None, 0, "F oven_11", HOUSE_START),
    Case("house-avoid-tv", None, 0, "U ! tv_9 oven_11", 14),
    Case("house-avoid-living", None, 0, "& F toilet_13 U ! living_room_1 toilet_13", 140),
    Case("house-either", None, 0, "| F sink_12 F bed_10", HOUSE_START),
    Case("house-order", None, 0, "F & couch_8 F & toilet_13 F oven_11", 130),
    Case("one-seq2", ONE, 0, "F & {o0} F {o3}", 0),
    Case("one-seq3", ONE, 1, "F & {o1} F & {o2} F {o0}", 12),
    Case("one-avoid", ONE, 2, "U ! {r1} {o3}", 0),
    Case("one-both", ONE, 3, "& F {o0} F {o2}", 60),
    Case("one-next", ONE, 4, "F & {r0} X X {r0}", 0),
    Case("big-seq-avoid", ONE_BIG, 5, "& F & {o0} F {olast} U ! {o2} {olast}", 0),
    Case("big-rooms", ONE_BIG, 6, "F & {r5} F & {r0} F {r3}", 0),
    Case("two-floors", TWO, 7, "F {olast}", 0),
    Case("two-floors-back", TWO, 8, "F & {olast} F {o0}", 3),
    Case("two-floors-avoid", TWO, 9, "& F {r7} U ! {o1} {r7}", 0),
    Case("three-floors", THREE, 10, "F & {rlast} F {o1}", 0),
    Case("three-floors-seq", THREE, 11, "F & {o4} F & {olast} F {r0}", 0),
    Case("three-big-avoid", THREE_BIG, 12, "& F & {o2} F {olast} U ! {r4} {olast}", 0),
    Case("two-big-seq", TWO_BIG, 13, "F & {o0} F & {olast} F {o5}", 100),
)
