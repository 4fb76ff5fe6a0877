"""Scene graphs: occupancy nodes, weighted edges and leveled attribute regions.

The canonical file is JSON with three top-level keys::

    {"nodes":      [{"id": 0, "xyz": [0.0, 0.0, 0.0], "floor": 0}, ...],
     "edges":      [{"u": 0, "v": 1, "cost": 0.5}, ...],
     "attributes": [{"id": 3, "name": "kitchen", "kind": "room",
                     "node_ids": [...], "center": [x, y, z],
                     "connections": [2], "parent": 0}, ...]}

Edges are undirected. Nodes are stored sorted by id, so the internal index
order agrees with id order (used for deterministic tie-breaking).
"""
from __future__ import annotations

import heapq
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .ltl import Proposition

log = logging.getLogger(__name__)

INF = math.inf

OBJECT, ROOM, FLOOR = "object", "room", "floor"
_BUILTIN_ORDER = {OBJECT: 1, ROOM: 2, FLOOR: 3}
_VERB = {OBJECT: "reach", ROOM: "visit", FLOOR: "go to"}


class SceneError(ValueError):
    pass


class ParseError(SceneError):
    pass


class InvariantViolation(SceneError):
    pass


class UnknownNode(KeyError):
    pass


class MissingLevel(SceneError):
    pass


class InvalidSpec(SceneError):
    pass


def slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "attr"


@dataclass
class Attribute:
    id: int
    name: str
    kind: str
    node_ids: tuple[int, ...]
    center: np.ndarray
    connections: tuple[int, ...] = ()
    parent: int | None = None

    @property
    def prop(self) -> str:
        """Proposition token, ``<name>_<id>``."""
        return f"{slug(self.name)}_{self.id}"

    @property
    def proposition(self) -> Proposition:
        return Proposition(self.prop, f"{self.name} {self.id}")

    @property
    def verb(self) -> str:
        return _VERB.get(self.kind, "reach")


@dataclass
class AttributeSet:
    level_kind: str
    attributes: list[Attribute]


def level_rank(kind: str) -> tuple[int, str]:
    return (_BUILTIN_ORDER.get(kind, 4), kind)


@dataclass
class DijkstraResult:
    dist: np.ndarray
    source: np.ndarray
    pred: np.ndarray

    def path_to_source(self, i: int) -> list[int]:
        """Node indices from ``i`` back to the seed that reached it."""
        out = [i]
        while self.pred[out[-1]] >= 0:
            out.append(int(self.pred[out[-1]]))
        return out


def dijkstra(adj: Sequence[Sequence[tuple[int, float]]],
             seeds: Iterable[tuple[int, float]]) -> DijkstraResult:
    """Multi-source Dijkstra where each seed starts at its own potential.

    Equal distances resolve to the smallest seed index, then smallest node.
    """
    n = len(adj)
    dist = np.full(n, INF)
    source = np.full(n, -1, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    heap = []
    for i, pot in seeds:
        if pot < dist[i] or (pot == dist[i] and i < source[i]):
            dist[i] = pot
            source[i] = i
            heap.append((pot, i, i))
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    while heap:
        d, src, u = heapq.heappop(heap)
        if done[u] or d > dist[u] or src != source[u]:
            continue
        done[u] = True
        for v, c in adj[u]:
            nd = d + c
            if nd < dist[v] or (nd == dist[v] and src < source[v] and not done[v]):
                dist[v] = nd
                source[v] = src
                pred[v] = u
                heapq.heappush(heap, (nd, src, v))
    return DijkstraResult(dist, source, pred)


class SceneGraph:
    """G = (V, E, {A_k}) with validated invariants; immutable after construction."""

    def __init__(self, nodes: Sequence[Mapping], edges: Sequence[Mapping],
                 attributes: Sequence[Mapping | Attribute]):
        nodes = sorted(nodes, key=lambda n: int(n["id"]))
        self.ids = np.array([int(n["id"]) for n in nodes], dtype=np.int64)
        if len(set(self.ids.tolist())) != len(self.ids):
            raise InvariantViolation("duplicate node id")
        self._index = {int(i): k for k, i in enumerate(self.ids)}
        self.xyz = np.array([list(map(float, n["xyz"])) for n in nodes], dtype=float).reshape(-1, 3)
        self.floor = np.array([int(n.get("floor", 0)) for n in nodes], dtype=np.int64)

        self.edges: list[tuple[int, int, float]] = []
        self.adj: list[list[tuple[int, float]]] = [[] for _ in nodes]
        for e in edges:
            u, v, c = int(e["u"]), int(e["v"]), float(e["cost"])
            if u not in self._index or v not in self._index:
                raise InvariantViolation(f"edge ({u}, {v}) references a missing node")
            if not (c > 0 and math.isfinite(c)):
                raise InvariantViolation(f"edge ({u}, {v}) has non-positive cost {c}")
            if u == v:
                raise InvariantViolation(f"edge ({u}, {v}) is a self loop")
            iu, iv = self._index[u], self._index[v]
            self.edges.append((iu, iv, c))
            self.adj[iu].append((iv, c))
            self.adj[iv].append((iu, c))
        for row in self.adj:
            row.sort()

        attrs = [a if isinstance(a, Attribute) else _attribute_from_dict(a) for a in attributes]
        self.attributes: dict[int, Attribute] = {}
        for a in attrs:
            if a.id in self.attributes:
                raise InvariantViolation(f"duplicate attribute id {a.id}")
            self.attributes[a.id] = a
        by_kind: dict[str, list[Attribute]] = {}
        for a in attrs:
            by_kind.setdefault(a.kind, []).append(a)
        self.levels = [AttributeSet(k, sorted(by_kind[k], key=lambda a: a.id))
                       for k in sorted(by_kind, key=level_rank)]
        self._regions = {}
        self._interior: dict[int, np.ndarray] = {}
        for a in attrs:
            missing = [s for s in a.node_ids if s not in self._index]
            if missing:
                raise InvariantViolation(f"attribute {a.id} references missing node {missing[0]}")
            self._regions[a.id] = np.array(sorted(self._index[s] for s in set(a.node_ids)), dtype=np.int64)
        self._validate_attributes()

        props = [a.prop for a in attrs]
        if len(set(props)) != len(props):
            raise InvariantViolation("attribute propositions are not unique")
        labels: list[set[str]] = [set() for _ in nodes]
        for a in attrs:
            for i in self._regions[a.id]:
                labels[i].add(a.prop)
        self.labels: list[frozenset[str]] = [frozenset(l) for l in labels]
        self._csr = None

    # -- validation

    def _validate_attributes(self):
        for a in self.attributes.values():
            if len(self._regions[a.id]) == 0:
                raise InvariantViolation(f"attribute {a.id} has an empty region")
            if a.parent is not None:
                if a.parent not in self.attributes:
                    raise InvariantViolation(f"attribute {a.id} has unknown parent {a.parent}")
                if not set(self._regions[a.id]) <= set(self._regions[a.parent]):
                    raise InvariantViolation(
                        f"attribute {a.id} region is not contained in parent {a.parent}")
            for c in a.connections:
                other = self.attributes.get(c)
                if other is None or other.kind != a.kind:
                    raise InvariantViolation(f"attribute {a.id} connects to invalid attribute {c}")
        for level in self.levels:
            if level.level_kind not in (ROOM, FLOOR):
                continue
            owner: dict[int, int] = {}
            for a in level.attributes:
                for i in self.interior(a.id):
                    if i in owner:
                        raise InvariantViolation(
                            f"{level.level_kind} {a.id} interior overlaps {owner[i]}")
                    owner[i] = a.id

    # -- basic queries

    def __len__(self):
        return len(self.ids)

    @property
    def num_nodes(self) -> int:
        return len(self.ids)

    def index(self, node_id: int) -> int:
        try:
            return self._index[int(node_id)]
        except (KeyError, TypeError, ValueError):
            raise UnknownNode(node_id) from None

    def node_id(self, index: int) -> int:
        return int(self.ids[index])

    def region(self, attr_id: int) -> np.ndarray:
        """Sorted node indices of V_a."""
        return self._regions[attr_id]

    def level(self, kind: str) -> AttributeSet | None:
        return next((l for l in self.levels if l.level_kind == kind), None)

    @property
    def propositions(self) -> list[Proposition]:
        return [a.proposition for a in sorted(self.attributes.values(), key=lambda a: a.id)]

    def attribute_by_prop(self, prop: str) -> Attribute:
        for a in self.attributes.values():
            if a.prop == prop:
                return a
        raise KeyError(prop)

    def label(self, node_id: int) -> frozenset[str]:
        return self.labels[self.index(node_id)]

    def interior(self, attr_id: int) -> np.ndarray:
        """Nodes of V_a all of whose neighbors are also in V_a."""
        if attr_id not in self._interior:
            members = set(self._regions[attr_id].tolist())
            self._interior[attr_id] = np.array(
                [i for i in self._regions[attr_id] if all(v in members for v, _ in self.adj[i])],
                dtype=np.int64)
        return self._interior[attr_id]

    def boundary(self, attr_id: int) -> np.ndarray:
        inner = set(self.interior(attr_id).tolist())
        return np.array([i for i in self._regions[attr_id] if i not in inner], dtype=np.int64)

    @property
    def csr(self) -> sparse.csr_matrix:
        if self._csr is None:
            n = len(self.ids)
            # parallel edges keep the cheapest cost
            cheapest: dict[tuple[int, int], float] = {}
            for a, b, w in self.edges:
                key = (min(a, b), max(a, b))
                cheapest[key] = min(w, cheapest.get(key, INF))
            if cheapest:
                a, b = map(np.array, zip(*cheapest))
                w = np.array(list(cheapest.values()))
                m = sparse.coo_matrix((np.r_[w, w], (np.r_[a, b], np.r_[b, a])), shape=(n, n))
                self._csr = m.tocsr()
            else:
                self._csr = sparse.csr_matrix((n, n))
        return self._csr

    # -- distances

    def dijkstra_from(self, sources: Iterable[int], potentials: Iterable[float] | None = None) -> DijkstraResult:
        """Multi-source Dijkstra over node indices."""
        sources = list(sources)
        pots = [0.0] * len(sources) if potentials is None else list(potentials)
        return dijkstra(self.adj, zip(sources, pots))

    def shortest_dist(self, s: int, targets: Iterable[int]) -> tuple[float, int | None]:
        """(distance, nearest target id) from node id ``s``; ``(inf, None)`` if unreachable."""
        src = self.index(s)
        goal = {self.index(t) for t in targets}
        if not goal:
            raise ValueError("targets must be nonempty")
        if src in goal:
            return 0.0, int(s)
        dist = {src: 0.0}
        heap = [(0.0, src)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            if u in goal:
                return d, self.node_id(u)
            done.add(u)
            for v, c in self.adj[u]:
                nd = d + c
                if nd < dist.get(v, INF):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return INF, None

    def path_cost(self, path: Sequence[int]) -> float:
        """Sum of edge costs along a node-id path (cheapest parallel edge)."""
        total = 0.0
        for a, b in zip(path, path[1:]):
            ia, ib = self.index(a), self.index(b)
            c = min((w for v, w in self.adj[ia] if v == ib), default=None)
            if c is None:
                raise InvariantViolation(f"({a}, {b}) is not an edge")
            total += c
        return total

    # -- attribute helpers

    def nearest_node(self, point: Sequence[float]) -> int:
        """Index of the node closest to ``point`` (smallest index on ties)."""
        d = np.linalg.norm(self.xyz - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def attributes_at(self, index: int, kind: str) -> list[Attribute]:
        level = self.level(kind)
        if level is None:
            return []
        return [a for a in level.attributes if a.prop in self.labels[index]]

    def context_attribute(self, index: int) -> int | None:
        """Room containing the node, else its floor, else ``None``."""
        for kind in (ROOM, FLOOR):
            found = self.attributes_at(index, kind)
            if found:
                return found[0].id
        return None

    # -- hierarchy export

    def attribute_hierarchy(self) -> str:
        """Floors -> rooms ``[connections]`` -> objects, as YAML-style text."""
        floors, rooms = self.level(FLOOR), self.level(ROOM)
        if floors is None or rooms is None:
            raise MissingLevel("attribute hierarchy needs floor and room levels")
        objects = self.level(OBJECT)

        def place(child: Attribute, parents: list[Attribute]) -> int:
            region = set(self.region(child.id).tolist())
            holders = [p.id for p in parents if region <= set(self.region(p.id).tolist())]
            if child.kind == OBJECT or not holders:
                at = self.nearest_node(child.center)
                holders = [p.id for p in parents if at in set(self.region(p.id).tolist())]
            if not holders:
                return min(parents, key=lambda p: (float(np.linalg.norm(p.center - child.center)), p.id)).id
            return min(holders)

        room_of_floor: dict[int, list[Attribute]] = {f.id: [] for f in floors.attributes}
        for r in rooms.attributes:
            room_of_floor[place(r, floors.attributes)].append(r)
        obj_of_room: dict[int, list[Attribute]] = {r.id: [] for r in rooms.attributes}
        for o in (objects.attributes if objects else []):
            obj_of_room[place(o, rooms.attributes)].append(o)

        lines = []
        for f in floors.attributes:
            rs = room_of_floor[f.id]
            lines.append(f"{f.name} ({f.id}):" + ("" if rs else " {}"))
            for r in rs:
                conn = ", ".join(str(c) for c in sorted(r.connections))
                objs = obj_of_room[r.id]
                lines.append(f"  {r.name} ({r.id}) [{conn}]:" + ("" if objs else " []"))
                for o in objs:
                    lines.append(f"    - {o.name} ({o.id})")
        for level in self.levels:
            if level.level_kind in (OBJECT, ROOM, FLOOR):
                continue
            lines.append(f"{level.level_kind}:")
            for a in level.attributes:
                lines.append(f"  - {a.name} ({a.id})")
        return "\n".join(lines) + "\n"

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": int(i), "xyz": [float(x) for x in p], "floor": int(f)}
                      for i, p, f in zip(self.ids, self.xyz, self.floor)],
            "edges": [{"u": self.node_id(u), "v": self.node_id(v), "cost": c} for u, v, c in self.edges],
            "attributes": [
                {"id": a.id, "name": a.name, "kind": a.kind,
                 "node_ids": sorted(int(s) for s in a.node_ids),
                 "center": [float(x) for x in a.center],
                 "connections": sorted(a.connections), "parent": a.parent}
                for a in sorted(self.attributes.values(), key=lambda a: a.id)
            ],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneGraph":
        try:
            return cls(data["nodes"], data["edges"], data["attributes"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed scene document: {exc!r}") from exc


def _attribute_from_dict(d: Mapping) -> Attribute:
    try:
        return Attribute(
            id=int(d["id"]),
            name=str(d["name"]),
            kind=str(d["kind"]).lower(),
            node_ids=tuple(int(s) for s in d["node_ids"]),
            center=np.array(d["center"], dtype=float).reshape(3),
            connections=tuple(int(c) for c in d.get("connections", ()) or ()),
            parent=None if d.get("parent") is None else int(d["parent"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed attribute {d!r}: {exc}") from exc


def load_scene(path) -> SceneGraph:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return SceneGraph.from_dict(data)


def label(g: SceneGraph, s: int) -> frozenset[str]:
    return g.label(s)


def shortest_dist(g: SceneGraph, s: int, targets: Iterable[int]) -> tuple[float, int | None]:
    return g.shortest_dist(s, targets)


def attribute_hierarchy(g: SceneGraph) -> str:
    return g.attribute_hierarchy()


# ------------------------------------------------------------------ generator

ROOM_NAMES = ("living room", "kitchen", "bedroom", "bathroom", "dining room",
              "office", "corridor", "storage room")
OBJECT_NAMES = ("couch", "tv", "oven", "sink", "chair", "bed", "table", "toilet",
                "vase", "potted plant", "refrigerator", "desk")


@dataclass
class SceneSpec:
    """Parameters of a synthetic multi-floor grid scene.

    Each floor is a ``rooms[0] x rooms[1]`` block of rooms, each room a
    ``room_size`` block of cells. With ``doors`` set, adjacent rooms are joined
    by a single door edge; otherwise the floor grid is fully 4-connected.
    Consecutive floors are joined by one staircase edge whose two landings
    are ``staircase`` objects.
    """

    floors: int = 1
    rooms: tuple[int, int] = (2, 2)
    room_size: tuple[int, int] = (5, 5)
    objects_per_room: int = 1
    pitch: float = 0.5
    floor_height: float = 4.0
    stair_cost: float = 4.0
    doors: bool = True
    staircase: str = "random"  # or "corner"
    room_names: Sequence[str] = field(default=ROOM_NAMES)
    object_names: Sequence[str] = field(default=OBJECT_NAMES)

    def check(self):
        if self.floors < 1:
            raise InvalidSpec("floors must be >= 1")
        if min(self.rooms) < 1 or min(self.room_size) < 1:
            raise InvalidSpec("rooms and room_size must be positive")
        if self.objects_per_room < 0:
            raise InvalidSpec("objects_per_room must be >= 0")
        if not (self.pitch > 0 and self.floor_height > 0 and self.stair_cost > 0):
            raise InvalidSpec("pitch, floor_height and stair_cost must be positive")
        if self.staircase not in ("random", "corner"):
            raise InvalidSpec(f"unknown staircase placement {self.staircase!r}")
        if not self.room_names or (self.objects_per_room and not self.object_names):
            raise InvalidSpec("name pools must be nonempty")


def generate_scene(spec: SceneSpec, seed: int = 0) -> SceneGraph:
    """Deterministic synthetic scene: rooms on a grid, doors, objects, stairs."""
    spec.check()
    rng = np.random.default_rng(seed)
    rx, ry = spec.rooms
    w, h = spec.room_size
    W, H = rx * w, ry * h

    def nid(f, x, y):
        return (f * H + y) * W + x

    def room_of(x, y):
        return (x // w, y // h)

    nodes = [{"id": nid(f, x, y), "xyz": [x * spec.pitch, y * spec.pitch, f * spec.floor_height], "floor": f}
             for f in range(spec.floors) for y in range(H) for x in range(W)]
    edges = []
    next_id = 0
    attrs = []

    floor_ids = []
    for f in range(spec.floors):
        floor_ids.append(next_id)
        next_id += 1

    room_ids: dict[tuple[int, int, int], int] = {}
    for f in range(spec.floors):
        for j in range(ry):
            for i in range(rx):
                room_ids[f, i, j] = next_id
                next_id += 1

    connections: dict[int, set[int]] = {r: set() for r in room_ids.values()}
    for f in range(spec.floors):
        for y in range(H):
            for x in range(W):
                for dx, dy in ((1, 0), (0, 1)):
                    x2, y2 = x + dx, y + dy
                    if x2 >= W or y2 >= H:
                        continue
                    if not spec.doors or room_of(x, y) == room_of(x2, y2):
                        edges.append({"u": nid(f, x, y), "v": nid(f, x2, y2), "cost": spec.pitch})
        for j in range(ry):
            for i in range(rx):
                a = room_ids[f, i, j]
                if i + 1 < rx:
                    b = room_ids[f, i + 1, j]
                    connections[a].add(b)
                    connections[b].add(a)
                    if spec.doors:
                        y = j * h + int(rng.integers(h))
                        edges.append({"u": nid(f, (i + 1) * w - 1, y), "v": nid(f, (i + 1) * w, y),
                                      "cost": spec.pitch})
                if j + 1 < ry:
                    b = room_ids[f, i, j + 1]
                    connections[a].add(b)
                    connections[b].add(a)
                    if spec.doors:
                        x = i * w + int(rng.integers(w))
                        edges.append({"u": nid(f, x, (j + 1) * h - 1), "v": nid(f, x, (j + 1) * h),
                                      "cost": spec.pitch})

    def center_of(ids):
        return np.mean([nodes[k]["xyz"] for k in ids], axis=0)

    for f in range(spec.floors):
        ids = [nid(f, x, y) for y in range(H) for x in range(W)]
        attrs.append(Attribute(floor_ids[f], f"floor {f}", FLOOR, tuple(ids), center_of(ids)))

    def room_cells(f, i, j):
        return [nid(f, x, y) for y in range(j * h, (j + 1) * h) for x in range(i * w, (i + 1) * w)]

    for (f, i, j), rid in room_ids.items():
        ids = room_cells(f, i, j)
        name = spec.room_names[int(rng.integers(len(spec.room_names)))]
        attrs.append(Attribute(rid, name, ROOM, tuple(ids), center_of(ids),
                               tuple(sorted(connections[rid])), floor_ids[f]))

    def blob(f, x, y, radius, plus=False):
        i, j = room_of(x, y)
        out = []
        for yy in range(max(j * h, y - radius), min((j + 1) * h, y + radius + 1)):
            for xx in range(max(i * w, x - radius), min((i + 1) * w, x + radius + 1)):
                if plus and abs(xx - x) + abs(yy - y) > radius:
                    continue
                out.append(nid(f, xx, yy))
        return out

    for (f, i, j), rid in room_ids.items():
        for _ in range(spec.objects_per_room):
            x = i * w + int(rng.integers(w))
            y = j * h + int(rng.integers(h))
            name = spec.object_names[int(rng.integers(len(spec.object_names)))]
            ids = blob(f, x, y, 1)
            attrs.append(Attribute(next_id, name, OBJECT, tuple(ids),
                                   np.array(nodes[nid(f, x, y)]["xyz"], dtype=float), (), rid))
            next_id += 1

    for f in range(spec.floors - 1):
        if spec.staircase == "corner":
            x, y = (0, 0) if f % 2 == 0 else (W - 1, H - 1)
        else:
            x, y = int(rng.integers(W)), int(rng.integers(H))
        for ff in (f, f + 1):
            i, j = room_of(x, y)
            ids = blob(ff, x, y, 1, plus=True)
            attrs.append(Attribute(next_id, "staircase", OBJECT, tuple(ids),
                                   np.array(nodes[nid(ff, x, y)]["xyz"], dtype=float), (),
                                   room_ids[ff, i, j]))
            next_id += 1
        edges.append({"u": nid(f, x, y), "v": nid(f + 1, x, y), "cost": spec.stair_cost})

    return SceneGraph(nodes, edges, attrs)
