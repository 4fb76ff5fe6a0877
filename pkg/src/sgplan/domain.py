"""Hierarchical planning domain over (scene node, automaton state) pairs.

Level 0 (the anchor) moves along scene edges; level k > 0 jumps from a node
of one attribute region straight to the nearest boundary node of another
region on the same level. Every level action is backed by an occupancy
shortest path, and the automaton state it lands in is obtained by reading
the departure labels along that path, so a level action is always
realizable at the anchor level with the same cost and the same state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .automaton import Dfa
from .scene import INF, Attribute, DijkstraResult, SceneGraph

log = logging.getLogger(__name__)


class ProductState(NamedTuple):
    node: int
    q: int


class EmptyLevel(UserWarning):
    pass


@dataclass
class LevelSpec:
    index: int
    kind: str
    members: np.ndarray  # bool mask over node indices
    attributes: list[Attribute] = field(default_factory=list)
    # attribute ids containing each node, per node index
    owners: list[tuple[int, ...]] = field(default_factory=list)
    # for each attribute id, the targets it may jump to
    targets: dict[int, tuple[int, ...]] = field(default_factory=dict)


class PlanningDomain:
    """Product of a scene graph and a DFA, with one level per attribute set."""

    def __init__(self, g: SceneGraph, dfa: Dfa, start_node: int):
        self.scene = g
        self.dfa = dfa
        self.start_index = g.index(start_node)
        self.start = ProductState(int(start_node), dfa.initial)

        # label index per node and a dense transition table over those labels
        uniq: dict[frozenset[str], int] = {}
        for lab in sorted(set(g.labels), key=lambda l: tuple(sorted(l))):
            uniq[lab] = len(uniq)
        self.label_universe = list(uniq)
        self.node_label = np.array([uniq[l] for l in g.labels], dtype=np.int64)
        self.step_table = np.array(
            [[dfa.step(q, lab) for lab in self.label_universe] for q in range(len(dfa))],
            dtype=np.int64).reshape(len(dfa), len(uniq))
        self._step = self.step_table.tolist()
        self._lab = self.node_label.tolist()
        self.accepting = dfa.accepting

        self.levels: list[LevelSpec] = [LevelSpec(0, "occupancy", np.ones(len(g), dtype=bool))]
        for aset in g.levels:
            if not aset.attributes:
                log.warning("attribute level %s is empty; dropped", aset.level_kind)
                continue
            self.levels.append(self._build_level(len(self.levels), aset.level_kind, aset.attributes))

        self._to_boundary: dict[int, DijkstraResult] = {}
        self._macro_q: dict[tuple[int, int, int], int] = {}
        self._macro_cache: dict[tuple[int, int], list[tuple[int, int, float]]] = {}

    def _build_level(self, k: int, kind: str, attrs: list[Attribute]) -> LevelSpec:
        g = self.scene
        members = np.zeros(len(g), dtype=bool)
        owners: list[list[int]] = [[] for _ in range(len(g))]
        for a in attrs:
            reg = g.region(a.id)
            members[reg] = True
            for i in reg.tolist():
                owners[i].append(a.id)
        interiors = {a.id: set(g.interior(a.id).tolist()) for a in attrs}
        targets = {}
        for a in attrs:
            targets[a.id] = tuple(b.id for b in attrs
                                  if b.id != a.id and not (interiors[a.id] & interiors[b.id]))
        return LevelSpec(k, kind, members, list(attrs), [tuple(o) for o in owners], targets)

    # -- basics

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def label_index(self, i: int) -> int:
        return self._lab[i]

    def step(self, q: int, i: int) -> int:
        """T(q, l(s)) for the node with index ``i``."""
        return self._step[q][self._lab[i]]

    def is_goal(self, x: ProductState) -> bool:
        return x.q in self.accepting

    def is_final(self, i: int, q: int) -> bool:
        """Goal test with the final node's label consumed by a self-transition."""
        return q in self.accepting or self._step[q][self._lab[i]] in self.accepting

    # -- level actions

    def boundary_field(self, b: int) -> DijkstraResult:
        """Distances from every node to the boundary of attribute ``b``."""
        res = self._to_boundary.get(b)
        if res is None:
            res = self.scene.dijkstra_from(self.scene.boundary(b).tolist())
            self._to_boundary[b] = res
        return res

    def macro_q(self, b: int, i: int, q: int) -> int:
        """Automaton state after walking the stored path from node ``i`` to ``b``."""
        field_ = self.boundary_field(b)
        pred = field_.pred
        memo = self._macro_q
        chain = []
        while True:
            key = (b, i, q)
            if key in memo:
                out = memo[key]
                break
            p = int(pred[i])
            if p < 0:
                out = q
                memo[key] = q
                break
            chain.append(key)
            q = self._step[q][self._lab[i]]
            i = p
        for key in chain:
            memo[key] = out
        return out

    def macro_actions(self, level: int, i: int) -> list[tuple[int, int, float]]:
        """``(attribute b, target node index, cost)`` for level actions from node ``i``."""
        key = (level, i)
        cached = self._macro_cache.get(key)
        if cached is not None:
            return cached
        spec = self.levels[level]
        out = []
        seen = set()
        for a in spec.owners[i] if level > 0 else ():
            for b in spec.targets[a]:
                if b in seen:
                    continue
                seen.add(b)
                f = self.boundary_field(b)
                d = float(f.dist[i])
                if d == INF or d == 0.0:
                    continue
                out.append((b, int(f.source[i]), d))
        self._macro_cache[key] = out
        return out

    def macro_path(self, b: int, i: int) -> list[int]:
        """Node indices of the stored shortest path from ``i`` to the boundary of ``b``."""
        return self.boundary_field(b).path_to_source(i)

    def successors_index(self, level: int, i: int, q: int,
                         enabled: tuple[int, ...] | None = None) -> list[tuple[int, int, float, int]]:
        """Successors as ``(node index, q', cost, via)`` where ``via`` is the
        target attribute of a level action or -1 for a scene edge."""
        out = []
        if level == 0:
            nq = self._step[q][self._lab[i]]
            for j, c in self.scene.adj[i]:
                out.append((j, nq, c, -1))
            levels = range(1, len(self.levels)) if enabled is None else [k for k in enabled if k > 0]
            for k in levels:
                if self.levels[k].members[i]:
                    for b, j, c in self.macro_actions(k, i):
                        out.append((j, self.macro_q(b, i, q), c, b))
        else:
            for b, j, c in self.macro_actions(level, i):
                out.append((j, self.macro_q(b, i, q), c, b))
        return out

    def successors(self, level: int, x: ProductState) -> list[tuple[ProductState, float]]:
        g = self.scene
        i = g.index(x.node)
        if level > 0 and not self.levels[level].members[i]:
            return []
        return [(ProductState(g.node_id(j), nq), c) for j, nq, c, _ in self.successors_index(level, i, x.q)]

    # -- export

    def dump_level(self, level: int) -> str:
        """Action graph of one level as ``u --{cost}--> v`` lines over node ids."""
        g = self.scene
        spec = self.levels[level]
        lines = [f"level {level}: {spec.kind}"]
        for i in np.flatnonzero(spec.members).tolist():
            if level == 0:
                succ = [(j, c) for j, c in g.adj[i]]
            else:
                succ = [(j, c) for _, j, c in self.macro_actions(level, i)]
            for j, c in sorted(succ):
                lines.append(f"{g.node_id(i)} --{{{c:g}}}--> {g.node_id(j)}")
        return "\n".join(lines) + "\n"


def build_domain(g: SceneGraph, dfa: Dfa, start_node: int) -> PlanningDomain:
    return PlanningDomain(g, dfa, start_node)


def successors(dom: PlanningDomain, level: int, x: ProductState) -> list[tuple[ProductState, float]]:
    return dom.successors(level, x)


def is_goal(dom: PlanningDomain, x: ProductState) -> bool:
    return dom.is_goal(x)
