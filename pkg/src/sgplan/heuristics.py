"""Heuristics over product states.

``h_ltl`` is the consistent metric-automaton heuristic: label-to-label
lower-bound costs, a Bellman potential over (label, automaton state) pairs,
and one seeded Dijkstra per automaton state that turns the potential into a
per-node field. ``h_llm`` sums center-to-center distances of a high-level
plan of function calls (from a language model or a mock).
"""
from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

from .automaton import Dfa, Unreachable, shortest_accepting_path
from .domain import PlanningDomain, ProductState
from .scene import FLOOR, INF, OBJECT, ROOM, SceneGraph, dijkstra, level_rank

log = logging.getLogger(__name__)

CACHE_FORMAT = "sgplan-heuristics"
CACHE_VERSION = 1
GUIDANCE_FORMAT = "sgplan-guidance"


class MissingPlan(KeyError):
    pass


def label_universe(g: SceneGraph) -> list[frozenset[str]]:
    """Distinct realized labels in canonical order (sorted proposition names)."""
    return sorted(set(g.labels), key=lambda l: tuple(sorted(l)))


def compute_label_costs(g: SceneGraph, labels: Sequence[frozenset[str]] | None = None) -> np.ndarray:
    """c_l(l1, l2): shortest distance between any l1-node and any l2-node."""
    labels = label_universe(g) if labels is None else list(labels)
    index = {l: k for k, l in enumerate(labels)}
    node_label = np.array([index[l] for l in g.labels], dtype=np.int64)
    L = len(labels)
    out = np.full((L, L), INF)
    csr = g.csr
    for k in range(L):
        src = np.flatnonzero(node_label == k)
        dist = sp_dijkstra(csr, directed=False, indices=src, min_only=True)
        np.minimum.at(out[k], node_label, dist)
    # symmetric by construction up to rounding; keep the smaller side
    out = np.minimum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out


def compute_g(label_cost: np.ndarray, step_table: np.ndarray, accepting) -> tuple[np.ndarray, np.ndarray]:
    """Backward Dijkstra for g(l, q) = min_l' c(l, l') + g(l', T(q, l')).

    ``step_table[q, l]`` is T(q, l) over the label universe. Returns the
    potential and the minimizing next label (-1 on accepting or dead pairs).
    """
    Q, L = step_table.shape
    gv = np.full((L, Q), INF)
    nxt = np.full((L, Q), -1, dtype=np.int64)
    # preds[l'][q'] = automaton states q with T(q, l') = q'
    preds: list[list[list[int]]] = [[[] for _ in range(Q)] for _ in range(L)]
    for q in range(Q):
        for l2 in range(L):
            preds[l2][int(step_table[q, l2])].append(q)
    cost = label_cost.tolist()
    heap = []
    for q in accepting:
        for l in range(L):
            gv[l, q] = 0.0
            heap.append((0.0, -1, l, q))
    heapq.heapify(heap)
    done = np.zeros((L, Q), dtype=bool)
    while heap:
        d, via, l2, q2 = heapq.heappop(heap)
        if done[l2, q2] or d > gv[l2, q2]:
            continue
        done[l2, q2] = True
        for q in preds[l2][q2]:
            for l in range(L):
                if done[l, q]:
                    continue
                nd = cost[l][l2] + d
                if nd < gv[l, q] or (nd == gv[l, q] and l2 < nxt[l, q]):
                    gv[l, q] = nd
                    nxt[l, q] = l2
                    heapq.heappush(heap, (nd, l2, l, q))
    for q in accepting:
        nxt[:, q] = -1
    return gv, nxt


def compute_h_ltl(g: SceneGraph, step_table: np.ndarray, node_label: np.ndarray,
                  gv: np.ndarray, accepting) -> np.ndarray:
    """h(s, q) = min_t d(s, t) + g(l(t), T(q, l(t))), one seeded Dijkstra per q."""
    Q = step_table.shape[0]
    h = np.zeros((Q, len(g)))
    for q in range(Q):
        if q in accepting:
            continue
        pot = gv[node_label, step_table[q, node_label]]
        seeds = [(i, p) for i, p in enumerate(pot.tolist()) if p < INF]
        if not seeds:
            h[q] = INF
            continue
        h[q] = dijkstra(g.adj, seeds).dist
    return h


@dataclass
class HeuristicTable:
    labels: list[frozenset[str]]
    node_label: np.ndarray
    label_cost: np.ndarray
    g_table: np.ndarray
    next_label: np.ndarray
    h_field: np.ndarray
    accepting: frozenset[int]
    _rows: list = field(default=None, repr=False)

    @property
    def rows(self) -> list[list[float]]:
        if self._rows is None:
            self._rows = self.h_field.tolist()
        return self._rows

    def h(self, i: int, q: int) -> float:
        return self.rows[q][i]

    def save(self, path, key: str = "") -> None:
        doc = {
            "format": CACHE_FORMAT, "version": CACHE_VERSION, "key": key,
            "labels": [sorted(l) for l in self.labels],
            "node_label": self.node_label.tolist(),
            "label_cost": self.label_cost.tolist(),
            "g_table": self.g_table.tolist(),
            "next_label": self.next_label.tolist(),
            "h_field": self.h_field.tolist(),
            "accepting": sorted(self.accepting),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path, key: str | None = None) -> "HeuristicTable | None":
        """Read a cache file; ``None`` if it is stale or from another version."""
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError):
            return None
        if doc.get("format") != CACHE_FORMAT or doc.get("version") != CACHE_VERSION:
            return None
        if key is not None and doc.get("key") != key:
            return None
        return cls(
            labels=[frozenset(l) for l in doc["labels"]],
            node_label=np.array(doc["node_label"], dtype=np.int64),
            label_cost=np.array(doc["label_cost"], dtype=float),
            g_table=np.array(doc["g_table"], dtype=float),
            next_label=np.array(doc["next_label"], dtype=np.int64),
            h_field=np.array(doc["h_field"], dtype=float),
            accepting=frozenset(doc["accepting"]),
        )


def build_tables(dom: PlanningDomain) -> HeuristicTable:
    g = dom.scene
    cl = compute_label_costs(g, dom.label_universe)
    gv, nxt = compute_g(cl, dom.step_table, dom.accepting)
    h = compute_h_ltl(g, dom.step_table, dom.node_label, gv, dom.accepting)
    return HeuristicTable(dom.label_universe, dom.node_label, cl, gv, nxt, h, frozenset(dom.accepting))


def h_ltl(table: HeuristicTable, dom: PlanningDomain, x: ProductState) -> float:
    return table.h(dom.scene.index(x.node), x.q)


# ------------------------------------------------------------- LLM heuristic


@dataclass(frozen=True)
class Call:
    motion: str
    src: int
    dst: int


@dataclass
class LlmGuidance:
    plans: dict[tuple[int, int], list[Call]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": GUIDANCE_FORMAT, "version": CACHE_VERSION,
            "plans": [{"attribute": a, "q": q, "calls": [[c.motion, c.src, c.dst] for c in calls]}
                      for (a, q), calls in sorted(self.plans.items())],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, doc: Mapping) -> "LlmGuidance":
        if doc.get("format") != GUIDANCE_FORMAT:
            raise ValueError("not a guidance file")
        return cls({(int(p["attribute"]), int(p["q"])): [Call(m, int(a), int(b)) for m, a, b in p["calls"]]
                    for p in doc["plans"]})

    @classmethod
    def load(cls, path) -> "LlmGuidance":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def validate(self, g: SceneGraph) -> None:
        for calls in self.plans.values():
            for c in calls:
                if c.src not in g.attributes or c.dst not in g.attributes:
                    raise MissingPlan(f"plan references unknown attribute in {c}")


def plan_cost(calls: Sequence[Call], g: SceneGraph) -> float:
    return float(sum(np.linalg.norm(g.attributes[c.dst].center - g.attributes[c.src].center)
                     for c in calls))


class LlmField:
    """Per (context attribute, q) plan costs, looked up by node index."""

    def __init__(self, guidance: LlmGuidance | None, g: SceneGraph):
        self.g = g
        self.context = [g.context_attribute(i) for i in range(len(g))]
        self.costs: dict[tuple[int, int], float] = {}
        self.missing: set[tuple[int, int]] = set()
        if guidance is not None:
            for key, calls in guidance.plans.items():
                self.costs[key] = plan_cost(calls, g)

    def h(self, i: int, q: int) -> float:
        a = self.context[i]
        if a is None:
            return 0.0
        v = self.costs.get((a, q))
        if v is None:
            if (a, q) not in self.missing:
                self.missing.add((a, q))
                log.debug("no guidance plan for attribute %s at q=%s; using 0", a, q)
            return 0.0
        return v


def h_llm(guidance: LlmGuidance, g: SceneGraph, x: ProductState) -> float:
    """Sum of center distances over the plan for the node's context attribute."""
    i = g.index(x.node)
    a = g.context_attribute(i)
    if a is None:
        return 0.0
    calls = guidance.plans.get((a, x.q))
    if calls is None:
        return 0.0
    return plan_cost(calls, g)


# ------------------------------------------------------- mission description

_KIND_ORDER = {FLOOR: 0, ROOM: 1, OBJECT: 2}
INFEASIBLE_TEXT = "mission infeasible from current state"


def remaining_mission(dfa: Dfa, q: int, scene: SceneGraph) -> str:
    """Plain-English rendering of what is left to do from automaton state ``q``."""
    try:
        path = shortest_accepting_path(dfa, q)
    except Unreachable:
        return INFEASIBLE_TEXT
    seen: list[str] = []
    for _, label in path:
        for p in sorted(label):
            if p not in seen:
                seen.append(p)
    by_prop = {a.prop: a for a in scene.attributes.values()}
    attrs = [by_prop[p] for p in seen if p in by_prop]
    attrs.sort(key=lambda a: (_KIND_ORDER.get(a.kind, 3), a.id))
    return " and ".join(f"{a.verb} the {a.name} {a.id}" for a in attrs)


# ------------------------------------------------------------ mock guidance


def _target_attribute(g: SceneGraph, label: frozenset[str]):
    attrs = [a for a in g.attributes.values() if a.prop in label]
    if not attrs:
        return None
    return min(attrs, key=lambda a: (level_rank(a.kind), a.id))


def mock_guidance(dom: PlanningDomain, table: HeuristicTable,
                  contexts: Sequence[int] | None = None) -> LlmGuidance:
    """Guidance plans that follow the table's own least-cost label chain.

    For every (context attribute, q) the chain starts at the label of the
    node nearest the attribute center, then follows next_label until the
    automaton accepts. Each step becomes ``move`` (rooms, floors) or
    ``reach`` (objects) toward the most specific attribute of the label.
    """
    g = dom.scene
    if contexts is None:
        contexts = [a.id for a in g.attributes.values() if a.kind in (ROOM, FLOOR)]
    index = {l: k for k, l in enumerate(table.labels)}
    plans = {}
    for a in contexts:
        attr = g.attributes[a]
        start = g.nearest_node(attr.center)
        for q in range(len(dom.dfa)):
            if q in dom.accepting:
                plans[a, q] = []
                continue
            l = index[g.labels[start]]
            cur, calls = int(dom.step_table[q, l]), []
            prev = attr
            ok = True
            for _ in range(4 * len(table.labels) * len(dom.dfa) + 1):
                if cur in dom.accepting:
                    break
                nl = int(table.next_label[l, cur])
                if nl < 0:
                    ok = False
                    break
                cur = int(dom.step_table[cur, nl])
                l = nl
                target = _target_attribute(g, table.labels[nl])
                if target is not None and target.id != prev.id:
                    calls.append(Call("reach" if target.kind == OBJECT else "move", prev.id, target.id))
                    prev = target
            else:
                ok = False
            if ok:
                plans[a, q] = calls
    return LlmGuidance(plans)
