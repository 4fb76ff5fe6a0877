"""Anytime multi-resolution multi-heuristic A* over a planning domain.

One anchor queue orders states by g + w1 * h_LTL with the consistent
heuristic and every level action available. Each enabled (level, heuristic)
pair gets an inadmissible queue keyed by g + w1 * h that only generates that
level's actions; such a queue is served while its best key is within w2
times the anchor's, so every solution costs at most w1 * w2 times the optimum. g-values and back-pointers are shared by all queues. Between
iterations the weights decay toward 1, and states whose g dropped since
their last expansion seed the next iteration's queues.
"""
from __future__ import annotations

import enum
import heapq
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .automaton import accepts, can_accept
from .domain import PlanningDomain
from .heuristics import HeuristicTable, LlmField, LlmGuidance
from .scene import INF

log = logging.getLogger(__name__)

LTL, LLM = "ltl", "llm"


class Infeasible(RuntimeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TimeBudgetExceeded(RuntimeError):
    pass


@dataclass
class SearchConfig:
    w1: float = 10.0
    w2: float = 5.0
    decay: float = 0.5
    time_budget: float | None = None
    # None means every level of the domain
    enabled_levels: Sequence[int] | None = None
    # level -> heuristics for its inadmissible queues; missing levels get LTL
    enabled_heuristics: dict[int, Sequence[str]] | None = None
    # anchor key g + w1 * h_LTL; False keeps the anchor at g + h_LTL
    inflate_anchor: bool = True
    trace: bool = False

    def __post_init__(self):
        if self.w1 < 1 or self.w2 < 1:
            raise ValueError("w1 and w2 must be >= 1")
        if not (0 < self.decay <= 1):
            raise ValueError("decay must be in (0, 1]")

    def schedule(self) -> list[tuple[float, float]]:
        """Weight pairs per iteration, ending with (1, 1)."""
        out = []
        w1, w2 = self.w1, self.w2
        while True:
            out.append((w1, w2))
            if w1 == 1 and w2 == 1:
                return out
            if self.decay == 1:
                out.append((1.0, 1.0))
                return out
            w1, w2 = max(1.0, w1 * self.decay), max(1.0, w2 * self.decay)


@dataclass
class IterationLog:
    wall_time: float
    cost: float
    expansions: dict[str, int]
    w1: float
    w2: float

    def total(self) -> int:
        return sum(self.expansions.values())


@dataclass
class PlanResult:
    path: list[int]
    cost: float
    word: list[frozenset[str]]
    log: list[IterationLog]
    optimal: bool
    abstract: list[tuple[int, int, int]] = field(default_factory=list)
    trace: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def expansions(self) -> int:
        return sum(it.total() for it in self.log)

    def to_json(self, dom: PlanningDomain | None = None) -> dict:
        doc = {
            "format": "sgplan-plan", "version": 1,
            "path": self.path, "cost": self.cost, "optimal": self.optimal,
            "word": [sorted(l) for l in self.word],
            "iterations": [{"wall_time": it.wall_time, "cost": it.cost, "w1": it.w1, "w2": it.w2,
                            "expansions": it.expansions} for it in self.log],
        }
        if dom is not None:
            g = dom.scene
            doc["xyz"] = [[float(v) for v in g.xyz[g.index(s)]] for s in self.path]
        return doc

    def save(self, path, dom: PlanningDomain | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(dom), fh, indent=1)
            fh.write("\n")


@dataclass
class _Queue:
    name: str
    level: int
    heuristic: str
    heap: list = field(default_factory=list)
    closed: set = field(default_factory=set)


def _queue_name(level: int, heuristic: str) -> str:
    return f"L{level}/{heuristic}"


ANCHOR = "anchor"


class Search:
    """State shared across the anytime iterations of one planning query."""

    def __init__(self, dom: PlanningDomain, table: HeuristicTable,
                 guidance: LlmGuidance | None = None, cfg: SearchConfig | None = None):
        self.dom = dom
        self.table = table
        self.cfg = cfg or SearchConfig()
        self.levels = (tuple(range(dom.num_levels)) if self.cfg.enabled_levels is None
                       else tuple(sorted(set(self.cfg.enabled_levels) | {0})))
        for k in self.levels:
            if k >= dom.num_levels:
                raise ValueError(f"level {k} does not exist")
        self.hrows = table.rows
        heur = self.cfg.enabled_heuristics or {}
        self.queues: list[_Queue] = []
        for k in self.levels:
            for hname in heur.get(k, (LTL,)):
                if hname not in (LTL, LLM):
                    raise ValueError(f"unknown heuristic {hname!r}")
                self.queues.append(_Queue(_queue_name(k, hname), k, hname))
        self.llm = LlmField(guidance, dom.scene) if any(q.heuristic == LLM for q in self.queues) else None
        if self.llm is not None and guidance is None:
            log.warning("LLM queues enabled without guidance; h_LLM falls back to 0")
        self.anchor = _Queue(ANCHOR, 0, LTL)
        self.injected = tuple(k for k in self.levels if k > 0)

        s0 = (dom.start_index, dom.dfa.initial)
        self.start = s0
        self.g: dict[tuple[int, int], float] = {s0: 0.0}
        self.bp: dict[tuple[int, int], tuple[tuple[int, int], int] | None] = {s0: None}
        # v[r][x]: g(x) when x was last expanded with level-r actions
        self.v: dict[int, dict[tuple[int, int], float]] = {k: {} for k in self.levels}
        self.best = (INF, None)
        if dom.is_final(*s0):
            self.best = (0.0, s0)
        self.trace: list[tuple[str, int, int]] = []
        self.expansions: dict[str, int] = {}
        self.clock = time.perf_counter()

    # -- heuristics and keys

    def _h(self, heuristic: str, x: tuple[int, int]) -> float:
        if heuristic == LTL:
            return self.hrows[x[1]][x[0]]
        hl = self.hrows[x[1]][x[0]]
        if hl == INF:
            return INF
        return self.llm.h(x[0], x[1])

    def _push(self, queue: _Queue, x, gx: float, w1: float):
        if queue is self.anchor:
            h = self.hrows[x[1]][x[0]]
            key = gx + (w1 if self.cfg.inflate_anchor else 1.0) * h
        else:
            h = self._h(queue.heuristic, x)
            key = gx + w1 * h
        if h == INF:
            return
        heapq.heappush(queue.heap, (key, -gx, x[0], x[1]))

    def _valid(self, queue: _Queue, entry) -> bool:
        x = (entry[2], entry[3])
        gx = -entry[1]
        if self.g.get(x) != gx or x in queue.closed:
            return False
        return gx < self.v[queue.level].get(x, INF) and (queue is not self.anchor or gx < self.v[0].get(x, INF))

    def _top(self, queue: _Queue) -> float:
        heap = queue.heap
        while heap and not self._valid(queue, heap[0]):
            heapq.heappop(heap)
        return heap[0][0] if heap else INF

    # -- expansion

    def _expand(self, queue: _Queue, w1: float, w2: float):
        entry = heapq.heappop(queue.heap)
        x = (entry[2], entry[3])
        gx = self.g[x]
        dom = self.dom
        full = queue is self.anchor or queue.level == 0
        queue.closed.add(x)
        if full:
            for k in self.levels:
                self.v[k][x] = gx
            succ = dom.successors_index(0, x[0], x[1], self.injected)
        else:
            self.v[queue.level][x] = gx
            succ = dom.successors_index(queue.level, x[0], x[1])
        self.expansions[queue.name] = self.expansions.get(queue.name, 0) + 1
        if self.cfg.trace:
            self.trace.append((queue.name, x[0], x[1]))
        for j, nq, c, via in succ:
            y = (j, nq)
            gy = gx + c
            if gy >= self.g.get(y, INF):
                continue
            self.g[y] = gy
            self.bp[y] = (x, via)
            if gy < self.best[0] and dom.is_final(j, nq):
                self.best = (gy, y)
            if y not in self.anchor.closed:
                self._push(self.anchor, y, gy, w1)
            for other in self.queues:
                if y in other.closed:
                    continue
                if other.level > 0 and not dom.levels[other.level].members[j]:
                    continue
                self._push(other, y, gy, w1)

    def _reset(self, w1: float):
        """Seed the queues of a new iteration from locally inconsistent states."""
        self.anchor.heap.clear()
        self.anchor.closed.clear()
        for q in self.queues:
            q.heap.clear()
            q.closed.clear()
        members = [self.dom.levels[q.level].members for q in self.queues]
        v0 = self.v[0]
        for x, gx in self.g.items():
            if gx < v0.get(x, INF):
                self._push(self.anchor, x, gx, w1)
            for q, mem in zip(self.queues, members):
                if q.level > 0 and not mem[x[0]]:
                    continue
                if gx < self.v[q.level].get(x, INF):
                    self._push(q, x, gx, w1)

    def _over_budget(self) -> bool:
        tb = self.cfg.time_budget
        return tb is not None and time.perf_counter() - self.clock > tb

    def iterate(self, w1: float, w2: float) -> bool:
        """One weighted search; returns False if the time budget ran out."""
        self._reset(w1)
        anchor = self.anchor
        n = 0
        while True:
            a_key = self._top(anchor)
            if a_key == INF:
                return True
            if not self.queues:
                if self.best[0] <= a_key:
                    return True
                self._expand(anchor, w1, w2)
            for q in self.queues:
                a_key = self._top(anchor)
                if a_key == INF:
                    return True
                q_key = self._top(q)
                if q_key <= w2 * a_key:
                    if self.best[0] <= q_key:
                        return True
                    self._expand(q, w1, w2)
                else:
                    if self.best[0] <= a_key:
                        return True
                    self._expand(anchor, w1, w2)
            n += 1
            if n % 256 == 0 and self._over_budget():
                return False

    # -- results

    def abstract_path(self, x) -> list[tuple[int, int, int]]:
        """``(node index, q, via)`` from the start to ``x``; ``via`` labels the incoming action."""
        out = []
        while x is not None:
            step = self.bp[x]
            via = -1 if step is None else step[1]
            out.append((x[0], x[1], via))
            x = None if step is None else step[0]
        return out[::-1]

    def result(self, log_: list[IterationLog], optimal: bool) -> PlanResult:
        dom = self.dom
        g = dom.scene
        cost, x = self.best
        if dom.dfa.initial in dom.accepting:
            return PlanResult([], 0.0, [], list(log_), optimal, [], list(self.trace))
        abstract = self.abstract_path(x)
        nodes = expand_solution(dom, abstract)
        path = [g.node_id(i) for i in nodes]
        return PlanResult(path, path_cost(dom, nodes), [g.labels[i] for i in nodes],
                          list(log_), optimal, abstract, list(self.trace))


def path_cost(dom: PlanningDomain, nodes: Sequence[int]) -> float:
    adj = dom.scene.adj
    total = 0.0
    for a, b in zip(nodes, nodes[1:]):
        total += min(c for j, c in adj[a] if j == b)
    return total


def expand_solution(dom: PlanningDomain, abstract: Sequence[tuple[int, int, int]]) -> list[int]:
    """Replace level actions by their stored occupancy paths (node indices)."""
    if not abstract:
        return []
    nodes = [abstract[0][0]]
    for (i, _, _), (j, _, via) in zip(abstract, abstract[1:]):
        if via < 0:
            nodes.append(j)
        else:
            seg = dom.macro_path(via, i)
            assert seg[0] == i and seg[-1] == j
            nodes.extend(seg[1:])
    return nodes


def diagnose(dom: PlanningDomain) -> str:
    if not can_accept(dom.dfa)[dom.dfa.initial]:
        return "no accepting automaton path: the mission is unsatisfiable"
    return "accepting labels unreachable in the scene from the start node"


def plan(dom: PlanningDomain, table: HeuristicTable, guidance: LlmGuidance | None = None,
         cfg: SearchConfig | None = None) -> Iterator[PlanResult]:
    """Yield improving solutions; the last one (weights 1, 1) is optimal."""
    cfg = cfg or SearchConfig()
    search = Search(dom, table, guidance, cfg)
    log_: list[IterationLog] = []
    if dom.dfa.initial in dom.accepting:
        log_.append(IterationLog(0.0, 0.0, {}, 1.0, 1.0))
        yield search.result(log_, True)
        return
    if table.h(dom.start_index, dom.dfa.initial) == INF:
        raise Infeasible(diagnose(dom))
    last = INF
    for w1, w2 in cfg.schedule():
        before = dict(search.expansions)
        finished = search.iterate(w1, w2)
        delta = {k: v - before.get(k, 0) for k, v in search.expansions.items() if v - before.get(k, 0)}
        log_.append(IterationLog(time.perf_counter() - search.clock, search.best[0], delta, w1, w2))
        final = w1 == 1 and w2 == 1 and finished
        if not finished:
            if search.best[1] is None:
                raise TimeBudgetExceeded("no solution within the time budget")
            yield search.result(log_, False)
            return
        if search.best[1] is None:
            raise Infeasible(diagnose(dom))
        if search.best[0] < last or final:
            last = search.best[0]
            yield search.result(log_, final)


def solve(dom: PlanningDomain, table: HeuristicTable, guidance: LlmGuidance | None = None,
          cfg: SearchConfig | None = None) -> PlanResult:
    """Run the anytime loop to completion and return the last solution."""
    out = None
    for out in plan(dom, table, guidance, cfg):
        pass
    return out


# ------------------------------------------------------------ certification


class Verdict(enum.Enum):
    MATCH = "Match"
    COST_GAP = "CostGap"
    INCOMPARABLE = "Incomparable"
    BOTH_INFEASIBLE = "BothInfeasible"
    MISMATCH = "Mismatch"


@dataclass
class Certificate:
    verdict: Verdict
    oracle_cost: float | None = None
    gap: float | None = None


def product_dijkstra(dom: PlanningDomain) -> float:
    """Optimal cost over scene edges and automaton steps, or inf."""
    adj = dom.scene.adj
    step, lab = dom._step, dom._lab
    if dom.dfa.initial in dom.accepting:
        return 0.0
    s0 = (dom.start_index, dom.dfa.initial)
    dist = {s0: 0.0}
    heap = [(0.0, s0)]
    done = set()
    while heap:
        d, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        i, q = x
        if dom.is_final(i, q):
            return d
        nq = step[q][lab[i]]
        for j, c in adj[i]:
            y = (j, nq)
            nd = d + c
            if nd < dist.get(y, INF):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return INF


def certify_optimal(result: PlanResult | None, dom: PlanningDomain, oracle_budget: int = 30_000) -> Certificate:
    if len(dom.scene) * len(dom.dfa) > oracle_budget:
        return Certificate(Verdict.INCOMPARABLE)
    best = product_dijkstra(dom)
    if result is None:
        return Certificate(Verdict.BOTH_INFEASIBLE if best == INF else Verdict.MISMATCH, best)
    if best == INF:
        return Certificate(Verdict.MISMATCH, best)
    gap = result.cost - best
    if gap == 0:
        return Certificate(Verdict.MATCH, best, 0.0)
    if gap > 0:
        return Certificate(Verdict.COST_GAP, best, gap)
    return Certificate(Verdict.MISMATCH, best, gap)


def word_accepted(dom: PlanningDomain, result: PlanResult) -> bool:
    """Replay the word with departure labels plus a final self-transition."""
    if not result.word:
        return dom.dfa.initial in dom.accepting
    return accepts(dom.dfa, list(result.word) + [result.word[-1]])
