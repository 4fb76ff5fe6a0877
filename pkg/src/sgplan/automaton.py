"""Co-safe LTL to DFA compilation by formula progression.

Each automaton state is a normalized formula: the obligation left on the
rest of the word. Reading a label progresses the formula one step; the
state ``true`` is the only accepting state and ``false`` is the sink.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .ltl import (
    FALSE,
    TRUE,
    And,
    Atom,
    Eventually,
    Formula,
    Next,
    Not,
    NotCosafe,
    Or,
    Until,
    _Const,
    check_cosafe,
    print_prefix,
    props,
)

DEFAULT_STATE_CAP = 10_000


class StateBlowup(RuntimeError):
    pass


class Unreachable(RuntimeError):
    pass


# ------------------------------------------------------------ normalization
#
# A normalized state is an absorbed DNF whose literals ("leaves") are atoms,
# negated atoms and normalized X/F/U subformulas. Boolean identities are sound
# under the finite-prefix semantics as long as a negated atom stays an
# independent leaf: at the end of a word both p and !p are unmet, so
# p & !p folds to false but p | !p does not fold to true.

Clause = frozenset  # of leaf formulas


@lru_cache(maxsize=None)
def _key(phi: Formula) -> str:
    return print_prefix(phi)


def _absorb(clauses: set[Clause]) -> frozenset[Clause]:
    kept = sorted(clauses, key=len)
    out: list[Clause] = []
    for c in kept:
        if not any(k <= c for k in out):
            out.append(c)
    return frozenset(out)


def _contradictory(clause: Clause) -> bool:
    return any(isinstance(l, Not) and l.child in clause for l in clause)


@lru_cache(maxsize=None)
def _dnf(phi: Formula) -> frozenset[Clause]:
    if phi == TRUE:
        return frozenset([frozenset()])
    if phi == FALSE:
        return frozenset()
    if isinstance(phi, Or):
        return _absorb(set(_dnf(phi.left)) | set(_dnf(phi.right)))
    if isinstance(phi, And):
        left, right = _dnf(phi.left), _dnf(phi.right)
        merged = {a | b for a in left for b in right}
        return _absorb({c for c in merged if not _contradictory(c)})
    leaf = _leaf(phi)
    if leaf == FALSE:
        return frozenset()
    return frozenset([frozenset([leaf])])


def _leaf(phi: Formula) -> Formula:
    if isinstance(phi, (Atom, Not)):
        return phi
    if isinstance(phi, Next):
        inner = normalize(phi.child)
        return FALSE if inner == FALSE else Next(inner)
    if isinstance(phi, Eventually):
        inner = normalize(phi.child)
        if inner == FALSE:
            return FALSE
        return inner if isinstance(inner, Eventually) else Eventually(inner)
    if isinstance(phi, Until):
        left, right = normalize(phi.left), normalize(phi.right)
        if right == FALSE:
            return FALSE
        if left == TRUE:
            return right if isinstance(right, Eventually) else Eventually(right)
        return Until(left, right)
    raise NotCosafe(f"cannot progress {type(phi).__name__}")


def _rebuild(kind: type, parts: list[Formula]) -> Formula:
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = kind(p, out)
    return out


@lru_cache(maxsize=None)
def normalize(phi: Formula) -> Formula:
    """Canonical form of an NNF co-safe formula.

    Temporal operators are never folded into ``true``, so a normalized
    formula is ``true`` exactly when the empty remainder of a word satisfies
    it.
    """
    clauses = _dnf(phi)
    if not clauses:
        return FALSE
    if frozenset() in clauses:
        return TRUE
    conj = []
    for c in clauses:
        leaves = sorted(c, key=_key)
        conj.append(_rebuild(And, leaves))
    conj.sort(key=_key)
    return _rebuild(Or, conj)


def progress(phi: Formula, label: frozenset[str]) -> Formula:
    """One-step progression of an NNF co-safe formula through ``label``."""
    if isinstance(phi, _Const):
        return phi
    if isinstance(phi, Atom):
        return TRUE if phi.name in label else FALSE
    if isinstance(phi, Not):
        return FALSE if phi.child.name in label else TRUE
    if isinstance(phi, And):
        return And(progress(phi.left, label), progress(phi.right, label))
    if isinstance(phi, Or):
        return Or(progress(phi.left, label), progress(phi.right, label))
    if isinstance(phi, Next):
        return phi.child
    if isinstance(phi, Eventually):
        return Or(progress(phi.child, label), phi)
    if isinstance(phi, Until):
        return Or(progress(phi.right, label), And(progress(phi.left, label), phi))
    raise NotCosafe(f"cannot progress {type(phi).__name__}")


# ---------------------------------------------------------------- the DFA


@dataclass
class Dfa:
    """Deterministic automaton over label sets.

    ``delta[q]`` maps the restriction of a label to ``relevant[q]`` onto the
    successor index, so ``step`` works on arbitrary labels over any alphabet.
    """

    states: list[Formula]
    relevant: list[frozenset[str]]
    delta: list[dict[frozenset[str], int]]
    accepting: frozenset[int]
    initial: int
    sink: int | None
    formula: Formula | None = None
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.states)

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset().union(*self.relevant)

    def step(self, q: int, label: Iterable[str]) -> int:
        key = (q, label if isinstance(label, frozenset) else frozenset(label))
        try:
            return self._memo[key]
        except KeyError:
            nq = self.delta[q][key[1] & self.relevant[q]]
            self._memo[key] = nq
            return nq

    def run(self, word: Iterable[Iterable[str]], q: int | None = None) -> int:
        q = self.initial if q is None else q
        for label in word:
            q = self.step(q, label)
        return q

    def is_accepting(self, q: int) -> bool:
        return q in self.accepting

    def edges(self) -> Iterable[tuple[int, frozenset[str], int]]:
        for q, row in enumerate(self.delta):
            for label, nq in sorted(row.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
                yield q, label, nq

    def to_text(self) -> str:
        lines = [f"initial: {self.initial}",
                 f"accepting: {' '.join(map(str, sorted(self.accepting)))}"]
        if self.sink is not None:
            lines.append(f"sink: {self.sink}")
        for q, f in enumerate(self.states):
            lines.append(f"state {q}: {print_prefix(f)}")
        for q, label, nq in self.edges():
            lines.append(f"{q} --{{{','.join(sorted(label))}}}--> {nq}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        out = ["digraph dfa {", "  rankdir=LR;", '  init [shape=point];']
        for q in range(len(self.states)):
            shape = "doublecircle" if q in self.accepting else "circle"
            out.append(f'  {q} [shape={shape}];')
        out.append(f"  init -> {self.initial};")
        for q, label, nq in self.edges():
            out.append(f'  {q} -> {nq} [label="{{{",".join(sorted(label))}}}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def _subsets(atoms: frozenset[str]) -> list[frozenset[str]]:
    ordered = sorted(atoms)
    return [frozenset(c) for r in range(len(ordered) + 1) for c in itertools.combinations(ordered, r)]


def compile(phi: Formula, state_cap: int = DEFAULT_STATE_CAP) -> Dfa:
    """Build the DFA of a co-safe formula by exhaustive progression."""
    verdict = check_cosafe(phi)
    if not verdict.is_cosafe:
        raise NotCosafe(verdict.describe())
    q0 = normalize(verdict.nnf)
    index = {q0: 0}
    states = [q0]
    relevant: list[frozenset[str]] = []
    delta: list[dict[frozenset[str], int]] = []
    i = 0
    while i < len(states):
        q = states[i]
        rel = props(q)
        row = {}
        for label in _subsets(rel):
            nq = normalize(progress(q, label))
            if nq not in index:
                if len(states) >= state_cap:
                    raise StateBlowup(f"more than {state_cap} automaton states")
                index[nq] = len(states)
                states.append(nq)
            row[label] = index[nq]
        relevant.append(rel)
        delta.append(row)
        i += 1
    return Dfa(
        states=states,
        relevant=relevant,
        delta=delta,
        accepting=frozenset(q for q, f in enumerate(states) if f == TRUE),
        initial=0,
        sink=next((q for q, f in enumerate(states) if f == FALSE), None),
        formula=phi,
    )


def accepts(dfa: Dfa, word: Sequence[Iterable[str]]) -> bool:
    q = dfa.initial
    if q in dfa.accepting:
        return True
    for label in word:
        q = dfa.step(q, label)
        if q in dfa.accepting:
            return True
    return False


def shortest_accepting_path(dfa: Dfa, q: int) -> list[tuple[int, frozenset[str]]]:
    """Fewest-hop route from ``q`` into the accepting set.

    Returns ``[(state, label), ...]`` where each label is read in ``state``.
    Among equal hop counts the smallest labels (then lexicographic) win, so
    no proposition shows up that the mission does not need.
    """
    if q in dfa.accepting:
        return []
    parent: dict[int, tuple[int, frozenset[str]]] = {q: None}
    queue = deque([q])
    while queue:
        u = queue.popleft()
        for label in _subsets(dfa.relevant[u]):
            v = dfa.delta[u][label]
            if v in parent:
                continue
            parent[v] = (u, label)
            if v in dfa.accepting:
                path = []
                while parent[v] is not None:
                    u, label = parent[v]
                    path.append((u, label))
                    v = u
                return path[::-1]
            queue.append(v)
    raise Unreachable(f"no accepting state reachable from state {q}")


def can_accept(dfa: Dfa) -> list[bool]:
    """Per state: is some accepting state reachable?"""
    rev: dict[int, set[int]] = {}
    for u, row in enumerate(dfa.delta):
        for v in row.values():
            rev.setdefault(v, set()).add(u)
    ok = [False] * len(dfa)
    stack = list(dfa.accepting)
    for q in stack:
        ok[q] = True
    while stack:
        v = stack.pop()
        for u in rev.get(v, ()):
            if not ok[u]:
                ok[u] = True
                stack.append(u)
    return ok
