"""LTL syntax trees, prefix-notation I/O, negation normal form and co-safety.

Formulas are immutable dataclass trees. The wire syntax is whitespace
separated prefix notation::

    & F & bedroom_2 F & kitchen_3 F oven_11 ! tv_9

Operator tokens are ``! & | => X U F G`` plus ``R`` (release), which only
appears in negation normal form output. ``true`` and ``false`` are constants.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np


class LtlError(ValueError):
    pass


class UnknownToken(LtlError):
    pass


class ArityError(LtlError):
    pass


class TrailingTokens(LtlError):
    pass


class NotCosafe(LtlError):
    pass


@dataclass(frozen=True)
class Proposition:
    """An atomic proposition bound to one scene attribute."""

    attribute_id: str
    display_name: str = ""

    def __post_init__(self):
        if not self.attribute_id:
            raise ValueError("attribute_id must be nonempty")


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return to_infix(self)

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    name: str

    def __repr__(self):
        return f"Atom({self.name!r})"


@dataclass(frozen=True, repr=False)
class _Const(Formula):
    value: bool

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


TRUE = _Const(True)
FALSE = _Const(False)


@dataclass(frozen=True, repr=False)
class Not(Formula):
    child: Formula

    def __repr__(self):
        return f"Not({self.child!r})"


@dataclass(frozen=True, repr=False)
class Next(Formula):
    child: Formula

    def __repr__(self):
        return f"Next({self.child!r})"


@dataclass(frozen=True, repr=False)
class Eventually(Formula):
    child: Formula

    def __repr__(self):
        return f"Eventually({self.child!r})"


@dataclass(frozen=True, repr=False)
class Always(Formula):
    child: Formula

    def __repr__(self):
        return f"Always({self.child!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"And({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"Or({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Imply(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"Imply({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Until(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"Until({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Release(Formula):
    """Dual of Until; produced only by :func:`to_nnf`."""

    left: Formula
    right: Formula

    def __repr__(self):
        return f"Release({self.left!r}, {self.right!r})"


UNARY = {"!": Not, "X": Next, "F": Eventually, "G": Always}
BINARY = {"&": And, "|": Or, "=>": Imply, "U": Until, "R": Release}
_TOKEN_OF = {cls: tok for tok, cls in {**UNARY, **BINARY}.items()}
_INFIX_OP = {And: "&", Or: "|", Imply: "->", Until: "U", Release: "R"}

_ATOM_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_ALIAS_RE = re.compile(r"^p(\d+)$")

AlphabetLike = Union[Iterable[Proposition], Iterable[str], None]


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, (Not, Next, Eventually, Always)):
        return (phi.child,)
    if isinstance(phi, (And, Or, Imply, Until, Release)):
        return (phi.left, phi.right)
    return ()


def props(phi: Formula) -> frozenset[str]:
    """Names of all atoms occurring in ``phi``."""
    out: set[str] = set()
    stack = [phi]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom):
            out.add(f.name)
        else:
            stack.extend(children(f))
    return frozenset(out)


def subformula(phi: Formula, path: Sequence[int]) -> Formula:
    for i in path:
        phi = children(phi)[i]
    return phi


# ---------------------------------------------------------------- prefix I/O


def _alphabet_names(alphabet: AlphabetLike) -> set[str] | None:
    if alphabet is None:
        return None
    return {a.attribute_id if isinstance(a, Proposition) else str(a) for a in alphabet}


def _resolver(names: set[str] | None):
    if names is None:
        def resolve(tok: str) -> str | None:
            return tok if _ATOM_RE.match(tok) else None
        return resolve

    by_id: dict[str, list[str]] = {}
    for n in names:
        head, _, tail = n.rpartition("_")
        if head and tail.isdigit():
            by_id.setdefault(tail, []).append(n)

    def resolve(tok: str) -> str | None:
        if tok in names:
            return tok
        # the short "p11" form resolves through the unique id suffix
        m = _ALIAS_RE.match(tok)
        if m and len(by_id.get(m.group(1), ())) == 1:
            return by_id[m.group(1)][0]
        return None

    return resolve


def parse_prefix(text: str, alphabet: AlphabetLike = None) -> Formula:
    """Parse whitespace-tokenized prefix notation.

    With an ``alphabet`` every atom must be one of its ids; ``p<id>`` tokens
    are accepted as shorthand for the unique alphabet entry ending in
    ``_<id>``. Without one, any identifier is an atom.
    """
    tokens = text.split()
    resolve = _resolver(_alphabet_names(alphabet))
    pos = 0

    def parse() -> Formula:
        nonlocal pos
        if pos >= len(tokens):
            raise ArityError(f"formula ends early after {len(tokens)} tokens")
        tok = tokens[pos]
        pos += 1
        if tok in UNARY:
            return UNARY[tok](parse())
        if tok in BINARY:
            left = parse()
            return BINARY[tok](left, parse())
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        name = resolve(tok)
        if name is None:
            raise UnknownToken(f"unknown token {tok!r} at position {pos - 1}")
        return Atom(name)

    phi = parse()
    if pos != len(tokens):
        raise TrailingTokens(f"unexpected tokens after formula: {' '.join(tokens[pos:])!r}")
    return phi


def print_prefix(phi: Formula, short_ids: bool = False) -> str:
    """Render ``phi`` in prefix notation.

    ``short_ids`` writes atoms named ``name_<id>`` as ``p<id>``.
    """
    out: list[str] = []
    stack = [phi]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom):
            name = f.name
            if short_ids:
                head, _, tail = name.rpartition("_")
                if head and tail.isdigit():
                    name = f"p{tail}"
            out.append(name)
        elif isinstance(f, _Const):
            out.append("true" if f.value else "false")
        else:
            out.append(_TOKEN_OF[type(f)])
            stack.extend(reversed(children(f)))
    return " ".join(out)


def to_infix(phi: Formula) -> str:
    """Fully parenthesized infix rendering, for logs only."""
    if isinstance(phi, Atom):
        return phi.name
    if isinstance(phi, _Const):
        return "true" if phi.value else "false"
    if isinstance(phi, (Not, Next, Eventually, Always)):
        return f"{_TOKEN_OF[type(phi)]}{to_infix(phi.child)}" if isinstance(phi.child, (Atom, _Const)) \
            else f"{_TOKEN_OF[type(phi)]}({to_infix(phi.child)})"
    return f"({to_infix(phi.left)} {_INFIX_OP[type(phi)]} {to_infix(phi.right)})"


def read_formula_file(path, alphabet: AlphabetLike = None) -> list[Formula]:
    """One prefix formula per line; blank lines and ``#`` comments skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                out.append(parse_prefix(line, alphabet))
    return out


# ------------------------------------------------------------------- NNF


def to_nnf(phi: Formula) -> Formula:
    """Push negations to atoms and eliminate implication."""
    return _nnf(phi, False)


def _nnf(phi: Formula, neg: bool) -> Formula:
    if isinstance(phi, Atom):
        return Not(phi) if neg else phi
    if isinstance(phi, _Const):
        return _Const(phi.value != neg)
    if isinstance(phi, Not):
        return _nnf(phi.child, not neg)
    if isinstance(phi, Next):
        return Next(_nnf(phi.child, neg))
    if isinstance(phi, Eventually):
        inner = _nnf(phi.child, neg)
        return Always(inner) if neg else Eventually(inner)
    if isinstance(phi, Always):
        inner = _nnf(phi.child, neg)
        return Eventually(inner) if neg else Always(inner)
    if isinstance(phi, Imply):
        # a => b  ==  !a | b
        left = _nnf(phi.left, not neg)
        right = _nnf(phi.right, neg)
        return And(left, right) if neg else Or(left, right)
    left, right = _nnf(phi.left, neg), _nnf(phi.right, neg)
    if isinstance(phi, And):
        return Or(left, right) if neg else And(left, right)
    if isinstance(phi, Or):
        return And(left, right) if neg else Or(left, right)
    if isinstance(phi, Until):
        return Release(left, right) if neg else Until(left, right)
    if isinstance(phi, Release):
        return Until(left, right) if neg else Release(left, right)
    raise TypeError(f"not a formula: {phi!r}")


def is_nnf(phi: Formula) -> bool:
    if isinstance(phi, Imply):
        return False
    if isinstance(phi, Not):
        return isinstance(phi.child, Atom)
    return all(is_nnf(c) for c in children(phi))


# ------------------------------------------------------------- co-safety


class CosafetyReason(enum.Enum):
    AlwaysOperator = "AlwaysOperator"
    NegationOnCompound = "NegationOnCompound"


@dataclass(frozen=True)
class CosafetyVerdict:
    is_cosafe: bool
    offending_subformula: tuple[int, ...] | None = None
    reason: CosafetyReason | None = None
    nnf: Formula | None = None

    def __bool__(self):
        return self.is_cosafe

    def describe(self) -> str:
        if self.is_cosafe:
            return "formula is syntactically co-safe"
        bad = subformula(self.nnf, self.offending_subformula)
        if self.reason is CosafetyReason.AlwaysOperator:
            what = "uses the always operator G"
        else:
            what = "negates an until, which yields a release operator"
        return f"not co-safe: subformula {print_prefix(bad)!r} {what}"


def check_cosafe(phi: Formula) -> CosafetyVerdict:
    """Co-safe iff the NNF has no G, no R, and negation only on atoms."""
    nnf = to_nnf(phi)
    for path, f in _walk(nnf):
        if isinstance(f, Always):
            return CosafetyVerdict(False, path, CosafetyReason.AlwaysOperator, nnf)
        if isinstance(f, Release) or (isinstance(f, Not) and not isinstance(f.child, Atom)):
            return CosafetyVerdict(False, path, CosafetyReason.NegationOnCompound, nnf)
    return CosafetyVerdict(True, nnf=nnf)


def _walk(phi: Formula, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Formula]]:
    yield path, phi
    for i, c in enumerate(children(phi)):
        yield from _walk(c, path + (i,))


# -------------------------------------------------------- trace semantics
#
# A finite prefix satisfies a formula when it holds with every obligation that
# reaches past the end of the prefix counted as unmet. A word satisfies the
# formula when one of its prefixes does. Evaluation is vectorized over a batch
# of equal-length words: row = word, column = position, column n = end.


def _sat_table(phi: Formula, member, m: int, n: int, pos: bool, memo) -> np.ndarray:
    key = (phi, pos)
    if key in memo:
        return memo[key]
    out = np.zeros((m, n + 1), dtype=bool)
    if isinstance(phi, _Const):
        out[:] = phi.value == pos
    elif isinstance(phi, Atom):
        col = member(phi.name)
        out[:, :n] = col if pos else ~col
    elif isinstance(phi, Not):
        out = _sat_table(phi.child, member, m, n, not pos, memo)
    elif isinstance(phi, Next):
        out[:, :n] = _sat_table(phi.child, member, m, n, pos, memo)[:, 1:]
    elif isinstance(phi, (And, Or, Imply)):
        if isinstance(phi, Imply):
            a = _sat_table(phi.left, member, m, n, not pos, memo)
            conj = not pos
        else:
            a = _sat_table(phi.left, member, m, n, pos, memo)
            conj = isinstance(phi, And) == pos
        b = _sat_table(phi.right, member, m, n, pos, memo)
        out = (a & b) if conj else (a | b)
    elif isinstance(phi, Eventually) and pos or isinstance(phi, Always) and not pos:
        c = _sat_table(phi.child, member, m, n, pos, memo)
        for i in range(n - 1, -1, -1):
            out[:, i] = c[:, i] | out[:, i + 1]
    elif isinstance(phi, Until) and pos or isinstance(phi, Release) and not pos:
        # !(a R b) == !a U !b
        a = _sat_table(phi.left, member, m, n, pos, memo)
        b = _sat_table(phi.right, member, m, n, pos, memo)
        for i in range(n - 1, -1, -1):
            out[:, i] = b[:, i] | (a[:, i] & out[:, i + 1])
    else:
        raise NotCosafe(f"{type(phi).__name__} in {'positive' if pos else 'negative'} position")
    memo[key] = out
    return out


def _prefix_sat(phi: Formula, words: Sequence[Sequence[frozenset]], n: int) -> np.ndarray:
    """Satisfaction of ``phi`` by each word, all of length exactly ``n``."""
    m = len(words)

    def member(name):
        return np.array([[name in w[i] for i in range(n)] for w in words], dtype=bool).reshape(m, n)

    return _sat_table(phi, member, m, n, True, {})[:, 0]


def eval_words(phi: Formula, words: Sequence[Sequence[Iterable[str]]]) -> np.ndarray:
    """:func:`eval_trace` over a batch of words."""
    words = [[frozenset(x) for x in w] for w in words]
    result = np.zeros(len(words), dtype=bool)
    longest = max((len(w) for w in words), default=0)
    for k in range(longest + 1):
        rows = [i for i, w in enumerate(words) if len(w) >= k]
        result[rows] |= _prefix_sat(phi, [words[i][:k] for i in rows], k)
    return result


def eval_trace(phi: Formula, word: Sequence[Iterable[str]]) -> bool:
    """Does some prefix of ``word`` satisfy the co-safe formula ``phi``?

    Works on the input tree directly (no NNF), tracking polarity. Raises
    :class:`NotCosafe` on G in positive or F/U in negative position.
    """
    return bool(eval_words(phi, [word])[0])


def letters(atoms: Sequence[str]) -> list[frozenset[str]]:
    """All labels over ``atoms``; label ``c`` holds ``atoms[j]`` iff bit j of c is set."""
    return [frozenset(a for j, a in enumerate(atoms) if c >> j & 1) for c in range(1 << len(atoms))]


def eval_all_words(phi: Formula, atoms: Sequence[str], max_len: int) -> list[np.ndarray]:
    """:func:`eval_trace` on every word over ``atoms`` up to ``max_len``.

    Entry ``n`` is indexed by the base-``2**len(atoms)`` number whose digits
    (most significant first) are the letter codes of :func:`letters`.
    """
    base = 1 << len(atoms)
    sat = []
    for n in range(max_len + 1):
        codes = np.indices((base,) * n).reshape(n, -1).T if n else np.zeros((1, 0), dtype=int)
        bits = {a: (codes >> j & 1).astype(bool) for j, a in enumerate(atoms)}
        empty = np.zeros((len(codes), n), dtype=bool)
        table = _sat_table(phi, lambda name: bits.get(name, empty), len(codes), n, True, {})
        sat.append(table[:, 0])
    out = []
    for n in range(max_len + 1):
        acc = sat[n].copy()
        idx = np.arange(base ** n)
        for k in range(n):
            acc |= sat[k][idx // base ** (n - k)]
        out.append(acc)
    return out
