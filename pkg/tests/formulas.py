"""Random formula generation shared by the property tests."""
import itertools
import random

from sgplan.ltl import (FALSE, TRUE, Always, And, Atom, Eventually, Imply, Next, Not, Or,
                        Until, check_cosafe)

ATOMS = ("a", "b", "c")


def random_formula(rng: random.Random, depth: int, atoms=ATOMS):
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.06:
            return TRUE
        if r < 0.1:
            return FALSE
        return Atom(rng.choice(atoms))
    op = rng.choice([Not, Next, Eventually, Always, And, Or, Imply, Until, And, Eventually, Until])
    if op in (Not, Next, Eventually, Always):
        return op(random_formula(rng, depth - 1, atoms))
    return op(random_formula(rng, depth - 1, atoms), random_formula(rng, depth - 1, atoms))


def random_cosafe(rng: random.Random, depth: int = 4, atoms=ATOMS):
    while True:
        phi = random_formula(rng, depth, atoms)
        if check_cosafe(phi).is_cosafe:
            return phi


def all_words(atoms, max_len):
    letters = [frozenset(c) for r in range(len(atoms) + 1) for c in itertools.combinations(atoms, r)]
    for n in range(max_len + 1):
        yield from itertools.product(letters, repeat=n)
