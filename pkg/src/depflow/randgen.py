"""Random loop-free programs and policies for the differential suites.

Generators are deterministic for a given `random.Random` seed.  They stay
on integer variables (heap behavior is covered by fixtures; symbolic and
concrete runs represent fresh objects differently).
"""

from __future__ import annotations

import random
from typing import List, Sequence, Tuple

from . import policy as PO
from . import syntax as S

DEFAULT_VARS = ("a", "b", "c", "d")
LITERALS = (-2, -1, 0, 1, 2, 3)


def gen_term(rng: random.Random, variables: Sequence[str], depth: int) -> S.Term:
    if depth <= 0 or rng.random() < 0.35:
        if rng.random() < 0.5:
            return S.ProgVar(rng.choice(list(variables)))
        return S.IntLit(rng.choice(LITERALS))
    op = rng.choice(("+", "-", "*", "+", "-", "*", "/", "%"))
    return S.ArithOp(op, gen_term(rng, variables, depth - 1),
                     gen_term(rng, variables, depth - 1))


def gen_cond(rng: random.Random, variables: Sequence[str], depth: int) -> S.Formula:
    roll = rng.random()
    if depth <= 0 or roll < 0.55:
        a = gen_term(rng, variables, max(depth - 1, 0))
        b = gen_term(rng, variables, max(depth - 1, 0))
        op = rng.choice(("==", "<", "<=", ">", ">=", "!="))
        if op == "==":
            return S.Eq(a, b)
        if op == "!=":
            return S.Not(S.Eq(a, b))
        return S.PredApp(op, (a, b))
    if roll < 0.7:
        return S.Not(gen_cond(rng, variables, depth - 1))
    ctor = S.And if rng.random() < 0.5 else S.Or
    return ctor(gen_cond(rng, variables, depth - 1), gen_cond(rng, variables, depth - 1))


def gen_stmt(rng: random.Random, variables: Sequence[str], depth: int) -> S.Stmt:
    if depth <= 1 or rng.random() < 0.7:
        return S.Assign(rng.choice(list(variables)), gen_term(rng, variables, 2))
    return S.If(gen_cond(rng, variables, 2),
                gen_block(rng, variables, depth - 1),
                gen_block(rng, variables, depth - 1))


def gen_block(rng: random.Random, variables: Sequence[str], depth: int) -> S.Program:
    return S.seq(gen_stmt(rng, variables, depth) for _ in range(rng.randint(1, 3)))


def gen_program(rng: random.Random, variables: Sequence[str] = DEFAULT_VARS,
                depth: int = 3, size: int = 4) -> S.Program:
    return S.seq(gen_stmt(rng, variables, depth) for _ in range(rng.randint(1, size)))


def gen_policy(rng: random.Random, variables: Sequence[str] = DEFAULT_VARS,
               max_pairs: int = 2) -> PO.SecurityPolicy:
    """A random two-level policy, possibly with declassification pairs."""
    levels = frozenset({"low", "high"})
    lattice = PO.SecurityLattice(levels, PO.close_order(levels, [("low", "high")]))
    lvl = {v: rng.choice(("low", "high")) for v in variables}
    de = {}
    pairs: List[PO.DeclassPair] = []
    for i in range(rng.randint(0, max_pairs)):
        when = S.TrueF() if rng.random() < 0.5 else gen_cond(rng, variables, 1)
        what = gen_term(rng, variables, 2)
        pairs.append(PO.DeclassPair(when, what, "low", i))
    if pairs:
        de["low"] = pairs
    return PO.SecurityPolicy(lattice, lvl, de, [], source="<generated>")
