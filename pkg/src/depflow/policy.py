"""Security policies: lattices, level assignments, declassification pairs.

Policy files are line-oriented:

    levels low, high;
    order low <= high;              // the `order` keyword is optional
    lvl(cipher) = high;
    declassify to low when <formula> what <term or formula>;
    goal select(heap, objA, f) allowed {x, y};

The declassification environment is ordered per level (file order), because
the nested-conditional encoding of `deps` makes match order observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from . import parser as P
from . import syntax as S
from .syntax import LangError


class PolicyError(LangError):
    pass


@dataclass(frozen=True)
class SecurityLattice:
    """A finite set of levels with a partial order, closed at load time."""

    levels: frozenset
    order: frozenset  # reflexive-transitive pairs (lower, upper)

    def leq(self, a: str, b: str) -> bool:
        return (a, b) in self.order

    def topo_order(self) -> List[str]:
        # deterministic: by number of levels below, then by name
        return sorted(self.levels,
                      key=lambda l: (sum(1 for m in self.levels if self.leq(m, l)), l))


@dataclass(frozen=True)
class DeclassPair:
    """Release `what` to `level` whenever `when` holds in the initial state."""

    when: S.Formula
    what: Union[S.Term, S.Formula]
    level: str
    index: int = 0

    def label(self) -> str:
        return f"pair {self.index + 1} @ {self.level}"


@dataclass(frozen=True)
class TargetGoal:
    """An explicit goal `deps(<term>) <= allowed`, used for heap locations."""

    term: S.Term
    allowed: frozenset
    label: str


@dataclass
class SecurityPolicy:
    lattice: SecurityLattice
    lvl: Dict[str, str]
    de: Dict[str, List[DeclassPair]]
    goals: List[TargetGoal] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    source: str = ""

    def level_of(self, x: str) -> str:
        if x not in self.lvl:
            raise PolicyError(f"variable {x!r} has no security level")
        return self.lvl[x]


def close_order(levels, edges) -> frozenset:
    """Reflexive-transitive closure; rejects cycles between distinct levels."""
    reach = {l: {l} for l in levels}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            for src, dsts in reach.items():
                if a in dsts and b not in dsts:
                    dsts.add(b)
                    changed = True
    for a in levels:
        for b in levels:
            if a != b and b in reach[a] and a in reach[b]:
                raise PolicyError(f"order is not antisymmetric: {a} and {b} are equivalent")
    return frozenset((a, b) for a in levels for b in reach[a])


def load_policy(text: str) -> SecurityPolicy:
    """Parse and validate a policy file."""
    toks = P._tokenize(text)
    pos = 0

    def peek():
        return toks[pos]

    def advance():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def expect(value):
        t = advance()
        if t.value != value:
            raise PolicyError(f"expected {value!r}, found {t.value!r} (line {t.line})")
        return t

    def ident():
        t = advance()
        if t.kind != "ident":
            raise PolicyError(f"expected a name, found {t.value!r} (line {t.line})")
        return t.value

    def until_keyword(stop):
        # collect raw source until one of the stop words or ';'
        start = pos
        depth = 0
        while True:
            tv = peek().value
            if peek().kind == "eof":
                break
            if depth == 0 and (tv == ";" or tv in stop):
                break
            if tv in ("(", "{", "["):
                depth += 1
            if tv in (")", "}", "]"):
                depth -= 1
            advance()
        return " ".join(_tok_text(t) for t in toks[start:pos])

    def _tok_text(t):
        return t.value

    levels: List[str] = []
    edges: List[Tuple[str, str]] = []
    lvl: Dict[str, str] = {}
    pairs: List[Tuple[str, S.Formula, Union[S.Term, S.Formula]]] = []
    goals: List[TargetGoal] = []

    while peek().kind != "eof":
        t = peek()
        if t.value == "levels":
            advance()
            while True:
                levels.append(ident())
                if peek().value != ",":
                    break
                advance()
            expect(";")
        elif t.value == "order" or (t.kind == "ident" and toks[pos + 1].value == "<="):
            if t.value == "order":
                advance()
            a = ident()
            expect("<=")
            b = ident()
            expect(";")
            edges.append((a, b))
        elif t.value == "lvl":
            advance()
            expect("(")
            x = ident()
            expect(")")
            expect("=")
            l = ident()
            expect(";")
            lvl[x] = l
        elif t.value == "declassify":
            advance()
            expect("to")
            level = ident()
            expect("when")
            when_src = until_keyword(("what",))
            expect("what")
            what_src = until_keyword(())
            expect(";")
            when = P.parse_formula(when_src)
            what = _parse_expr(what_src)
            for node in (when, what):
                S.validate_policy_expr(node)
            pairs.append((level, when, what))
        elif t.value == "goal":
            advance()
            term_src = until_keyword(("allowed",))
            expect("allowed")
            term = P.parse_term(term_src)
            S.validate_policy_expr(term)
            allowed_src = until_keyword(())
            expect(";")
            allowed = _parse_varset(allowed_src)
            goals.append(TargetGoal(term, allowed, f"goal {len(goals) + 1}"))
        else:
            raise PolicyError(f"unexpected {t.value!r} in policy (line {t.line})")

    if not levels:
        raise PolicyError("policy declares no levels")
    level_set = frozenset(levels)
    for a, b in edges:
        for l in (a, b):
            if l not in level_set:
                raise PolicyError(f"undeclared level {l!r} in order")
    for x, l in lvl.items():
        if l not in level_set:
            raise PolicyError(f"undeclared level {l!r} for variable {x!r}")
    if S.HEAP_VAR in lvl:
        raise PolicyError("the heap carries no level; use goal declarations instead")

    lattice = SecurityLattice(level_set, close_order(level_set, edges))
    de: Dict[str, List[DeclassPair]] = {}
    for level, when, what in pairs:
        if level not in level_set:
            raise PolicyError(f"undeclared level {level!r} in declassify")
        de.setdefault(level, []).append(DeclassPair(when, what, level, len(de.get(level, []))))

    pol = SecurityPolicy(lattice, lvl, de, goals, source=text)
    _warn_overlaps(pol)
    return pol


def _parse_expr(src: str) -> Union[S.Term, S.Formula]:
    return P.parse_expr(src)


def _parse_varset(src: str) -> frozenset:
    src = src.strip()
    if not (src.startswith("{") and src.endswith("}")):
        raise PolicyError("allowed set must be written {a, b, ...}")
    inner = src[1:-1].strip()
    if not inner:
        return frozenset()
    return frozenset(x.strip() for x in inner.split(","))


def _warn_overlaps(pol: SecurityPolicy) -> None:
    from . import ec as E

    seen = []
    for level in pol.lattice.topo_order():
        for pair in pol.de.get(level, []):
            key = E.normalize(E.wrap(pair.what))
            for other_level, other_key in seen:
                if other_key == key:
                    pol.warnings.append(
                        f"overlapping declassification terms at {other_level} and {level}; "
                        "file order decides which pair matches")
            seen.append((level, key))


# ---------------------------------------------------------------------------
# Derived queries


def lvl_set(x: str, pol: SecurityPolicy) -> frozenset:
    """LVL(x): the variables an observer of lvl(x) may see."""
    lx = pol.level_of(x)
    return frozenset(y for y, ly in pol.lvl.items() if pol.lattice.leq(ly, lx))


def vars_at_or_below(level: str, pol: SecurityPolicy) -> frozenset:
    return frozenset(y for y, ly in pol.lvl.items() if pol.lattice.leq(ly, level))


def dp_for_level(level: str, pol: SecurityPolicy) -> List[DeclassPair]:
    """All pairs declassifying to `level` or below, in lattice-then-file order."""
    if level not in pol.lattice.levels:
        raise PolicyError(f"unknown level {level!r}")
    out: List[DeclassPair] = []
    for l in pol.lattice.topo_order():
        if pol.lattice.leq(l, level):
            out.extend(pol.de.get(l, []))
    return out


def validate_for_program(pol: SecurityPolicy, program: S.Program) -> None:
    """Every program variable (except the heap) must carry a level."""
    for name in sorted(S.prog_var_names(program)):
        if name == S.HEAP_VAR:
            continue
        if name not in pol.lvl:
            raise PolicyError(f"program variable {name!r} is not mapped by the policy")
