"""Equivalence-class terms: the Herbrand mirror of the term language.

An ECTerm denotes an equivalence class of computations; it is the value of
the dependency ghost variables.  `wrap` translates a concrete term or
formula into its Herbrand counterpart, `normalize` rewrites an ECTerm into
a canonical representative (the implementation of the choice operator),
`pvars` collects the program variables a class mentions, and `deps` is the
declassification-aware dependency-set function with homomorphic fallback.

Normalization canonicalizes +, - and * as a sum of products over atomic
factors (variables, conditionals, divisions, heap reads, loop summaries).
This subsumes additive identity, t - t ~> 0, multiplication by 0/1 and
constant folding, and it decides commutative/associative/distributive
rearrangements, which both the `<x+y>` vs `<y+x>` identification and
equality-style loop invariants need.  All rewrites preserve the value of
the class representative in every state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Tuple

from . import syntax as S
from .syntax import Sort, UnsupportedConstruct


# ---------------------------------------------------------------------------
# Node types


class ECTerm:
    __match_args__ = ()


@dataclass(frozen=True)
class HVar(ECTerm):
    """`<x>`: before update application a ghost reference, after it the
    class of program variable x in the initial state."""

    name: str


@dataclass(frozen=True)
class FieldTag:
    name: str


@dataclass(frozen=True)
class AllocTag:
    """Identity of a deterministic allocation (the counter at `new`)."""

    key: object


@dataclass(frozen=True)
class HConst(ECTerm):
    """`<17>`, `<true>`, a field name, or an allocation token."""

    value: object


@dataclass(frozen=True)
class HApp(ECTerm):
    op: str
    args: Tuple[ECTerm, ...]


@dataclass(frozen=True)
class HCond(ECTerm):
    cond: ECTerm
    then: ECTerm
    other: ECTerm


@dataclass(frozen=True)
class HOpaque(ECTerm):
    """A havocked ghost: an opaque class constrained only by context bounds."""

    name: str


@dataclass(frozen=True)
class HLoop(ECTerm):
    """Summary of a loop's effect on `var`: depends on the captured entry
    classes of every variable occurring in the loop condition or body."""

    wid: str
    var: str
    captures: Tuple[Tuple[str, ECTerm], ...]


EC_TRUE = HConst(True)
EC_FALSE = HConst(False)
EC_ZERO = HConst(0)

BOOL_OPS = ("!", "&&", "||", "->")
CMP_OPS = ("==",) + S.CMP_OPS


def loop_summary(wid: str, var: str, captured) -> HLoop:
    """Build a loop summary; bare names capture their own identity class."""
    caps = []
    for c in captured:
        if isinstance(c, str):
            caps.append((c, HVar(c)))
        else:
            caps.append((c[0], c[1]))
    return HLoop(wid, var, tuple(caps))


# ---------------------------------------------------------------------------
# wrap (Herbrand translation)


def wrap(node, dep_env: Optional[Mapping[str, ECTerm]] = None) -> ECTerm:
    """Homomorphic Herbrand translation of a term or formula.

    Program variables are replaced by their entry in `dep_env` (their
    current ghost), defaulting to their own identity class `<x>`.
    """
    env = dep_env or {}

    def go(n):
        if isinstance(n, S.ProgVar):
            return env.get(n.name, HVar(n.name))
        if isinstance(n, S.IntLit):
            return HConst(n.value)
        if isinstance(n, S.BoolLit):
            return HConst(n.value)
        if isinstance(n, S.FieldConst):
            return HConst(FieldTag(n.name))
        if isinstance(n, S.ArithOp):
            return HApp(n.op, (go(n.left), go(n.right)))
        if isinstance(n, S.CondTerm):
            return HCond(go(n.cond), go(n.then), go(n.other))
        if isinstance(n, S.Store):
            return HApp("store", (go(n.heap), go(n.obj), go(n.fieldref), go(n.value)))
        if isinstance(n, S.Select):
            return HApp("select", (go(n.heap), go(n.obj), go(n.fieldref)))
        if isinstance(n, S.FnApp):
            return HApp(n.name, tuple(go(a) for a in n.args))
        if isinstance(n, S.TrueF):
            return EC_TRUE
        if isinstance(n, S.FalseF):
            return EC_FALSE
        if isinstance(n, S.PredApp):
            return HApp(n.op, tuple(go(a) for a in n.args))
        if isinstance(n, S.Eq):
            return HApp("==", (go(n.left), go(n.right)))
        if isinstance(n, S.Not):
            return HApp("!", (go(n.sub),))
        if isinstance(n, S.And):
            return HApp("&&", (go(n.left), go(n.right)))
        if isinstance(n, S.Or):
            return HApp("||", (go(n.left), go(n.right)))
        if isinstance(n, S.Implies):
            return HApp("->", (go(n.left), go(n.right)))
        if isinstance(n, S.CondFormula):
            return HCond(go(n.cond), go(n.then), go(n.other))
        if isinstance(n, S.BoolTerm):
            return go(n.term)
        raise UnsupportedConstruct(f"cannot wrap {type(n).__name__}")

    return go(node)


def subst_ghosts(e: ECTerm, mapping: Mapping[str, ECTerm]) -> ECTerm:
    """Substitute HVar ghost references simultaneously by their payloads."""
    if isinstance(e, HVar):
        return mapping.get(e.name, e)
    if isinstance(e, (HConst, HOpaque)):
        return e
    if isinstance(e, HApp):
        return HApp(e.op, tuple(subst_ghosts(a, mapping) for a in e.args))
    if isinstance(e, HCond):
        return HCond(subst_ghosts(e.cond, mapping),
                     subst_ghosts(e.then, mapping),
                     subst_ghosts(e.other, mapping))
    if isinstance(e, HLoop):
        return HLoop(e.wid, e.var,
                     tuple((n, subst_ghosts(c, mapping)) for n, c in e.captures))
    raise TypeError(f"not an ECTerm: {e!r}")


# ---------------------------------------------------------------------------
# pvars


def pvars(e: ECTerm) -> frozenset:
    """Program variables occurring in the class representative."""
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, HVar):
            out.add(n.name)
        elif isinstance(n, HApp):
            stack.extend(n.args)
        elif isinstance(n, HCond):
            stack.extend((n.cond, n.then, n.other))
        elif isinstance(n, HLoop):
            stack.extend(c for _, c in n.captures)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Canonical ordering


def ec_sort_key(e: ECTerm):
    if isinstance(e, HConst):
        v = e.value
        if isinstance(v, bool):
            return (0, "b", str(v))
        if isinstance(v, int):
            return (0, "i", f"{v:+021d}")
        if isinstance(v, FieldTag):
            return (0, "f", v.name)
        return (0, "o", str(v))
    if isinstance(e, HVar):
        return (1, "v", e.name)
    if isinstance(e, HOpaque):
        return (2, "q", e.name)
    if isinstance(e, HApp):
        return (3, e.op, str(len(e.args))) + tuple(ec_sort_key(a) for a in e.args)
    if isinstance(e, HCond):
        return (4, "c", "") + tuple(ec_sort_key(x) for x in (e.cond, e.then, e.other))
    if isinstance(e, HLoop):
        return (5, e.wid, e.var) + tuple(ec_sort_key(c) for _, c in e.captures)
    raise TypeError(f"not an ECTerm: {e!r}")


# ---------------------------------------------------------------------------
# Totalized integer division (shared with the interpreter)


def int_div(a: int, b: int) -> int:
    """Truncating division, totalized with a / 0 = 0."""
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def int_mod(a: int, b: int) -> int:
    """Remainder matching int_div (sign of the dividend), a % 0 = 0."""
    if b == 0:
        return 0
    return a - b * int_div(a, b)


# ---------------------------------------------------------------------------
# Normalization


def _is_int_const(e: ECTerm) -> bool:
    return isinstance(e, HConst) and isinstance(e.value, int) and not isinstance(e.value, bool)


def _is_bool_const(e: ECTerm) -> bool:
    return isinstance(e, HConst) and isinstance(e.value, bool)


def _poly(e: ECTerm) -> dict:
    """Decompose into {monomial: coefficient}; monomial = sorted atom tuple."""
    if _is_int_const(e):
        return {(): e.value} if e.value else {}
    if isinstance(e, HApp) and e.op in ("+", "-"):
        left = _poly(e.args[0])
        right = _poly(e.args[1])
        sign = 1 if e.op == "+" else -1
        for m, c in right.items():
            left[m] = left.get(m, 0) + sign * c
            if left[m] == 0:
                del left[m]
        return left
    if isinstance(e, HApp) and e.op == "*":
        left = _poly(e.args[0])
        right = _poly(e.args[1])
        out: dict = {}
        for m1, c1 in left.items():
            for m2, c2 in right.items():
                m = tuple(sorted(m1 + m2, key=ec_sort_key))
                out[m] = out.get(m, 0) + c1 * c2
                if out[m] == 0:
                    del out[m]
        return out
    return {(e,): 1}


def _mono_expr(coeff: int, mono: Tuple[ECTerm, ...]) -> ECTerm:
    if not mono:
        return HConst(coeff)
    expr = mono[0]
    for a in mono[1:]:
        expr = HApp("*", (expr, a))
    if abs(coeff) != 1:
        expr = HApp("*", (HConst(abs(coeff)), expr))
    return expr


def _rebuild(poly: dict) -> ECTerm:
    if not poly:
        return EC_ZERO
    # variables first in canonical order, the constant term last
    items = sorted(poly.items(),
                   key=lambda mc: (1,) if not mc[0] else (0, tuple(ec_sort_key(a) for a in mc[0])))
    expr: Optional[ECTerm] = None
    for mono, coeff in items:
        if expr is None:
            if not mono:
                expr = HConst(coeff)
            elif coeff > 0:
                expr = _mono_expr(coeff, mono)
            else:
                expr = HApp("-", (EC_ZERO, _mono_expr(-coeff, mono)))
        else:
            if not mono:
                op = "+" if coeff > 0 else "-"
                expr = HApp(op, (expr, HConst(abs(coeff))))
            else:
                op = "+" if coeff > 0 else "-"
                expr = HApp(op, (expr, _mono_expr(abs(coeff), mono)))
    return expr


def _norm_select(h: ECTerm, o: ECTerm, f: ECTerm) -> ECTerm:
    # walk past stores at decidably different locations
    while isinstance(h, HApp) and h.op == "store":
        h0, o2, f2, v = h.args
        if o2 == o and f2 == f:
            return v
        fields_differ = (isinstance(f, HConst) and isinstance(f.value, FieldTag)
                         and isinstance(f2, HConst) and isinstance(f2.value, FieldTag)
                         and f.value != f2.value)
        objs_differ = (isinstance(o, HConst) and isinstance(o.value, AllocTag)
                       and isinstance(o2, HConst) and isinstance(o2.value, AllocTag)
                       and o.value != o2.value)
        if fields_differ or objs_differ:
            h = h0
            continue
        break
    return HApp("select", (h, o, f))


def _norm_app(op: str, args: Tuple[ECTerm, ...]) -> ECTerm:
    if op in ("+", "-", "*"):
        return _rebuild(_poly(HApp(op, args)))
    if op in ("/", "%"):
        a, b = args
        if _is_int_const(a) and _is_int_const(b):
            return HConst(int_div(a.value, b.value) if op == "/" else int_mod(a.value, b.value))
        return HApp(op, args)
    if op == "==":
        a, b = args
        if a == b:
            return EC_TRUE
        if isinstance(a, HConst) and isinstance(b, HConst):
            return HConst(bool(a.value == b.value))
        return HApp(op, args)
    if op in S.CMP_OPS:
        a, b = args
        if _is_int_const(a) and _is_int_const(b):
            table = {"<": a.value < b.value, "<=": a.value <= b.value,
                     ">": a.value > b.value, ">=": a.value >= b.value}
            return HConst(table[op])
        return HApp(op, args)
    if op == "!":
        (a,) = args
        if _is_bool_const(a):
            return HConst(not a.value)
        if isinstance(a, HApp) and a.op == "!":
            return a.args[0]
        return HApp(op, args)
    if op == "&&":
        a, b = args
        if a == EC_TRUE:
            return b
        if b == EC_TRUE:
            return a
        if EC_FALSE in (a, b):
            return EC_FALSE
        return HApp(op, args)
    if op == "||":
        a, b = args
        if a == EC_FALSE:
            return b
        if b == EC_FALSE:
            return a
        if EC_TRUE in (a, b):
            return EC_TRUE
        return HApp(op, args)
    if op == "->":
        a, b = args
        if _is_bool_const(a) and _is_bool_const(b):
            return HConst((not a.value) or b.value)
        return HApp(op, args)
    if op == "select":
        return _norm_select(*args)
    return HApp(op, args)


@lru_cache(maxsize=None)
def normalize(e: ECTerm) -> ECTerm:
    """Canonical representative of the class; a fixpoint of the rewrite set."""
    if isinstance(e, (HVar, HOpaque)):
        return e
    if isinstance(e, HConst):
        return e
    if isinstance(e, HLoop):
        return HLoop(e.wid, e.var, tuple((n, normalize(c)) for n, c in e.captures))
    if isinstance(e, HApp):
        return _norm_app(e.op, tuple(normalize(a) for a in e.args))
    if isinstance(e, HCond):
        c = normalize(e.cond)
        t = normalize(e.then)
        o = normalize(e.other)
        while True:
            if c == EC_TRUE:
                return t
            if c == EC_FALSE:
                return o
            if t == o:
                return t
            # hoist: if(c1) then (if(c2) a else b) else b  ~>  if(c1 && c2) a else b
            if isinstance(t, HCond) and t.other == o:
                c = _norm_app("&&", (c, t.cond))
                t = t.then
                continue
            return HCond(c, t, o)
    raise TypeError(f"not an ECTerm: {e!r}")


def ec_equal(a: ECTerm, b: ECTerm) -> bool:
    """Sound, incomplete class equality: equal canonical representatives."""
    return normalize(a) == normalize(b)


# ---------------------------------------------------------------------------
# deps and its homomorphic fallback h


class Tri(Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class DepsPair:
    """One declassification pair, pre-wrapped for goal discharge."""

    cond: object            # syntax.Formula, the `when`
    cond_ec: ECTerm         # normalized wrap of the condition
    what_ec: ECTerm         # normalized wrap of the released term
    grant: frozenset        # variables at or below the pair's target level
    label: str = ""


def deps(e: ECTerm, pairs, ctx, trace: Optional[list] = None) -> frozenset:
    """Dependency set of a class under the nested-conditional pair encoding.

    The first pair whose condition is entailed by the path context and
    whose released class equals `e` grants its variable set; otherwise the
    dependencies are collected homomorphically.  `ctx` must provide
    `entails(ec) -> Tri` and `opaque_bound(name) -> frozenset`.
    """
    e = normalize(e)
    for pair in pairs:
        if ctx.entails(pair.cond_ec) is Tri.YES and e == pair.what_ec:
            if trace is not None:
                trace.append(("declass-match", pair.label))
            return pair.grant
    return _h(e, pairs, ctx, trace)


def _h(e: ECTerm, pairs, ctx, trace) -> frozenset:
    if isinstance(e, HVar):
        return frozenset((e.name,))
    if isinstance(e, HConst):
        return frozenset()
    if isinstance(e, HOpaque):
        return ctx.opaque_bound(e.name)
    if isinstance(e, HApp):
        out = frozenset()
        for a in e.args:
            out |= deps(a, pairs, ctx, trace)
        return out
    if isinstance(e, HCond):
        # reached without a split: conservative union over all three parts
        return (deps(e.cond, pairs, ctx, trace)
                | deps(e.then, pairs, ctx, trace)
                | deps(e.other, pairs, ctx, trace))
    if isinstance(e, HLoop):
        out = frozenset()
        for _, c in e.captures:
            out |= deps(c, pairs, ctx, trace)
        return out
    raise TypeError(f"not an ECTerm: {e!r}")


# ---------------------------------------------------------------------------
# De-Herbrandization (back to ordinary terms/formulas, for evaluation)


def ec_to_term(e: ECTerm) -> S.Term:
    if isinstance(e, HVar):
        return S.ProgVar(e.name)
    if isinstance(e, HConst):
        v = e.value
        if isinstance(v, bool):
            return S.BoolLit(v)
        if isinstance(v, int):
            return S.IntLit(v)
        if isinstance(v, FieldTag):
            return S.FieldConst(v.name)
        if isinstance(v, AllocTag):
            return S.FnApp(f"alloc{S.FRESH_MARK}{v.key}", (), Sort.OBJECT)
        raise TypeError(f"unknown constant: {v!r}")
    if isinstance(e, HApp):
        if e.op in S.ARITH_OPS:
            return S.ArithOp(e.op, ec_to_term(e.args[0]), ec_to_term(e.args[1]))
        if e.op == "select":
            return S.Select(*(ec_to_term(a) for a in e.args))
        if e.op == "store":
            return S.Store(*(ec_to_term(a) for a in e.args))
        if e.op in CMP_OPS or e.op in BOOL_OPS:
            # a truth value in term position
            return S.CondTerm(ec_to_formula(e), S.BoolLit(True), S.BoolLit(False))
        return S.FnApp(e.op, tuple(ec_to_term(a) for a in e.args))
    if isinstance(e, HCond):
        return S.CondTerm(ec_to_formula(e.cond), ec_to_term(e.then), ec_to_term(e.other))
    raise UnsupportedConstruct(f"{type(e).__name__} has no term representative")


def ec_to_formula(e: ECTerm) -> S.Formula:
    if isinstance(e, HConst) and isinstance(e.value, bool):
        return S.TrueF() if e.value else S.FalseF()
    if isinstance(e, HApp):
        if e.op == "==":
            return S.Eq(ec_to_term(e.args[0]), ec_to_term(e.args[1]))
        if e.op in S.CMP_OPS:
            return S.PredApp(e.op, tuple(ec_to_term(a) for a in e.args))
        if e.op == "!":
            return S.Not(ec_to_formula(e.args[0]))
        if e.op == "&&":
            return S.And(ec_to_formula(e.args[0]), ec_to_formula(e.args[1]))
        if e.op == "||":
            return S.Or(ec_to_formula(e.args[0]), ec_to_formula(e.args[1]))
        if e.op == "->":
            return S.Implies(ec_to_formula(e.args[0]), ec_to_formula(e.args[1]))
    if isinstance(e, HCond):
        return S.CondFormula(ec_to_formula(e.cond), ec_to_formula(e.then),
                             ec_to_formula(e.other))
    return S.BoolTerm(ec_to_term(e))
