"""Abstract syntax for the analyzed imperative language and its logic.

Programs, terms, formulas and updates are immutable trees.  Terms and
formulas that occur inside programs are restricted: no logical variables,
no quantifiers, no updates, no modalities and no equivalence-class
constructs.  Well-sortedness is established once, at parse time, by
`infer_signature`; nothing downstream re-checks sorts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Tuple, Union


class Sort(Enum):
    TOP = "Top"
    INT = "Int"
    BOOL = "Bool"
    OBJECT = "Object"
    FIELD = "Field"
    HEAP = "Heap"
    HEAPVALUE = "HeapValue"
    EC = "EC"


#: the global heap program variable; written/read implicitly by field statements
HEAP_VAR = "heap"

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("<", "<=", ">", ">=")

#: character reserved for machine-generated fresh names, excluded from the surface grammar
FRESH_MARK = "#"


class LangError(Exception):
    """Base class for syntax-level errors."""


class ParseError(LangError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})" if line else message)
        self.line = line
        self.col = col


class SortError(LangError):
    pass


class UnsupportedConstruct(LangError):
    pass


# ---------------------------------------------------------------------------
# Terms


class Term:
    __match_args__ = ()


@dataclass(frozen=True)
class ProgVar(Term):
    name: str


@dataclass(frozen=True)
class LogVar(Term):
    name: str


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool


@dataclass(frozen=True)
class FieldConst(Term):
    """A field name; distinct names denote distinct fields."""

    name: str


@dataclass(frozen=True)
class FnApp(Term):
    """Uninterpreted function application.

    Nullary applications act as symbolic constants; the symbolic executor
    uses them for fresh objects and havocked values.
    """

    name: str
    args: Tuple[Term, ...] = ()
    sort: Optional[Sort] = None


@dataclass(frozen=True)
class ArithOp(Term):
    op: str  # one of ARITH_OPS
    left: Term
    right: Term


@dataclass(frozen=True)
class CondTerm(Term):
    cond: "Formula"
    then: Term
    other: Term


@dataclass(frozen=True)
class UpdApplyTerm(Term):
    update: "Update"
    term: Term


@dataclass(frozen=True)
class Store(Term):
    heap: Term
    obj: Term
    fieldref: Term
    value: Term


@dataclass(frozen=True)
class Select(Term):
    heap: Term
    obj: Term
    fieldref: Term


@dataclass(frozen=True)
class DepVar(Term):
    """The dependency ghost of a program variable (`x^dep`), of sort EC."""

    base: str


@dataclass(frozen=True)
class ECLit(Term):
    """An equivalence-class literal `<t>`, of sort EC.

    Holds an `ec.ECTerm`; kept untyped here to avoid an import cycle.
    """

    ec: object


# ---------------------------------------------------------------------------
# Formulas


class Formula:
    __match_args__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class PredApp(Formula):
    op: str  # one of CMP_OPS
    args: Tuple[Term, ...]


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class CondFormula(Formula):
    cond: Formula
    then: Formula
    other: Formula


@dataclass(frozen=True)
class UpdApplyFormula(Formula):
    update: "Update"
    formula: Formula


@dataclass(frozen=True)
class Box(Formula):
    """`[p] phi`: phi holds in every final state of p (vacuously on divergence)."""

    program: "Program"
    formula: Formula


@dataclass(frozen=True)
class BoolTerm(Formula):
    """A Bool-sorted term used as an atomic formula (e.g. `if (flag)`)."""

    term: Term


@dataclass(frozen=True)
class SubsetOf(Formula):
    """`deps(e) <= {vars}` where e is a DepVar or an ECLit."""

    dep: Term
    allowed: frozenset


@dataclass(frozen=True)
class DepsEq(Formula):
    """`deps(e) == {vars}`; goal-layer only, never evaluated."""

    dep: Term
    vars: frozenset


# ---------------------------------------------------------------------------
# Updates


class Update:
    __match_args__ = ()


@dataclass(frozen=True)
class ElemUpd(Update):
    """`target := value`; target is a ProgVar or DepVar, value sort-matching."""

    target: Term
    value: Term


@dataclass(frozen=True)
class ParUpd(Update):
    left: Update
    right: Update


def flatten_update(u: Update) -> Tuple[ElemUpd, ...]:
    if isinstance(u, ElemUpd):
        return (u,)
    if isinstance(u, ParUpd):
        return flatten_update(u.left) + flatten_update(u.right)
    raise TypeError(f"not an update: {u!r}")


def par_update(elems: Iterable[ElemUpd]) -> Update:
    """Left-associated parallel update from a non-empty sequence."""
    elems = list(elems)
    if not elems:
        raise ValueError("empty update")
    u: Update = elems[0]
    for e in elems[1:]:
        u = ParUpd(u, e)
    return u


# ---------------------------------------------------------------------------
# Statements and programs


class Stmt:
    __match_args__ = ()


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    rhs: Union[Term, Formula]  # Formula rhs gives the variable sort Bool


@dataclass(frozen=True)
class FieldAssign(Stmt):
    obj: str
    fieldname: str
    rhs: Term


@dataclass(frozen=True)
class FieldRead(Stmt):
    var: str
    source: Term
    fieldname: str


@dataclass(frozen=True)
class New(Stmt):
    var: str


class Program:
    __match_args__ = ()


@dataclass(frozen=True)
class Skip(Program):
    pass


@dataclass(frozen=True)
class Seq(Program):
    stmts: Tuple[Stmt, ...]


@dataclass(frozen=True)
class If(Stmt):
    cond: Formula
    then: Program
    other: Program


@dataclass(frozen=True)
class While(Stmt):
    cond: Formula
    body: Program
    invariant: Optional[Formula] = None


def seq(stmts: Iterable[Stmt]) -> Program:
    stmts = tuple(stmts)
    return Seq(stmts) if stmts else Skip()


def stmts_of(p: Program) -> Tuple[Stmt, ...]:
    return p.stmts if isinstance(p, Seq) else ()


# ---------------------------------------------------------------------------
# Traversal


def children(node) -> Iterator:
    """Yield the immediate AST children of any node kind."""
    if isinstance(node, (ProgVar, LogVar, IntLit, BoolLit, FieldConst, DepVar,
                         ECLit, TrueF, FalseF, Skip)):
        return
    elif isinstance(node, FnApp):
        yield from node.args
    elif isinstance(node, ArithOp):
        yield node.left
        yield node.right
    elif isinstance(node, CondTerm):
        yield node.cond
        yield node.then
        yield node.other
    elif isinstance(node, UpdApplyTerm):
        yield node.update
        yield node.term
    elif isinstance(node, Store):
        yield node.heap
        yield node.obj
        yield node.fieldref
        yield node.value
    elif isinstance(node, Select):
        yield node.heap
        yield node.obj
        yield node.fieldref
    elif isinstance(node, PredApp):
        yield from node.args
    elif isinstance(node, Eq):
        yield node.left
        yield node.right
    elif isinstance(node, Not):
        yield node.sub
    elif isinstance(node, (And, Or, Implies)):
        yield node.left
        yield node.right
    elif isinstance(node, (Exists, Forall)):
        yield node.body
    elif isinstance(node, CondFormula):
        yield node.cond
        yield node.then
        yield node.other
    elif isinstance(node, UpdApplyFormula):
        yield node.update
        yield node.formula
    elif isinstance(node, Box):
        yield node.program
        yield node.formula
    elif isinstance(node, (BoolTerm,)):
        yield node.term
    elif isinstance(node, (SubsetOf, DepsEq)):
        yield node.dep
    elif isinstance(node, ElemUpd):
        yield node.target
        yield node.value
    elif isinstance(node, ParUpd):
        yield node.left
        yield node.right
    elif isinstance(node, Assign):
        yield node.rhs
    elif isinstance(node, FieldAssign):
        yield node.rhs
    elif isinstance(node, FieldRead):
        yield node.source
    elif isinstance(node, New):
        return
    elif isinstance(node, If):
        yield node.cond
        yield node.then
        yield node.other
    elif isinstance(node, While):
        yield node.cond
        yield node.body
        if node.invariant is not None:
            yield node.invariant
    elif isinstance(node, Seq):
        yield from node.stmts
    else:
        raise TypeError(f"unknown AST node: {node!r}")


def walk(node) -> Iterator:
    """Depth-first traversal including the node itself."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(children(n))


def prog_var_names(node) -> frozenset:
    """Program variables occurring syntactically in a node (incl. ghosts' bases)."""
    names = set()
    for n in walk(node):
        if isinstance(n, ProgVar):
            names.add(n.name)
        elif isinstance(n, DepVar):
            names.add(n.base)
        elif isinstance(n, (FieldAssign, FieldRead, New, Assign)):
            names.add(n.var if hasattr(n, "var") else n.obj)
            if isinstance(n, (FieldAssign, FieldRead)):
                names.add(HEAP_VAR)
            if isinstance(n, FieldAssign):
                names.add(n.obj)
    return frozenset(names)


def assigned_vars(p: Union[Program, Stmt]) -> frozenset:
    """Variables written by a program; field writes target the heap variable."""
    out = set()
    for n in walk(p):
        if isinstance(n, Assign):
            out.add(n.var)
        elif isinstance(n, FieldAssign):
            out.add(HEAP_VAR)
        elif isinstance(n, (FieldRead, New)):
            out.add(n.var)
    return frozenset(out)


def occurring_vars(node) -> frozenset:
    """All program variables a loop condition/body touches, incl. implicit heap."""
    return prog_var_names(node)


# ---------------------------------------------------------------------------
# Well-formedness restrictions

_FORBIDDEN_IN_PROGRAM = (LogVar, Exists, Forall, UpdApplyTerm, UpdApplyFormula,
                         Box, ECLit, DepVar, SubsetOf, DepsEq)


def validate_program(p: Program) -> None:
    """Enforce the program-formula restriction on every embedded term/formula.

    Loop invariant annotations are exempt (they speak about ghosts) but may
    not contain modalities.
    """
    for n in walk(_strip_invariants(p)):
        if isinstance(n, _FORBIDDEN_IN_PROGRAM):
            what = type(n).__name__
            if isinstance(n, LogVar):
                raise UnsupportedConstruct(f"logical variable '{n.name}' used inside program")
            raise UnsupportedConstruct(f"{what} not allowed inside a program")
        if isinstance(n, Assign) and n.var == HEAP_VAR:
            raise SortError("the heap variable cannot be assigned directly")
    for n in walk(p):
        if isinstance(n, While) and n.invariant is not None:
            for m in walk(n.invariant):
                if isinstance(m, (Box, UpdApplyTerm, UpdApplyFormula, LogVar, Exists, Forall)):
                    raise UnsupportedConstruct("invariant annotations must be modality-free")


def _strip_invariants(p):
    if isinstance(p, Seq):
        return Seq(tuple(_strip_invariants(s) for s in p.stmts))
    if isinstance(p, While):
        return While(p.cond, _strip_invariants(p.body), None)
    if isinstance(p, If):
        return If(p.cond, _strip_invariants(p.then), _strip_invariants(p.other))
    return p


def validate_policy_expr(node: Union[Term, Formula]) -> None:
    """Declassification pairs may not contain programs, updates or logical variables."""
    for n in walk(node):
        if isinstance(n, (LogVar, Exists, Forall)):
            raise UnsupportedConstruct("logical variable in declassification pair")
        if isinstance(n, (UpdApplyTerm, UpdApplyFormula)):
            raise UnsupportedConstruct("update in declassification pair")
        if isinstance(n, Box):
            raise UnsupportedConstruct("program in declassification pair")
        if isinstance(n, (DepVar, ECLit, SubsetOf, DepsEq)):
            raise UnsupportedConstruct("dependency construct in declassification pair")


# ---------------------------------------------------------------------------
# Sort inference


@dataclass
class Signature:
    """Inferred sorts for program variables and field value sorts."""

    vars: dict
    fields: dict

    def sort_of(self, name: str) -> Sort:
        return self.vars.get(name, Sort.INT)


class _Unifier:
    def __init__(self):
        self.parent = {}
        self.sorts = {}

    def _find(self, k):
        while self.parent.get(k, k) != k:
            self.parent[k] = self.parent.get(self.parent[k], self.parent[k])
            k = self.parent[k]
        return k

    def fresh(self):
        k = ("t", len(self.parent) + len(self.sorts), object())
        return k

    def assign(self, ref, sort: Sort):
        if isinstance(ref, Sort):
            if ref is not sort and Sort.TOP not in (ref, sort):
                raise SortError(f"sort mismatch: {ref.value} vs {sort.value}")
            return
        r = self._find(ref)
        cur = self.sorts.get(r)
        if cur is None:
            self.sorts[r] = sort
        elif cur is not sort:
            raise SortError(f"conflicting sorts for {_ref_name(ref)}: {cur.value} vs {sort.value}")

    def unify(self, a, b):
        if isinstance(a, Sort) and isinstance(b, Sort):
            if a is not b:
                raise SortError(f"sort mismatch: {a.value} vs {b.value}")
            return
        if isinstance(a, Sort):
            self.assign(b, a)
            return
        if isinstance(b, Sort):
            self.assign(a, b)
            return
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        sa, sb = self.sorts.get(ra), self.sorts.get(rb)
        if sa is not None and sb is not None and sa is not sb:
            raise SortError(
                f"conflicting sorts for {_ref_name(a)}/{_ref_name(b)}: {sa.value} vs {sb.value}")
        self.parent[ra] = rb
        if sa is not None:
            self.sorts[rb] = sa

    def resolved(self, ref) -> Optional[Sort]:
        if isinstance(ref, Sort):
            return ref
        return self.sorts.get(self._find(ref))


def _ref_name(ref) -> str:
    if isinstance(ref, tuple) and len(ref) >= 2 and ref[0] in ("v", "f", "lv"):
        return str(ref[1])
    return "expression"


def infer_signature(p: Program, extra: Iterable[Union[Term, Formula]] = ()) -> Signature:
    """Infer variable and field sorts for a program (plus auxiliary formulas).

    Unconstrained variables default to Int.  Raises SortError on conflicting
    use.
    """
    uni = _Unifier()
    var_names = set()
    field_names = set()

    def vref(name):
        var_names.add(name)
        return ("v", name)

    def fref(name):
        field_names.add(name)
        return ("fv", name)

    def t_sort(t: Term):
        if isinstance(t, ProgVar):
            return vref(t.name)
        if isinstance(t, LogVar):
            return ("lv", t.name)
        if isinstance(t, IntLit):
            return Sort.INT
        if isinstance(t, BoolLit):
            return Sort.BOOL
        if isinstance(t, FieldConst):
            field_names.add(t.name)
            return Sort.FIELD
        if isinstance(t, FnApp):
            for a in t.args:
                t_sort(a)
            return t.sort if t.sort is not None else uni.fresh()
        if isinstance(t, ArithOp):
            uni.unify(t_sort(t.left), Sort.INT)
            uni.unify(t_sort(t.right), Sort.INT)
            return Sort.INT
        if isinstance(t, CondTerm):
            f_check(t.cond)
            a, b = t_sort(t.then), t_sort(t.other)
            uni.unify(a, b)
            return a
        if isinstance(t, UpdApplyTerm):
            u_check(t.update)
            return t_sort(t.term)
        if isinstance(t, Store):
            uni.unify(t_sort(t.heap), Sort.HEAP)
            uni.unify(t_sort(t.obj), Sort.OBJECT)
            val = t_sort(t.value)
            if isinstance(t.fieldref, FieldConst):
                uni.unify(val, fref(t.fieldref.name))
            else:
                uni.unify(t_sort(t.fieldref), Sort.FIELD)
            return Sort.HEAP
        if isinstance(t, Select):
            uni.unify(t_sort(t.heap), Sort.HEAP)
            uni.unify(t_sort(t.obj), Sort.OBJECT)
            if isinstance(t.fieldref, FieldConst):
                return fref(t.fieldref.name)
            uni.unify(t_sort(t.fieldref), Sort.FIELD)
            return uni.fresh()
        if isinstance(t, DepVar):
            var_names.add(t.base)
            return Sort.EC
        if isinstance(t, ECLit):
            return Sort.EC
        raise TypeError(f"unknown term: {t!r}")

    def f_check(f: Formula):
        if isinstance(f, (TrueF, FalseF)):
            return
        if isinstance(f, PredApp):
            for a in f.args:
                uni.unify(t_sort(a), Sort.INT)
            return
        if isinstance(f, Eq):
            uni.unify(t_sort(f.left), t_sort(f.right))
            return
        if isinstance(f, Not):
            f_check(f.sub)
            return
        if isinstance(f, (And, Or, Implies)):
            f_check(f.left)
            f_check(f.right)
            return
        if isinstance(f, (Exists, Forall)):
            f_check(f.body)
            return
        if isinstance(f, CondFormula):
            f_check(f.cond)
            f_check(f.then)
            f_check(f.other)
            return
        if isinstance(f, UpdApplyFormula):
            u_check(f.update)
            f_check(f.formula)
            return
        if isinstance(f, Box):
            p_check(f.program)
            f_check(f.formula)
            return
        if isinstance(f, BoolTerm):
            uni.unify(t_sort(f.term), Sort.BOOL)
            return
        if isinstance(f, (SubsetOf, DepsEq)):
            uni.unify(t_sort(f.dep), Sort.EC)
            return
        raise TypeError(f"unknown formula: {f!r}")

    def u_check(u: Update):
        for e in flatten_update(u):
            if isinstance(e.target, ProgVar):
                uni.unify(vref(e.target.name), t_sort(e.value))
            elif isinstance(e.target, DepVar):
                var_names.add(e.target.base)
                uni.unify(t_sort(e.value), Sort.EC)
            else:
                raise SortError("update target must be a program variable or ghost")

    def p_check(p: Program):
        for s in stmts_of(p):
            if isinstance(s, Assign):
                if isinstance(s.rhs, Formula):
                    f_check(s.rhs)
                    uni.assign(vref(s.var), Sort.BOOL)
                else:
                    uni.unify(vref(s.var), t_sort(s.rhs))
            elif isinstance(s, FieldAssign):
                uni.assign(vref(s.obj), Sort.OBJECT)
                uni.unify(t_sort(s.rhs), fref(s.fieldname))
                uni.assign(vref(HEAP_VAR), Sort.HEAP)
            elif isinstance(s, FieldRead):
                uni.unify(t_sort(s.source), Sort.OBJECT)
                uni.unify(vref(s.var), fref(s.fieldname))
                uni.assign(vref(HEAP_VAR), Sort.HEAP)
            elif isinstance(s, New):
                uni.assign(vref(s.var), Sort.OBJECT)
            elif isinstance(s, If):
                f_check(s.cond)
                p_check(s.then)
                p_check(s.other)
            elif isinstance(s, While):
                f_check(s.cond)
                p_check(s.body)
                if s.invariant is not None:
                    f_check(s.invariant)
            else:
                raise TypeError(f"unknown statement: {s!r}")

    p_check(p)
    for x in extra:
        if isinstance(x, Formula):
            f_check(x)
        else:
            t_sort(x)

    vars_out = {}
    for name in sorted(var_names):
        s = uni.resolved(("v", name))
        vars_out[name] = s if s is not None else Sort.INT
    fields_out = {}
    for name in sorted(field_names):
        s = uni.resolved(("fv", name))
        fields_out[name] = s if s is not None else Sort.INT
    if HEAP_VAR in vars_out and vars_out[HEAP_VAR] is not Sort.HEAP:
        raise SortError("'heap' is reserved for the heap variable")
    return Signature(vars=vars_out, fields=fields_out)
