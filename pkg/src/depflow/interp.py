"""Concrete evaluation of terms, formulas, updates and programs.

The plain evaluator is the executable semantics; `eval_program_dep`
additionally threads the dependency ghosts: assignments record the wrapped
right-hand side, conditionals evaluate both branches and combine the ghost
classes under the wrapped condition, and loops stamp opaque summaries for
every modified variable.  Arithmetic is totalized (division and modulo by
zero yield zero) so evaluation is a total function; loops draw from a
finite fuel budget and raise `FuelExhausted` when it runs out, which
callers must treat as "no answer", never as divergence or agreement.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from . import ec as E
from . import printer
from . import syntax as S
from .ec import int_div, int_mod
from .syntax import HEAP_VAR, Sort, UnsupportedConstruct

DEFAULT_FUEL = 10_000


class FuelExhausted(Exception):
    """A loop exceeded its iteration budget; stands in for a possibly
    diverging run and must never be read as a result."""


@dataclass(frozen=True)
class ObjRef:
    id: int


@dataclass(frozen=True)
class HeapVal:
    """Immutable heap: sorted ((object id, field) -> value) cells.

    Unwritten integer-sorted locations read as 0.
    """

    cells: Tuple[Tuple[Tuple[int, str], object], ...] = ()

    def get(self, obj: ObjRef, fieldname: str, default=0):
        key = (obj.id, fieldname)
        for k, v in self.cells:
            if k == key:
                return v
        return default

    def set(self, obj: ObjRef, fieldname: str, value) -> "HeapVal":
        key = (obj.id, fieldname)
        cells = {k: v for k, v in self.cells}
        cells[key] = value
        return HeapVal(tuple(sorted(cells.items())))


Value = Union[int, bool, ObjRef, HeapVal, str, E.ECTerm]


@dataclass
class State:
    """A program state: variable store, dependency ghosts, allocation counter."""

    store: Dict[str, Value]
    dep: Dict[str, E.ECTerm] = field(default_factory=dict)
    alloc: int = 0

    def copy(self) -> "State":
        return State(dict(self.store), dict(self.dep), self.alloc)

    def heap(self) -> HeapVal:
        h = self.store.get(HEAP_VAR)
        return h if isinstance(h, HeapVal) else HeapVal()

    def snapshot(self) -> Tuple:
        return (tuple(sorted(self.store.items(), key=lambda kv: kv[0])), self.alloc)


def init_state(values: Mapping[str, Value], with_ghosts: bool = False) -> State:
    """Build a state; ghost initialization sets x^dep = <x> for every variable."""
    st = State(dict(values))
    if with_ghosts:
        for name in values:
            st.dep[name] = E.HVar(name)
    return st


class _Fuel:
    __slots__ = ("left",)

    def __init__(self, amount: int):
        self.left = amount

    def tick(self):
        if self.left <= 0:
            raise FuelExhausted()
        self.left -= 1


# ---------------------------------------------------------------------------
# Terms and formulas


def eval_term(t: S.Term, state: State, beta: Optional[Mapping[str, Value]] = None,
              domain: Optional[Iterable[int]] = None, fuel: int = DEFAULT_FUEL) -> Value:
    return _Ev(state, beta, domain, _Fuel(fuel)).term(t)


def eval_formula(f: S.Formula, state: State, beta: Optional[Mapping[str, Value]] = None,
                 domain: Optional[Iterable[int]] = None, fuel: int = DEFAULT_FUEL) -> bool:
    return _Ev(state, beta, domain, _Fuel(fuel)).formula(f)


def eval_update(u: S.Update, state: State, beta: Optional[Mapping[str, Value]] = None,
                domain: Optional[Iterable[int]] = None, fuel: int = DEFAULT_FUEL) -> State:
    return _Ev(state, beta, domain, _Fuel(fuel)).update(u)


def eval_program(p: S.Program, state: State, beta: Optional[Mapping[str, Value]] = None,
                 fuel: int = DEFAULT_FUEL) -> State:
    """Run a program; raises FuelExhausted when the loop budget runs out."""
    ev = _Ev(state.copy(), beta, None, _Fuel(fuel))
    ev.run(p, dep_mode=False)
    return ev.state


def eval_program_dep(p: S.Program, state: State, beta: Optional[Mapping[str, Value]] = None,
                     fuel: int = DEFAULT_FUEL) -> State:
    """Run a program while maintaining the dependency ghosts."""
    ev = _Ev(state.copy(), beta, None, _Fuel(fuel))
    ev.run(p, dep_mode=True)
    return ev.state


class _Ev:
    def __init__(self, state: State, beta, domain, fuel: _Fuel):
        self.state = state
        self.beta = dict(beta) if beta else {}
        self.domain = list(domain) if domain is not None else None
        self.fuel = fuel

    # -- terms ---------------------------------------------------------------

    def term(self, t: S.Term) -> Value:
        if isinstance(t, S.ProgVar):
            if t.name not in self.state.store:
                raise KeyError(f"unbound program variable {t.name!r}")
            return self.state.store[t.name]
        if isinstance(t, S.LogVar):
            if t.name not in self.beta:
                raise KeyError(f"unbound logical variable {t.name!r}")
            return self.beta[t.name]
        if isinstance(t, S.IntLit):
            return t.value
        if isinstance(t, S.BoolLit):
            return t.value
        if isinstance(t, S.FieldConst):
            return t.name
        if isinstance(t, S.ArithOp):
            a = self.term(t.left)
            b = self.term(t.right)
            if t.op == "+":
                return a + b
            if t.op == "-":
                return a - b
            if t.op == "*":
                return a * b
            if t.op == "/":
                return int_div(a, b)
            return int_mod(a, b)
        if isinstance(t, S.CondTerm):
            return self.term(t.then) if self.formula(t.cond) else self.term(t.other)
        if isinstance(t, S.UpdApplyTerm):
            inner = _Ev(self.update(t.update), self.beta, self.domain, self.fuel)
            return inner.term(t.term)
        if isinstance(t, S.Select):
            heap = self.term(t.heap)
            obj = self.term(t.obj)
            fieldname = self.term(t.fieldref)
            return heap.get(obj, fieldname)
        if isinstance(t, S.Store):
            heap = self.term(t.heap)
            obj = self.term(t.obj)
            fieldname = self.term(t.fieldref)
            return heap.set(obj, fieldname, self.term(t.value))
        if isinstance(t, S.DepVar):
            if t.base not in self.state.dep:
                raise KeyError(f"uninitialized ghost {t.base}^dep")
            return self.state.dep[t.base]
        if isinstance(t, S.ECLit):
            return E.normalize(t.ec)
        if isinstance(t, S.FnApp):
            raise UnsupportedConstruct(f"uninterpreted symbol {t.name!r} cannot be evaluated")
        raise TypeError(f"unknown term: {t!r}")

    # -- formulas --------------------------------------------------------------

    def formula(self, f: S.Formula) -> bool:
        if isinstance(f, S.TrueF):
            return True
        if isinstance(f, S.FalseF):
            return False
        if isinstance(f, S.PredApp):
            a = self.term(f.args[0])
            b = self.term(f.args[1])
            return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[f.op]
        if isinstance(f, S.Eq):
            return self.term(f.left) == self.term(f.right)
        if isinstance(f, S.Not):
            return not self.formula(f.sub)
        if isinstance(f, S.And):
            return self.formula(f.left) and self.formula(f.right)
        if isinstance(f, S.Or):
            return self.formula(f.left) or self.formula(f.right)
        if isinstance(f, S.Implies):
            return (not self.formula(f.left)) or self.formula(f.right)
        if isinstance(f, (S.Exists, S.Forall)):
            if self.domain is None:
                raise UnsupportedConstruct(
                    "quantifier evaluation requires a finite domain (oracle mode)")
            results = []
            for v in self.domain:
                saved = self.beta.get(f.var)
                self.beta[f.var] = v
                try:
                    results.append(self.formula(f.body))
                finally:
                    if saved is None:
                        self.beta.pop(f.var, None)
                    else:
                        self.beta[f.var] = saved
            return any(results) if isinstance(f, S.Exists) else all(results)
        if isinstance(f, S.CondFormula):
            return self.formula(f.then) if self.formula(f.cond) else self.formula(f.other)
        if isinstance(f, S.UpdApplyFormula):
            inner = _Ev(self.update(f.update), self.beta, self.domain, self.fuel)
            return inner.formula(f.formula)
        if isinstance(f, S.Box):
            # vacuously true on divergence; fuel exhaustion propagates
            sub = _Ev(self.state.copy(), self.beta, self.domain, self.fuel)
            sub.run(f.program, dep_mode=False)
            return _Ev(sub.state, self.beta, self.domain, self.fuel).formula(f.formula)
        if isinstance(f, S.BoolTerm):
            v = self.term(f.term)
            if not isinstance(v, bool):
                raise UnsupportedConstruct("non-boolean term used as formula")
            return v
        if isinstance(f, (S.SubsetOf, S.DepsEq)):
            raise UnsupportedConstruct("dependency goals are discharged by the checker")
        raise TypeError(f"unknown formula: {f!r}")

    # -- updates ------------------------------------------------------------

    def update(self, u: S.Update) -> State:
        elems = S.flatten_update(u)
        # all right-hand sides are evaluated in the original state;
        # assignment left to right makes the right-most update win
        values = [(e.target, self.term(e.value)) for e in elems]
        out = self.state.copy()
        for target, v in values:
            if isinstance(target, S.ProgVar):
                out.store[target.name] = v
            else:
                out.dep[target.base] = v
        return out

    # -- programs ---------------------------------------------------------------

    def run(self, p: S.Program, dep_mode: bool) -> None:
        for stmt in S.stmts_of(p):
            self.stmt(stmt, dep_mode)

    def stmt(self, s: S.Stmt, dep_mode: bool) -> None:
        st = self.state
        if isinstance(s, S.Assign):
            if isinstance(s.rhs, S.Formula):
                value: Value = self.formula(s.rhs)
            else:
                value = self.term(s.rhs)
            if dep_mode:
                st.dep[s.var] = E.normalize(E.wrap(s.rhs, st.dep))
            st.store[s.var] = value
            return
        if isinstance(s, S.FieldAssign):
            obj = st.store[s.obj]
            value = self.term(s.rhs)
            if dep_mode:
                st.dep[HEAP_VAR] = E.normalize(E.HApp("store", (
                    st.dep.get(HEAP_VAR, E.HVar(HEAP_VAR)),
                    st.dep.get(s.obj, E.HVar(s.obj)),
                    E.HConst(E.FieldTag(s.fieldname)),
                    E.wrap(s.rhs, st.dep))))
            st.store[HEAP_VAR] = st.heap().set(obj, s.fieldname, value)
            return
        if isinstance(s, S.FieldRead):
            obj = self.term(s.source)
            if dep_mode:
                st.dep[s.var] = E.normalize(E.HApp("select", (
                    st.dep.get(HEAP_VAR, E.HVar(HEAP_VAR)),
                    E.wrap(s.source, st.dep),
                    E.HConst(E.FieldTag(s.fieldname)))))
            st.store[s.var] = st.heap().get(obj, s.fieldname)
            return
        if isinstance(s, S.New):
            ref = ObjRef(st.alloc)
            st.alloc += 1
            st.store[s.var] = ref
            if dep_mode:
                st.dep[s.var] = E.HConst(E.AllocTag(ref.id))
            return
        if isinstance(s, S.If):
            taken = self.formula(s.cond)
            if not dep_mode:
                self.run(s.then if taken else s.other, dep_mode)
                return
            # evaluate both branches; the ghost of every variable assigned in
            # either branch becomes a conditional over the branch classes
            cond_ec = E.wrap(s.cond, st.dep)
            then_ev = _Ev(st.copy(), self.beta, self.domain, self.fuel)
            then_ev.run(s.then, dep_mode=True)
            else_ev = _Ev(st.copy(), self.beta, self.domain, self.fuel)
            else_ev.run(s.other, dep_mode=True)
            result = (then_ev if taken else else_ev).state
            for var in sorted(S.assigned_vars(s.then) | S.assigned_vars(s.other)):
                t1 = E.normalize(then_ev.state.dep.get(var, E.HVar(var)))
                t2 = E.normalize(else_ev.state.dep.get(var, E.HVar(var)))
                result.dep[var] = E.normalize(E.HCond(cond_ec, t1, t2))
            self.state = result
            return
        if isinstance(s, S.While):
            entry_dep = dict(st.dep) if dep_mode else None
            while self.formula(s.cond):
                self.fuel.tick()
                self.run(s.body, dep_mode=False)
            if dep_mode:
                wid = loop_id(s)
                captured = sorted(S.occurring_vars(S.While(s.cond, s.body)))
                captures = tuple((z, entry_dep.get(z, E.HVar(z))) for z in captured)
                for var in sorted(S.assigned_vars(s.body)):
                    self.state.dep[var] = E.HLoop(wid, var, captures)
            return
        raise TypeError(f"unknown statement: {s!r}")


def loop_id(loop: S.While) -> str:
    """Stable identity of a syntactic loop (used to name its W summary)."""
    text = printer.pp_stmt(S.While(loop.cond, loop.body, None), inline=True)
    return hashlib.sha256(text.encode()).hexdigest()[:8]
