"""Symbolic execution: update accumulation and the dependency calculus rules.

Updates are kept as a flat ordered list whose payloads are grounded in the
initial state: each new assignment first applies the pending update to its
right-hand side (substitution composition), so parallel application and
sequential accumulation coincide.  Conditionals do not split the proof;
both branches are executed on copies of the state and their effects are
combined into conditional payloads, with the ghost of every modified
variable becoming a conditional over the two branch classes.  Loops use the
classic three-premise invariant rule; the modified variables and their
ghosts are havocked to fresh symbols constrained only by the invariant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

from . import ec as E
from . import syntax as S
from .ec import ECTerm, HOpaque, HVar, normalize
from .syntax import HEAP_VAR, Sort, UnsupportedConstruct


# ---------------------------------------------------------------------------
# Parallel updates


@dataclass(frozen=True)
class UpdEntry:
    target: str
    ghost: bool
    payload: object  # Term for variables, ECTerm for ghosts


@dataclass(frozen=True)
class ParallelUpdate:
    entries: Tuple[UpdEntry, ...] = ()

    def var_payload(self, name: str) -> S.Term:
        for e in reversed(self.entries):
            if not e.ghost and e.target == name:
                return e.payload
        return S.ProgVar(name)

    def ghost_payload(self, name: str) -> ECTerm:
        for e in reversed(self.entries):
            if e.ghost and e.target == name:
                return e.payload
        return HVar(name)

    def ghost_map(self) -> Dict[str, ECTerm]:
        out: Dict[str, ECTerm] = {}
        for e in self.entries:
            if e.ghost:
                out[e.target] = e.payload
        return out

    def var_map(self) -> Dict[str, S.Term]:
        out: Dict[str, S.Term] = {}
        for e in self.entries:
            if not e.ghost:
                out[e.target] = e.payload
        return out

    def set_var(self, name: str, payload: S.Term) -> "ParallelUpdate":
        return ParallelUpdate(self.entries + (UpdEntry(name, False, payload),))

    def set_ghost(self, name: str, payload: ECTerm) -> "ParallelUpdate":
        return ParallelUpdate(self.entries + (UpdEntry(name, True, payload),))


def simplify_update(u: ParallelUpdate) -> ParallelUpdate:
    """Drop shadowed entries (right-most wins) and identity entries."""
    last: Dict[Tuple[str, bool], int] = {}
    for i, e in enumerate(u.entries):
        last[(e.target, e.ghost)] = i
    out = []
    for i, e in enumerate(u.entries):
        if last[(e.target, e.ghost)] != i:
            continue
        payload = e.payload if e.ghost else _simp_term(e.payload)
        if not e.ghost and payload == S.ProgVar(e.target):
            continue
        if e.ghost and payload == HVar(e.target):
            continue
        out.append(UpdEntry(e.target, e.ghost, payload))
    return ParallelUpdate(tuple(out))


def apply_update(u: ParallelUpdate, node):
    """Apply an update to a term, formula or ECTerm as a simultaneous
    substitution of targets by payloads."""
    if isinstance(node, ECTerm):
        return E.subst_ghosts(node, u.ghost_map())
    if isinstance(node, S.Term):
        return _apply_term(u, node)
    if isinstance(node, S.Formula):
        return _apply_formula(u, node)
    raise TypeError(f"cannot apply an update to {node!r}")


def _apply_term(u: ParallelUpdate, t: S.Term) -> S.Term:
    if isinstance(t, S.ProgVar):
        return u.var_payload(t.name)
    if isinstance(t, S.DepVar):
        return S.ECLit(u.ghost_payload(t.base))
    if isinstance(t, S.ECLit):
        return S.ECLit(E.subst_ghosts(t.ec, u.ghost_map()))
    if isinstance(t, (S.LogVar, S.IntLit, S.BoolLit, S.FieldConst)):
        return t
    if isinstance(t, S.FnApp):
        return S.FnApp(t.name, tuple(_apply_term(u, a) for a in t.args), t.sort)
    if isinstance(t, S.ArithOp):
        return S.ArithOp(t.op, _apply_term(u, t.left), _apply_term(u, t.right))
    if isinstance(t, S.CondTerm):
        return S.CondTerm(_apply_formula(u, t.cond), _apply_term(u, t.then),
                          _apply_term(u, t.other))
    if isinstance(t, S.Store):
        return S.Store(_apply_term(u, t.heap), _apply_term(u, t.obj),
                       _apply_term(u, t.fieldref), _apply_term(u, t.value))
    if isinstance(t, S.Select):
        return S.Select(_apply_term(u, t.heap), _apply_term(u, t.obj),
                        _apply_term(u, t.fieldref))
    if isinstance(t, S.UpdApplyTerm):
        raise UnsupportedConstruct("nested update application is not supported here")
    raise TypeError(f"unknown term: {t!r}")


def _apply_formula(u: ParallelUpdate, f: S.Formula) -> S.Formula:
    if isinstance(f, (S.TrueF, S.FalseF)):
        return f
    if isinstance(f, S.PredApp):
        return S.PredApp(f.op, tuple(_apply_term(u, a) for a in f.args))
    if isinstance(f, S.Eq):
        return S.Eq(_apply_term(u, f.left), _apply_term(u, f.right))
    if isinstance(f, S.Not):
        return S.Not(_apply_formula(u, f.sub))
    if isinstance(f, S.And):
        return S.And(_apply_formula(u, f.left), _apply_formula(u, f.right))
    if isinstance(f, S.Or):
        return S.Or(_apply_formula(u, f.left), _apply_formula(u, f.right))
    if isinstance(f, S.Implies):
        return S.Implies(_apply_formula(u, f.left), _apply_formula(u, f.right))
    if isinstance(f, S.CondFormula):
        return S.CondFormula(_apply_formula(u, f.cond), _apply_formula(u, f.then),
                             _apply_formula(u, f.other))
    if isinstance(f, S.BoolTerm):
        return S.BoolTerm(_apply_term(u, f.term))
    if isinstance(f, S.SubsetOf):
        return S.SubsetOf(_apply_term(u, f.dep), f.allowed)
    if isinstance(f, S.DepsEq):
        return S.DepsEq(_apply_term(u, f.dep), f.vars)
    if isinstance(f, S.Box):
        raise UnsupportedConstruct("update application under a modality")
    if isinstance(f, (S.Exists, S.Forall, S.UpdApplyFormula)):
        raise UnsupportedConstruct(f"{type(f).__name__} in update application")
    raise TypeError(f"unknown formula: {f!r}")


def to_lang_update(u: ParallelUpdate) -> Optional[S.Update]:
    """Render the accumulated update as a parallel update tree (for traces)."""
    elems = []
    for e in u.entries:
        if e.ghost:
            elems.append(S.ElemUpd(S.DepVar(e.target), S.ECLit(e.payload)))
        else:
            elems.append(S.ElemUpd(S.ProgVar(e.target), e.payload))
    return S.par_update(elems) if elems else None


# ---------------------------------------------------------------------------
# Light term/formula simplification (value side of the update)


def _simp_term(t: S.Term) -> S.Term:
    if isinstance(t, S.ArithOp):
        a, b = _simp_term(t.left), _simp_term(t.right)
        if isinstance(a, S.IntLit) and isinstance(b, S.IntLit):
            v = {"+": a.value + b.value, "-": a.value - b.value, "*": a.value * b.value,
                 "/": E.int_div(a.value, b.value), "%": E.int_mod(a.value, b.value)}[t.op]
            return S.IntLit(v)
        return S.ArithOp(t.op, a, b)
    if isinstance(t, S.CondTerm):
        c = _simp_formula(t.cond)
        a, b = _simp_term(t.then), _simp_term(t.other)
        if isinstance(c, S.TrueF):
            return a
        if isinstance(c, S.FalseF):
            return b
        if a == b:
            return a
        return S.CondTerm(c, a, b)
    if isinstance(t, S.Store):
        return S.Store(_simp_term(t.heap), _simp_term(t.obj), t.fieldref, _simp_term(t.value))
    if isinstance(t, S.Select):
        return S.Select(_simp_term(t.heap), _simp_term(t.obj), t.fieldref)
    return t


def _simp_formula(f: S.Formula) -> S.Formula:
    if isinstance(f, S.Not):
        sub = _simp_formula(f.sub)
        if isinstance(sub, S.TrueF):
            return S.FalseF()
        if isinstance(sub, S.FalseF):
            return S.TrueF()
        if isinstance(sub, S.Not):
            return sub.sub
        return S.Not(sub)
    if isinstance(f, S.And):
        a, b = _simp_formula(f.left), _simp_formula(f.right)
        if isinstance(a, S.TrueF):
            return b
        if isinstance(b, S.TrueF):
            return a
        if isinstance(a, S.FalseF) or isinstance(b, S.FalseF):
            return S.FalseF()
        return S.And(a, b)
    if isinstance(f, S.Or):
        a, b = _simp_formula(f.left), _simp_formula(f.right)
        if isinstance(a, S.FalseF):
            return b
        if isinstance(b, S.FalseF):
            return a
        if isinstance(a, S.TrueF) or isinstance(b, S.TrueF):
            return S.TrueF()
        return S.Or(a, b)
    if isinstance(f, S.Eq):
        a, b = _simp_term(f.left), _simp_term(f.right)
        if a == b:
            return S.TrueF()
        if isinstance(a, S.IntLit) and isinstance(b, S.IntLit):
            return S.FalseF()
        return S.Eq(a, b)
    if isinstance(f, S.PredApp):
        a, b = _simp_term(f.args[0]), _simp_term(f.args[1])
        if isinstance(a, S.IntLit) and isinstance(b, S.IntLit):
            hold = {"<": a.value < b.value, "<=": a.value <= b.value,
                    ">": a.value > b.value, ">=": a.value >= b.value}[f.op]
            return S.TrueF() if hold else S.FalseF()
        return S.PredApp(f.op, (a, b))
    if isinstance(f, S.BoolTerm):
        t = _simp_term(f.term)
        if isinstance(t, S.BoolLit):
            return S.TrueF() if t.value else S.FalseF()
        return S.BoolTerm(t)
    return f


# ---------------------------------------------------------------------------
# Symbolic state and obligations


@dataclass(frozen=True)
class ProofObligation:
    """A Box-free goal together with the path knowledge it may use."""

    kind: str                    # "goal", "loop-initial", "loop-preserved"
    target: str
    goal: S.Formula              # SubsetOf(ECLit, allowed) or Eq(ECLit, ECLit)
    context: Tuple[Tuple[ECTerm, bool], ...] = ()   # (condition class, negated?)
    note: str = ""


@dataclass(frozen=True)
class SymState:
    """State of the symbolic interpreter between rule applications."""

    path: Tuple[S.Formula, ...] = ()
    update: ParallelUpdate = ParallelUpdate()
    remaining: Tuple[S.Stmt, ...] = ()
    fresh: int = 0
    context: Tuple[Tuple[ECTerm, bool], ...] = ()
    obligations: Tuple[ProofObligation, ...] = ()
    bounds: Tuple[Tuple[str, frozenset], ...] = ()
    steps: Tuple[str, ...] = ()

    def head(self) -> S.Stmt:
        return self.remaining[0]

    def _consume(self) -> Tuple[S.Stmt, "SymState"]:
        return self.remaining[0], replace(self, remaining=self.remaining[1:])


def _fresh_name(base: str, st: SymState) -> Tuple[str, SymState]:
    name = f"{base}{S.FRESH_MARK}{st.fresh}"
    return name, replace(st, fresh=st.fresh + 1)


def _log(st: SymState, msg: str) -> SymState:
    return replace(st, steps=st.steps + (msg,))


# ---------------------------------------------------------------------------
# Rules


def exec_assign_local(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    stmt, st = st._consume()
    u = st.update
    if isinstance(stmt.rhs, S.Formula):
        value = S.CondTerm(_simp_formula(apply_update(u, stmt.rhs)),
                           S.BoolLit(True), S.BoolLit(False))
    else:
        value = apply_update(u, stmt.rhs)
    ghost = normalize(apply_update(u, E.wrap(stmt.rhs)))
    u = simplify_update(u.set_var(stmt.var, value).set_ghost(stmt.var, ghost))
    return _log(replace(st, update=u), f"assignment {stmt.var}")


def exec_assign_field(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    stmt, st = st._consume()
    u = st.update
    value = apply_update(u, stmt.rhs)
    heap_term = S.Store(u.var_payload(HEAP_VAR), u.var_payload(stmt.obj),
                        S.FieldConst(stmt.fieldname), value)
    heap_ghost = normalize(E.HApp("store", (
        u.ghost_payload(HEAP_VAR), u.ghost_payload(stmt.obj),
        E.HConst(E.FieldTag(stmt.fieldname)), apply_update(u, E.wrap(stmt.rhs)))))
    u = simplify_update(u.set_var(HEAP_VAR, heap_term).set_ghost(HEAP_VAR, heap_ghost))
    return _log(replace(st, update=u), f"field assignment {stmt.obj}.{stmt.fieldname}")


def exec_field_read(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    stmt, st = st._consume()
    u = st.update
    value = S.Select(u.var_payload(HEAP_VAR), apply_update(u, stmt.source),
                     S.FieldConst(stmt.fieldname))
    ghost = normalize(E.HApp("select", (
        u.ghost_payload(HEAP_VAR), apply_update(u, E.wrap(stmt.source)),
        E.HConst(E.FieldTag(stmt.fieldname)))))
    u = simplify_update(u.set_var(stmt.var, value).set_ghost(stmt.var, ghost))
    return _log(replace(st, update=u), f"field read {stmt.var}")


def exec_new(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    stmt, st = st._consume()
    name, st = _fresh_name(stmt.var, st)
    u = simplify_update(st.update
                        .set_var(stmt.var, S.FnApp(name, (), Sort.OBJECT))
                        .set_ghost(stmt.var, E.HConst(E.AllocTag(name))))
    return _log(replace(st, update=u), f"allocation {stmt.var}")


def exec_if(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    stmt, st = st._consume()
    u = st.update
    cond_value = _simp_formula(apply_update(u, stmt.cond))
    cond_ec = normalize(apply_update(u, E.wrap(stmt.cond)))

    then_st = _run_block(replace(st, remaining=S.stmts_of(stmt.then)), signature)
    else_st = _run_block(replace(then_st, update=u, remaining=S.stmts_of(stmt.other)),
                         signature)

    modified = sorted(S.assigned_vars(stmt.then) | S.assigned_vars(stmt.other))
    combined = u
    for x in modified:
        vt = then_st.update.var_payload(x)
        ve = else_st.update.var_payload(x)
        combined = combined.set_var(x, _simp_term(S.CondTerm(cond_value, vt, ve)))
        gt = normalize(then_st.update.ghost_payload(x))
        ge = normalize(else_st.update.ghost_payload(x))
        combined = combined.set_ghost(x, normalize(E.HCond(cond_ec, gt, ge)))
    # branch-internal path knowledge (from loops inside a branch) is
    # conditional and must not survive into the join
    out = replace(else_st, update=simplify_update(combined), remaining=st.remaining,
                  context=st.context)
    return _log(out, f"ifElse on {len(modified)} modified variable(s)")


def _inv_conjuncts(inv: S.Formula) -> List[S.Formula]:
    if isinstance(inv, S.And):
        return _inv_conjuncts(inv.left) + _inv_conjuncts(inv.right)
    if isinstance(inv, S.TrueF):
        return []
    if isinstance(inv, S.SubsetOf) and isinstance(inv.dep, S.DepVar):
        return [inv]
    if isinstance(inv, S.Eq) and isinstance(inv.left, S.DepVar) \
            and isinstance(inv.right, S.ECLit):
        return [inv]
    raise UnsupportedConstruct(
        "loop invariants must be conjunctions of deps(x^dep) <= {...} and "
        "x^dep == <...> clauses")


def _instantiate_conjunct(c: S.Formula, u: ParallelUpdate, kind: str, loop_tag: str,
                          context) -> ProofObligation:
    if isinstance(c, S.SubsetOf):
        e = normalize(u.ghost_payload(c.dep.base))
        return ProofObligation(kind, f"{loop_tag}:{c.dep.base}",
                               S.SubsetOf(S.ECLit(e), c.allowed), context)
    e = normalize(u.ghost_payload(c.left.base))
    w = normalize(E.subst_ghosts(c.right.ec, u.ghost_map()))
    return ProofObligation(kind, f"{loop_tag}:{c.left.base}",
                           S.Eq(S.ECLit(e), S.ECLit(w)), context)


def generate_invariant(loop: S.While,
                       st: Optional[SymState] = None) -> Tuple[Dict[str, frozenset], S.Formula]:
    """Set-valued dependency fixpoint over the loop body.

    Every variable assigned in the body starts from {itself}; each round
    adds the dependency sets of the assigned expression and of the loop
    condition (and of any enclosing branch conditions, for the implicit
    flow).  Terminates because sets only grow inside a finite universe.
    """
    assigned = sorted(S.assigned_vars(loop.body))
    dep: Dict[str, set] = {x: {x} for x in assigned}
    cond_vars = set(S.prog_var_names(loop.cond))

    def dset(v: str) -> set:
        return dep.get(v, {v})

    def union_of(names) -> set:
        out = set()
        for v in names:
            out |= dset(v)
        return out

    events = list(_assign_events(loop.body, frozenset()))
    changed = True
    while changed:
        changed = False
        for target, sources, guards in events:
            new = dep[target] | union_of(sources) | union_of(cond_vars) | union_of(guards)
            if new != dep[target]:
                dep[target] = new
                changed = True

    out = {x: frozenset(dep[x]) for x in assigned}
    conjuncts = [S.SubsetOf(S.DepVar(x), out[x]) for x in assigned]
    inv: S.Formula = S.TrueF()
    for c in conjuncts:
        inv = c if isinstance(inv, S.TrueF) else S.And(inv, c)
    return out, inv


def _assign_events(p: S.Program, guards: frozenset):
    """Yield (target, source vars, guard vars) for every assignment in p."""
    for stmt in S.stmts_of(p):
        if isinstance(stmt, S.Assign):
            yield stmt.var, S.prog_var_names(stmt.rhs), guards
        elif isinstance(stmt, S.FieldAssign):
            yield HEAP_VAR, S.prog_var_names(stmt.rhs) | {stmt.obj, HEAP_VAR}, guards
        elif isinstance(stmt, S.FieldRead):
            yield stmt.var, S.prog_var_names(stmt.source) | {HEAP_VAR}, guards
        elif isinstance(stmt, S.New):
            yield stmt.var, frozenset(), guards
        elif isinstance(stmt, S.If):
            inner = guards | S.prog_var_names(stmt.cond)
            yield from _assign_events(stmt.then, inner)
            yield from _assign_events(stmt.other, inner)
        elif isinstance(stmt, S.While):
            inner = guards | S.prog_var_names(stmt.cond)
            yield from _assign_events(stmt.body, inner)


def exec_while(st: SymState,
               signature: Optional[S.Signature] = None
               ) -> Tuple[List[ProofObligation], SymState]:
    stmt, st = st._consume()
    if stmt.invariant is not None:
        inv = stmt.invariant
    else:
        _, inv = generate_invariant(stmt)
    conjuncts = _inv_conjuncts(inv)
    loop_tag = f"loop@{st.fresh}"
    u = st.update
    premises: List[ProofObligation] = []

    # premise (i): the invariant holds under the current update
    for c in conjuncts:
        premises.append(_instantiate_conjunct(c, u, "loop-initial", loop_tag, st.context))

    # havoc the loop frame: modified variables and their ghosts become fresh
    modified = sorted(S.assigned_vars(stmt.body))
    havoc = u
    bounds = dict(st.bounds)
    opaque: Dict[str, HOpaque] = {}
    for x in modified:
        vname, st = _fresh_name(x, st)
        gname = f"{x}^dep{S.FRESH_MARK}{st.fresh}"
        st = replace(st, fresh=st.fresh + 1)
        sort = signature.vars.get(x, Sort.INT) if signature else Sort.INT
        havoc = havoc.set_var(x, S.FnApp(vname, (), sort))
        opaque[x] = HOpaque(gname)
        havoc = havoc.set_ghost(x, opaque[x])
    for c in conjuncts:
        if isinstance(c, S.SubsetOf) and c.dep.base in opaque:
            bounds[opaque[c.dep.base].name] = c.allowed
        elif isinstance(c, S.Eq) and c.left.base in opaque:
            havoc = havoc.set_ghost(
                c.left.base, normalize(E.subst_ghosts(c.right.ec, havoc.ghost_map())))
    havoc = simplify_update(havoc)

    cond_ec = normalize(apply_update(havoc, E.wrap(stmt.cond)))

    # premise (ii): the body preserves the invariant
    body_entry = replace(st, update=havoc,
                         remaining=S.stmts_of(stmt.body),
                         context=st.context + ((cond_ec, False),),
                         bounds=tuple(sorted(bounds.items())))
    body_exit = _run_block(body_entry, signature)
    for c in conjuncts:
        premises.append(_instantiate_conjunct(c, body_exit.update, "loop-preserved",
                                              loop_tag, body_exit.context))

    # branch (iii): continue after the loop from the havocked state
    cont = replace(st, update=havoc,
                   remaining=st.remaining,
                   fresh=body_exit.fresh,
                   context=st.context + ((cond_ec, True),),
                   obligations=body_exit.obligations,
                   bounds=body_exit.bounds,
                   steps=body_exit.steps)
    cont = _log(cont, f"loopInvariant with {len(conjuncts)} clause(s)")
    return premises, cont


def step(st: SymState, signature: Optional[S.Signature] = None) -> SymState:
    head = st.head()
    if isinstance(head, S.Assign):
        return exec_assign_local(st, signature)
    if isinstance(head, S.FieldAssign):
        return exec_assign_field(st, signature)
    if isinstance(head, S.FieldRead):
        return exec_field_read(st, signature)
    if isinstance(head, S.New):
        return exec_new(st, signature)
    if isinstance(head, S.If):
        return exec_if(st, signature)
    if isinstance(head, S.While):
        premises, out = exec_while(st, signature)
        return replace(out, obligations=out.obligations + tuple(premises))
    raise TypeError(f"unknown statement: {head!r}")


def _run_block(st: SymState, signature: Optional[S.Signature]) -> SymState:
    while st.remaining:
        st = step(st, signature)
    return st


# ---------------------------------------------------------------------------
# Driving


@dataclass(frozen=True)
class GoalRequest:
    """What to prove about the final state: a variable's ghost or a term."""

    label: str
    kind: str                     # "variable" | "goal-term"
    var: Optional[str] = None
    term: Optional[S.Term] = None
    allowed: frozenset = frozenset()


@dataclass
class SymexResult:
    obligations: List[ProofObligation]
    final: SymState

    def final_update(self) -> ParallelUpdate:
        return self.final.update


def symex_run(p: S.Program, goals=(),
              signature: Optional[S.Signature] = None) -> SymexResult:
    """Execute the whole program symbolically and emit one obligation per
    goal plus the loop-invariant premises encountered along the way."""
    st = SymState(remaining=S.stmts_of(p))
    st = _run_block(st, signature)
    obligations = list(st.obligations)
    for g in goals:
        if g.kind == "variable":
            e = normalize(st.update.ghost_payload(g.var))
        else:
            e = normalize(apply_update(st.update, E.wrap(g.term)))
        obligations.append(ProofObligation("goal", g.label,
                                           S.SubsetOf(S.ECLit(e), g.allowed),
                                           st.context))
    return SymexResult(obligations, st)
