"""Brute-force finite-domain ground truth for the security definitions.

Programs are run once from every initial state over a finite domain; the
two-run definitions (non-interference, DP-equivalence, dependency sets) are
then checked by comparing the precomputed runs pairwise.  A run that
exhausts its fuel makes the affected query Inconclusive, never "secure":
an exhausted bound is not agreement.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import interp as I
from . import policy as PO
from . import syntax as S
from .interp import FuelExhausted, HeapVal, ObjRef, State
from .syntax import HEAP_VAR, Sort

DEFAULT_STATE_CAP = 200_000


class StateSpaceCap(Exception):
    """The requested enumeration exceeds the configured state-space cap."""


class Inconclusive:
    """Some run hit the fuel bound; the query has no finite-domain answer."""

    _instance: Optional["Inconclusive"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Inconclusive"


INCONCLUSIVE = Inconclusive()


@dataclass(frozen=True)
class FiniteDomain:
    """Desk-scale instantiation of "for all states": integer values to try,
    number of pre-allocated objects, and the loop fuel per run."""

    ints: Tuple[int, ...] = (0, 1)
    objects: int = 0
    fuel: int = 100

    def __post_init__(self):
        if len(self.ints) < 1 or self.fuel < 1:
            raise ValueError("domain needs at least one integer and fuel >= 1")


@dataclass
class Counterexample:
    s1: Dict[str, object]
    s2: Dict[str, object]
    var: str
    level: str
    v1: object
    v2: object

    def to_dict(self) -> dict:
        return {
            "s1": {k: _show(v) for k, v in sorted(self.s1.items())},
            "s2": {k: _show(v) for k, v in sorted(self.s2.items())},
            "var": self.var,
            "level": self.level,
            "final_values": [_show(self.v1), _show(self.v2)],
        }


def _show(v) -> object:
    if isinstance(v, ObjRef):
        return f"obj{v.id}"
    if isinstance(v, HeapVal):
        return {f"obj{o}.{f}": _show(x) for (o, f), x in v.cells}
    return v


def _state_cap() -> int:
    raw = os.environ.get("DEPFLOW_STATE_CAP", "")
    return int(raw) if raw.isdigit() else DEFAULT_STATE_CAP


# ---------------------------------------------------------------------------
# State enumeration and cached runs


def enumerate_states(sig: S.Signature, dom: FiniteDomain) -> List[State]:
    """All initial states over the domain, in a fixed deterministic order."""
    names = sorted(n for n in sig.vars if n != HEAP_VAR)
    axes: List[Tuple[str, Sequence[object]]] = []
    for n in names:
        sort = sig.vars[n]
        if sort is Sort.INT:
            axes.append((n, dom.ints))
        elif sort is Sort.BOOL:
            axes.append((n, (False, True)))
        elif sort is Sort.OBJECT:
            if dom.objects < 1:
                raise StateSpaceCap(
                    f"variable {n!r} has sort Object; set an object count >= 1")
            axes.append((n, tuple(ObjRef(i) for i in range(dom.objects))))
        else:
            raise StateSpaceCap(f"cannot enumerate sort {sort.value} of {n!r}")
    heap_cells: List[Tuple[Tuple[int, str], Sequence[object]]] = []
    if HEAP_VAR in sig.vars:
        for fname in sorted(sig.fields):
            fsort = sig.fields[fname]
            values: Sequence[object]
            if fsort is Sort.BOOL:
                values = (False, True)
            elif fsort is Sort.OBJECT:
                values = tuple(ObjRef(i) for i in range(dom.objects))
            else:
                values = dom.ints
            for oid in range(dom.objects):
                heap_cells.append(((oid, fname), values))

    total = 1
    for _, vals in axes:
        total *= max(len(vals), 1)
    for _, vals in heap_cells:
        total *= max(len(vals), 1)
    if total > _state_cap():
        raise StateSpaceCap(f"{total} states exceed the cap of {_state_cap()}; "
                            "set DEPFLOW_STATE_CAP to override")

    states = []
    var_products = itertools.product(*(vals for _, vals in axes))
    cell_products = list(itertools.product(*(vals for _, vals in heap_cells))) or [()]
    for var_choice in var_products:
        for cell_choice in cell_products:
            store: Dict[str, object] = dict(zip((n for n, _ in axes), var_choice))
            if HEAP_VAR in sig.vars:
                cells = tuple(sorted(zip((k for k, _ in heap_cells), cell_choice)))
                store[HEAP_VAR] = HeapVal(cells)
            st = State(store, {}, alloc=dom.objects)
            states.append(st)
    return states


class OracleRuns:
    """Every initial state run once; pairwise definitions become lookups."""

    def __init__(self, program: S.Program, dom: FiniteDomain,
                 extras: Iterable[Union[S.Term, S.Formula]] = ()):
        self.program = program
        self.dom = dom
        self.sig = S.infer_signature(program, extras)
        self.states = enumerate_states(self.sig, dom)
        self.finals: List[Optional[State]] = []
        for st in self.states:
            try:
                self.finals.append(I.eval_program(program, st, fuel=dom.fuel))
            except FuelExhausted:
                self.finals.append(None)

    def initial_value(self, idx: int, node: Union[S.Term, S.Formula]):
        st = self.states[idx]
        if isinstance(node, S.Formula):
            return I.eval_formula(node, st, domain=self.dom.ints)
        return I.eval_term(node, st, domain=self.dom.ints)

    def final_value(self, idx: int, node: Union[S.Term, S.Formula]):
        st = self.finals[idx]
        if st is None:
            return None
        if isinstance(node, S.Formula):
            return I.eval_formula(node, st, domain=self.dom.ints)
        return I.eval_term(node, st, domain=self.dom.ints)


def _policy_extras(pol: PO.SecurityPolicy) -> List[Union[S.Term, S.Formula]]:
    out: List[Union[S.Term, S.Formula]] = []
    for level in pol.lattice.topo_order():
        for pair in pol.de.get(level, []):
            out.append(pair.when)
            out.append(pair.what)
    for g in pol.goals:
        out.append(g.term)
    return out


# ---------------------------------------------------------------------------
# The literal definitions


def l_equivalent(s1: State, s2: State, level: str, pol: PO.SecurityPolicy) -> bool:
    """Agreement on every variable whose level is at or below `level`."""
    for x, lx in pol.lvl.items():
        if pol.lattice.leq(lx, level):
            if s1.store.get(x) != s2.store.get(x):
                return False
    return True


def dp_equivalent(s1: State, s2: State, dp: Sequence[PO.DeclassPair],
                  beta=None, domain=None) -> bool:
    """Agreement on each released term whose condition holds in both states."""
    for pair in dp:
        c1 = I.eval_formula(pair.when, s1, beta, domain)
        c2 = I.eval_formula(pair.when, s2, beta, domain)
        if c1 and c2:
            if isinstance(pair.what, S.Formula):
                v1 = I.eval_formula(pair.what, s1, beta, domain)
                v2 = I.eval_formula(pair.what, s2, beta, domain)
            else:
                v1 = I.eval_term(pair.what, s1, beta, domain)
                v2 = I.eval_term(pair.what, s2, beta, domain)
            if v1 != v2:
                return False
    return True


def _groups(runs: OracleRuns, key_nodes: Sequence[S.Term]) -> List[List[int]]:
    by_key: Dict[tuple, List[int]] = {}
    for idx in range(len(runs.states)):
        key = tuple(runs.initial_value(idx, t) for t in key_nodes)
        by_key.setdefault(key, []).append(idx)
    return list(by_key.values())


def _dp_tables(runs: OracleRuns, dp: Sequence[PO.DeclassPair]):
    tables = []
    for pair in dp:
        conds = [runs.initial_value(i, pair.when) for i in range(len(runs.states))]
        whats = [runs.initial_value(i, pair.what) for i in range(len(runs.states))]
        tables.append((conds, whats))
    return tables


def _dp_equiv_idx(tables, i: int, j: int) -> bool:
    for conds, whats in tables:
        if conds[i] and conds[j] and whats[i] != whats[j]:
            return False
    return True


def check_ni(program: S.Program, pol: PO.SecurityPolicy, dom: FiniteDomain,
             runs: Optional[OracleRuns] = None):
    """Def-6 check over all state pairs: None, a Counterexample, or
    Inconclusive when a relevant run exhausted its fuel."""
    PO.validate_for_program(pol, program)
    runs = runs or OracleRuns(program, dom, _policy_extras(pol))
    for x in sorted(runs.sig.vars):
        if x != HEAP_VAR and x not in pol.lvl:
            raise PO.PolicyError(f"variable {x!r} is not mapped by the policy")
    inconclusive = False
    for level in pol.lattice.topo_order():
        result = _check_level(runs, pol, level, None)
        if isinstance(result, Counterexample):
            return result
        if result is INCONCLUSIVE:
            inconclusive = True
    return INCONCLUSIVE if inconclusive else None


def check_ni_for_var(program: S.Program, pol: PO.SecurityPolicy, dom: FiniteDomain,
                     var: str, runs: Optional[OracleRuns] = None):
    """Def-6 restricted to disagreement at one observed variable."""
    runs = runs or OracleRuns(program, dom, _policy_extras(pol))
    return _check_level(runs, pol, pol.level_of(var), var)


def _check_level(runs: OracleRuns, pol: PO.SecurityPolicy, level: str,
                 only_var: Optional[str]):
    low_vars = sorted(x for x in runs.sig.vars
                      if x in pol.lvl and pol.lattice.leq(pol.lvl[x], level))
    watch = [only_var] if only_var else low_vars
    dp = PO.dp_for_level(level, pol)
    tables = _dp_tables(runs, dp)
    inconclusive = False
    for group in _groups(runs, [S.ProgVar(x) for x in low_vars]):
        for a_pos, i in enumerate(group):
            for j in group[a_pos + 1:]:
                if not _dp_equiv_idx(tables, i, j):
                    continue
                fi, fj = runs.finals[i], runs.finals[j]
                if fi is None or fj is None:
                    inconclusive = True
                    continue
                for x in watch:
                    if fi.store.get(x) != fj.store.get(x):
                        return Counterexample(
                            dict(runs.states[i].store), dict(runs.states[j].store),
                            x, level, fi.store.get(x), fj.store.get(x))
    return INCONCLUSIVE if inconclusive else None


def check_dep_set(program: S.Program, t: Union[S.Term, S.Formula], dep_set: frozenset,
                  dp: Sequence[PO.DeclassPair], dom: FiniteDomain,
                  runs: Optional[OracleRuns] = None):
    """Def-7 closure check for a candidate dependency set.

    True iff DP-equivalence plus initial agreement on `dep_set` forces
    agreement on the final value of `t`; validates analyzer outputs without
    computing the minimal set.
    """
    extras: List[Union[S.Term, S.Formula]] = [t]
    for pair in dp:
        extras.extend((pair.when, pair.what))
    runs = runs or OracleRuns(program, dom, extras)
    tables = _dp_tables(runs, dp)
    key_nodes = [S.ProgVar(x) for x in sorted(dep_set)]
    finals_t = [runs.final_value(i, t) for i in range(len(runs.states))]
    inconclusive = False
    for group in _groups(runs, key_nodes):
        for a_pos, i in enumerate(group):
            for j in group[a_pos + 1:]:
                if not _dp_equiv_idx(tables, i, j):
                    continue
                if runs.finals[i] is None or runs.finals[j] is None:
                    inconclusive = True
                    continue
                if finals_t[i] != finals_t[j]:
                    return False
    return INCONCLUSIVE if inconclusive else True


def minimal_dep_sets(program: S.Program, t: Union[S.Term, S.Formula],
                     dp: Sequence[PO.DeclassPair], dom: FiniteDomain,
                     max_vars: int = 5) -> List[frozenset]:
    """All inclusion-minimal dependency sets, by subset enumeration."""
    extras: List[Union[S.Term, S.Formula]] = [t]
    for pair in dp:
        extras.extend((pair.when, pair.what))
    runs = OracleRuns(program, dom, extras)
    names = sorted(n for n in runs.sig.vars if n != HEAP_VAR)
    if len(names) > max_vars:
        raise StateSpaceCap(f"{len(names)} variables exceed the subset-search cap")
    minimal: List[frozenset] = []
    for size in range(len(names) + 1):
        for combo in itertools.combinations(names, size):
            cand = frozenset(combo)
            if any(m <= cand for m in minimal):
                continue
            if check_dep_set(program, t, cand, dp, dom, runs) is True:
                minimal.append(cand)
    return minimal
