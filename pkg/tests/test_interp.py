"""Concrete semantics: evaluation fixtures and dependency tracking."""

import random

import pytest
from hypothesis import given, settings

from depflow import ec as E
from depflow import interp as I
from depflow import parser as P
from depflow import randgen
from depflow import syntax as S
from depflow.interp import FuelExhausted, init_state

import strategies as gen


def run(src, fuel=1000, **store):
    return I.eval_program(P.parse_program(src), init_state(store), fuel=fuel)


def run_dep(src, fuel=1000, **store):
    return I.eval_program_dep(P.parse_program(src),
                              init_state(store, with_ghosts=True), fuel=fuel)


# ---------------------------------------------------------------------------
# The evaluation fixtures (state x=4, assignment y=3)


def test_eval_term_with_assignment():
    # y is a logical variable, interpreted by the assignment beta
    st = init_state({"x": 4})
    t = S.ArithOp("+", S.LogVar("y"), S.IntLit(3))
    assert I.eval_term(t, st, beta={"y": 3}) == 6


def test_eval_box_overwrite():
    st = init_state({"x": 4})
    assert I.eval_formula(P.parse_formula("[x = 1; x = 2;](x == 1)"), st) is False


def test_eval_update_increment():
    st = init_state({"x": 4})
    out = I.eval_update(P.parse_update("{x := x + 1}"), st)
    assert out.store == {"x": 5}


def test_diverging_loop_exhausts_fuel():
    with pytest.raises(FuelExhausted):
        run("x = 1; while (x > 0) { x = x + 1; }", fuel=500, x=0)


def test_terminating_loop():
    out = run("x = 1; while (x > 0) { x = x - 1; }", x=5)
    assert out.store == {"x": 0}


def test_update_swap():
    st = init_state({"i": 1, "j": 2})
    out = I.eval_update(P.parse_update("{i := j || j := i}"), st)
    assert out.store == {"i": 2, "j": 1}


def test_update_last_wins():
    st = init_state({"x": 0})
    out = I.eval_update(P.parse_update("{x := 4 || x := 8}"), st)
    assert out.store["x"] == 8
    assert I.eval_formula(P.parse_formula("{x := 4 || x := 8}(x == 8)"), st) is True


def test_heap_select_past_store():
    heap = I.HeapVal().set(I.ObjRef(1), "b", 7)
    st = init_state({"heap": heap, "o": I.ObjRef(0), "u": I.ObjRef(1)})
    v = I.eval_term(P.parse_term("select(store(heap, o, a, 5), u, b)"), st)
    assert v == 7 == st.heap().get(I.ObjRef(1), "b")


def test_totalized_division():
    st = init_state({"x": 7})
    assert I.eval_term(P.parse_term("x / 0"), st) == 0
    assert I.eval_term(P.parse_term("x % 0"), st) == 0
    assert I.eval_term(P.parse_term("(0 - 7) / 2"), st) == -3  # truncation


def test_quantifiers_need_domain():
    st = init_state({"x": 1})
    f = P.parse_formula("\\exists y. y > x")
    with pytest.raises(S.UnsupportedConstruct):
        I.eval_formula(f, st)
    assert I.eval_formula(f, st, domain=(0, 1, 2)) is True
    assert I.eval_formula(f, st, domain=(0, 1)) is False


def test_field_statements():
    out = run("o.a = 5; x = o.a;", o=I.ObjRef(0), x=0, heap=I.HeapVal())
    assert out.store["x"] == 5


def test_new_allocates_by_counter():
    out = run("x = new; y = new;", x=0, y=0)
    assert out.store["x"] == I.ObjRef(0)
    assert out.store["y"] == I.ObjRef(1)
    assert out.alloc == 2


# ---------------------------------------------------------------------------
# Dependency tracking


def test_dep_cancellation():
    out = run_dep("x = y - y;", x=0, y=5)
    assert E.normalize(out.dep["x"]) == E.HConst(0)


def test_dep_equal_branches():
    out = run_dep("if (y != 0) { x = 8; } else { x = 8; }", x=0, y=1)
    assert E.normalize(out.dep["x"]) == E.HConst(8)


def test_dep_flows_through_copies():
    out = run_dep("x = y; z = x;", x=0, y=5, z=0)
    assert out.dep["z"] == E.HVar("y")


def test_dep_overwrite_forgets():
    out = run_dep("x = y; x = 8;", x=0, y=5)
    assert out.dep["x"] == E.HConst(8)


def test_dep_branch_combines_condition():
    out = run_dep("if (b > 0) { x = 1; } else { x = 2; }", b=1, x=0)
    d = out.dep["x"]
    assert isinstance(d, E.HCond)
    assert E.pvars(d) == frozenset({"b"})


def test_dep_loop_summary():
    out = run_dep("r = 0; while (m > 0) { r = r + n; m = m - 1; }", r=0, m=2, n=3)
    assert out.store["r"] == 6
    d = out.dep["r"]
    assert isinstance(d, E.HLoop)
    assert d.var == "r"
    assert [name for name, _ in d.captures] == ["m", "n", "r"]
    # r was zeroed before the loop, so its captured entry class is <0>
    assert dict(d.captures)["r"] == E.HConst(0)
    assert E.pvars(d) == frozenset({"m", "n"})


def test_dep_loop_summary_composes_entry_classes():
    out = run_dep("m = h; while (m > 0) { m = m - 1; }", m=0, h=2)
    assert E.pvars(out.dep["m"]) == frozenset({"h"})


def test_determinism():
    src = "x = y * y + 2; if (x > y) { z = x - y; } else { z = 0; }"
    a = run_dep(src, x=1, y=2, z=3)
    b = run_dep(src, x=1, y=2, z=3)
    assert a.store == b.store and a.dep == b.dep


# ---------------------------------------------------------------------------
# Properties


@settings(max_examples=100, deadline=None)
@given(gen.updates(), gen.terms(), gen.terms())
def test_update_last_wins_property(u, a, b):
    """Appending x := b after any updates not touching x afterwards wins."""
    st = init_state({v: 1 for v in gen.PROG_VARS})
    combined = S.ParUpd(S.ParUpd(u, S.ElemUpd(S.ProgVar("a"), a)),
                        S.ElemUpd(S.ProgVar("a"), b))
    out = I.eval_update(combined, st)
    assert out.store["a"] == I.eval_term(b, st)


def _states_over(names, values):
    import itertools
    for combo in itertools.product(values, repeat=len(names)):
        yield dict(zip(names, combo))


def test_dep_value_correctness_exhaustive():
    """The canonical representative of the final ghost, evaluated in the
    initial state, equals the final concrete value (loop-free programs)."""
    rng = random.Random(7)
    for _ in range(60):
        prog = randgen.gen_program(rng)
        names = sorted(S.prog_var_names(prog))
        for store in _states_over(names, (0, 1)):
            st = init_state(store, with_ghosts=True)
            out = I.eval_program_dep(prog, st)
            for x in names:
                rep = E.ec_to_term(out.dep[x])
                assert I.eval_term(rep, init_state(store)) == out.store[x]


def test_dep_state_independence():
    """Equal ghost stores yield equal final ghost stores, whatever the
    concrete values are."""
    rng = random.Random(8)
    for _ in range(60):
        prog = randgen.gen_program(rng)
        names = sorted(S.prog_var_names(prog))
        s1 = {x: rng.choice((0, 1, 2)) for x in names}
        s2 = {x: rng.choice((0, 1, 2)) for x in names}
        o1 = I.eval_program_dep(prog, init_state(s1, with_ghosts=True))
        o2 = I.eval_program_dep(prog, init_state(s2, with_ghosts=True))
        assert o1.dep == o2.dep
