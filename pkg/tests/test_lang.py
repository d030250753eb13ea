"""Grammar, printer round-trips, and well-formedness."""

import pytest
from hypothesis import given, settings

from depflow import parser as P
from depflow import printer
from depflow import syntax as S
from depflow.syntax import ParseError, SortError, UnsupportedConstruct

import strategies as gen
from conftest import load


def test_parse_cancellation_assignment():
    prog = P.parse_program("x = y - y;")
    expected = S.Seq((S.Assign("x", S.ArithOp("-", S.ProgVar("y"), S.ProgVar("y"))),))
    assert prog == expected


def test_parse_empty_program_is_skip():
    assert P.parse_program("") == S.Skip()
    assert P.parse_program("// only a comment\n") == S.Skip()


def test_parse_decrypt_fixture_shape():
    prog = P.parse_program(load("decrypt.prog"))
    assigns = [n for n in S.walk(prog) if isinstance(n, S.Assign)]
    ifs = [n for n in S.walk(prog) if isinstance(n, S.If)]
    # msg, paddingOk, checkSum and three res assignments
    assert len(assigns) == 6
    assert len(ifs) == 2
    outer = S.stmts_of(prog)[2]
    assert isinstance(outer, S.If)
    assert any(isinstance(n, S.If) for n in S.walk(outer.then))


def test_parse_formula_padding_condition():
    f = P.parse_formula("(cipher * key) % 256 == 0")
    expected = S.Eq(
        S.ArithOp("%", S.ArithOp("*", S.ProgVar("cipher"), S.ProgVar("key")),
                  S.IntLit(256)),
        S.IntLit(0))
    assert f == expected


def test_parse_formula_true():
    assert P.parse_formula("true") == S.TrueF()


def test_policy_expr_rejects_logical_variable():
    f = P.parse_formula("\\exists y. y > x")
    with pytest.raises(UnsupportedConstruct):
        S.validate_policy_expr(f)


def test_pretty_print_examples():
    assert printer.pretty_print(S.Assign("x", S.IntLit(1))) == "x = 1;"
    upd = S.ParUpd(S.ElemUpd(S.ProgVar("x"), S.IntLit(4)),
                   S.ElemUpd(S.ProgVar("x"), S.IntLit(8)))
    assert printer.pretty_print(upd) == "{x := 4 || x := 8}"
    cond = S.CondTerm(S.BoolTerm(S.ProgVar("b")), S.IntLit(1), S.IntLit(2))
    assert printer.pretty_print(cond) == "if(b)then(1)else(2)"


def test_precedence():
    t = P.parse_term("a + b * c")
    assert t == S.ArithOp("+", S.ProgVar("a"),
                          S.ArithOp("*", S.ProgVar("b"), S.ProgVar("c")))
    t = P.parse_term("a - b - c")
    assert t == S.ArithOp("-", S.ArithOp("-", S.ProgVar("a"), S.ProgVar("b")),
                          S.ProgVar("c"))
    f = P.parse_formula("a == 0 && b == 0 || c == 0")
    assert isinstance(f, S.Or) and isinstance(f.left, S.And)


def test_negative_literals():
    assert P.parse_term("-1") == S.IntLit(-1)
    assert P.parse_term("a - -1") == S.ArithOp("-", S.ProgVar("a"), S.IntLit(-1))
    assert P.parse_term("-a") == S.ArithOp("-", S.IntLit(0), S.ProgVar("a"))


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        P.parse_program("x = ;")
    assert exc.value.line == 1
    with pytest.raises(ParseError):
        P.parse_program("x = 1")  # missing semicolon


def test_sort_conflict_rejected():
    with pytest.raises(SortError):
        P.parse_program("x = 1; x = new;")
    with pytest.raises(SortError):
        P.parse_program("heap = 1;")


def test_bool_variable_inference():
    prog = P.parse_program("flag = x == 0; if (flag) { y = 1; }")
    sig = S.infer_signature(prog)
    assert sig.vars["flag"] is S.Sort.BOOL
    assert sig.vars["x"] is S.Sort.INT


def test_heap_statements_parse():
    prog = P.parse_program("o.f = 5; x = u.f; y = new;")
    stmts = S.stmts_of(prog)
    assert isinstance(stmts[0], S.FieldAssign)
    assert isinstance(stmts[1], S.FieldRead)
    assert isinstance(stmts[2], S.New)
    sig = S.infer_signature(prog)
    assert sig.vars["o"] is S.Sort.OBJECT
    assert sig.vars["y"] is S.Sort.OBJECT


def test_program_restriction_on_constructed_ast():
    bad = S.Seq((S.Assign("x", S.LogVar("y")),))
    with pytest.raises(UnsupportedConstruct):
        S.validate_program(bad)
    boxed = S.Seq((S.If(S.Box(S.Skip(), S.TrueF()), S.Skip(), S.Skip()),))
    with pytest.raises(UnsupportedConstruct):
        S.validate_program(boxed)


def test_while_invariant_annotation():
    prog = P.parse_program(
        'while (m > 0) invariant "deps(r^dep) <= {m, r, n}" { r = r + n; m = m - 1; }')
    loop = S.stmts_of(prog)[0]
    assert loop.invariant == S.SubsetOf(S.DepVar("r"), frozenset({"m", "r", "n"}))


def test_ec_literal_in_invariant():
    f = P.parse_formula("r^dep == <(m0 - m) * n>")
    assert isinstance(f, S.Eq)
    assert isinstance(f.left, S.DepVar)
    assert isinstance(f.right, S.ECLit)


def test_update_apply_syntax():
    f = P.parse_formula("{x := 4 || x := 8}(x == 8)")
    assert isinstance(f, S.UpdApplyFormula)
    t = P.parse_term("{i := a + 1}(i)")
    assert isinstance(t, S.UpdApplyTerm)


def test_box_syntax():
    f = P.parse_formula("[x = 1; x = 2;](x == 1)")
    assert isinstance(f, S.Box)
    assert len(S.stmts_of(f.program)) == 2


# ---------------------------------------------------------------------------
# Round-trips


@settings(max_examples=200, deadline=None)
@given(gen.terms())
def test_roundtrip_terms(t):
    assert P.parse_term(printer.pretty_print(t)) == t


@settings(max_examples=200, deadline=None)
@given(gen.formulas())
def test_roundtrip_formulas(f):
    assert P.parse_formula(printer.pretty_print(f)) == f


@settings(max_examples=100, deadline=None)
@given(gen.quantified())
def test_roundtrip_quantified(f):
    assert P.parse_formula(printer.pretty_print(f)) == f


@settings(max_examples=100, deadline=None)
@given(gen.updates())
def test_roundtrip_updates(u):
    assert P.parse_update(printer.pretty_print(u)) == u


@settings(max_examples=200, deadline=None)
@given(gen.programs())
def test_roundtrip_programs(p):
    assert P.parse_program(printer.pretty_print(p)) == p


def test_roundtrip_heap_and_goal_forms():
    for src in ("select(heap, objA, f)",
                "store(heap, o, a, 5)",
                "select(store(heap, o, a, 5), u, b)"):
        t = P.parse_term(src)
        assert P.parse_term(printer.pretty_print(t)) == t
    f = P.parse_formula("deps(x^dep) <= {x, y}")
    assert P.parse_formula(printer.pretty_print(f)) == f
    f = P.parse_formula("deps(<x + y>) == {x}")
    assert P.parse_formula(printer.pretty_print(f)) == f
