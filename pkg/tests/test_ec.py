"""Herbrand classes: wrap, normalization, pvars, deps."""

import itertools

import pytest
from hypothesis import given, settings

from depflow import checker as C
from depflow import ec as E
from depflow import interp as I
from depflow import oracle as O
from depflow import parser as P
from depflow import syntax as S
from depflow.ec import HApp, HCond, HConst, HVar, normalize

import strategies as gen


def ctx(universe=(), **bounds):
    return C.PathContext(bounds=tuple(sorted((k, frozenset(v)) for k, v in bounds.items())),
                         universe=frozenset(universe))


def pair(when_src, what_src, grant):
    when = P.parse_formula(when_src)
    what = P.parse_expr(what_src)
    return E.DepsPair(when, normalize(E.wrap(when)), normalize(E.wrap(what)),
                      frozenset(grant), "test pair")


# ---------------------------------------------------------------------------
# wrap


def test_wrap_addition_uses_ghosts():
    t = P.parse_term("x + y")
    assert E.wrap(t) == HApp("+", (HVar("x"), HVar("y")))


def test_wrap_constant():
    assert E.wrap(S.IntLit(17)) == HConst(17)


def test_wrap_substitutes_dependency_env():
    f = P.parse_formula("msg % 256 == 0")
    env = {"msg": normalize(E.wrap(P.parse_term("cipher * key")))}
    got = E.wrap(f, env)
    want = HApp("==", (HApp("%", (HApp("*", (HVar("cipher"), HVar("key"))),
                                  HConst(256))), HConst(0)))
    assert got == want


def test_wrap_rejects_quantifiers():
    with pytest.raises(S.UnsupportedConstruct):
        E.wrap(S.Exists("y", S.TrueF()))


# ---------------------------------------------------------------------------
# normalize


def test_normalize_cancellation():
    assert normalize(HApp("-", (HVar("x"), HVar("x")))) == HConst(0)


def test_normalize_additive_identity_and_units():
    assert normalize(HApp("+", (HVar("x"), HConst(0)))) == HVar("x")
    assert normalize(HApp("*", (HVar("x"), HConst(1)))) == HVar("x")
    assert normalize(HApp("*", (HVar("x"), HConst(0)))) == HConst(0)


def test_normalize_constant_folding():
    assert normalize(E.wrap(P.parse_term("2 + 3 * 4"))) == HConst(14)
    assert normalize(E.wrap(P.parse_formula("2 < 3"))) == E.EC_TRUE
    assert normalize(E.wrap(P.parse_formula("!(1 == 1)"))) == E.EC_FALSE


def test_normalize_conditional_hoisting():
    # if(c1) then (if(c2) a else b) else b  ~>  if(c1 && c2) a else b
    phi1 = E.wrap(P.parse_formula("x == 0"))
    phi2 = E.wrap(P.parse_formula("y == 0"))
    ck = E.wrap(P.parse_term("c * k"))
    minus1 = HConst(-1)
    nested = HCond(phi1, HCond(phi2, ck, minus1), minus1)
    want = HCond(normalize(HApp("&&", (phi1, phi2))), normalize(ck), minus1)
    assert normalize(nested) == want


def test_normalize_equal_branches():
    c = E.wrap(P.parse_formula("x == 0"))
    assert normalize(HCond(c, HConst(5), HConst(5))) == HConst(5)


def test_normalize_select_over_store():
    heap, o, u = HVar("heap"), HVar("o"), HVar("u")
    fa, fb = HConst(E.FieldTag("a")), HConst(E.FieldTag("b"))
    stored = HApp("store", (heap, o, fa, HConst(5)))
    # distinct field names are distinct fields: the store is skipped
    assert normalize(HApp("select", (stored, u, fb))) == HApp("select", (heap, u, fb))
    # same object, same field: the stored value is read back
    assert normalize(HApp("select", (stored, o, fa))) == HConst(5)
    # aliasing between different variables is undecidable: keep the node
    kept = normalize(HApp("select", (stored, u, fa)))
    assert kept == HApp("select", (normalize(stored), u, fa))


def test_ec_equal_commutativity():
    assert E.ec_equal(E.wrap(P.parse_term("x + y")), E.wrap(P.parse_term("y + x")))
    assert E.ec_equal(E.wrap(P.parse_term("x - x")), HConst(0))
    assert not E.ec_equal(HVar("x"), HVar("y"))


def test_ec_equal_distribution():
    a = E.wrap(P.parse_term("(m0 - m) * n + n"))
    b = E.wrap(P.parse_term("(m0 - (m - 1)) * n"))
    assert E.ec_equal(a, b)


# ---------------------------------------------------------------------------
# pvars


def test_pvars_cases():
    assert E.pvars(HApp("+", (HVar("x"), HConst(17)))) == frozenset({"x"})
    assert E.pvars(HConst(0)) == frozenset()
    summary = E.loop_summary("W1", "r", ["m", "r", "n"])
    assert E.pvars(summary) == frozenset({"m", "r", "n"})


# ---------------------------------------------------------------------------
# deps


def test_deps_constant_is_empty():
    assert E.deps(HConst(-1), [pair("true", "x", {"res"})], ctx()) == frozenset()


def test_deps_grant_on_match():
    pr = pair("cipher * key > 0", "cipher * key", {"res"})
    e = E.wrap(P.parse_term("cipher * key"))
    granting = ctx().assuming(pr.cond_ec)
    assert E.deps(e, [pr], granting) == frozenset({"res"})
    # without the condition in the context the fallback applies
    assert E.deps(e, [pr], ctx()) == frozenset({"cipher", "key"})


def test_deps_homomorphic_union():
    e = HApp("+", (HVar("x"), HVar("y")))
    assert E.deps(e, [], ctx()) == frozenset({"x", "y"})


def test_deps_conditional_union_without_split():
    e = HCond(E.wrap(P.parse_formula("h == 0")), HVar("a"), HVar("b"))
    assert E.deps(e, [], ctx()) == frozenset({"h", "a", "b"})


def test_deps_opaque_uses_bounds():
    e = E.HOpaque("r^dep#1")
    bounded = ctx(universe=("m", "n", "r", "q"), **{"r^dep#1": ("m", "n", "r")})
    assert E.deps(e, [], bounded) == frozenset({"m", "n", "r"})
    unbounded = ctx(universe=("m", "n", "r", "q"))
    assert E.deps(e, [], unbounded) == frozenset({"m", "n", "r", "q"})


def test_deps_matching_is_modulo_normalization():
    pr = pair("true", "y + x", {"res"})
    assert E.deps(E.wrap(P.parse_term("x + y")), [pr], ctx()) == frozenset({"res"})


def test_first_matching_pair_wins():
    p1 = pair("true", "x + y", {"res"})
    p2 = pair("true", "y + x", {"zzz"})
    e = E.wrap(P.parse_term("x + y"))
    assert E.deps(e, [p1, p2], ctx()) == frozenset({"res"})


# ---------------------------------------------------------------------------
# Properties


def _eval_states(names, values):
    for combo in itertools.product(values, repeat=len(names)):
        yield I.init_state(dict(zip(names, combo)))


@settings(max_examples=150, deadline=None)
@given(gen.ec_terms())
def test_normalize_idempotent(e):
    n = normalize(e)
    assert normalize(n) == n


@settings(max_examples=150, deadline=None)
@given(gen.ec_terms())
def test_normalize_preserves_evaluation(e):
    rep = E.ec_to_term(e)
    rep_n = E.ec_to_term(normalize(e))
    for st in _eval_states(gen.PROG_VARS, (0, 1, 2)):
        assert I.eval_term(rep, st) == I.eval_term(rep_n, st)


@settings(max_examples=80, deadline=None)
@given(gen.terms())
def test_wrap_preserves_evaluation(t):
    rep = E.ec_to_term(E.wrap(t))
    for st in _eval_states(gen.PROG_VARS, (0, 1)):
        assert I.eval_term(rep, st) == I.eval_term(t, st)


@settings(max_examples=150, deadline=None)
@given(gen.ec_terms())
def test_normalize_never_adds_variables(e):
    assert E.pvars(normalize(e)) <= E.pvars(e)


@settings(max_examples=40, deadline=None)
@given(gen.ec_terms())
def test_pvars_overapproximates_semantic_deps(e):
    """Every minimal dependency set of the representative is within pvars."""
    t = E.ec_to_term(e)
    dom = O.FiniteDomain((0, 1), 0, 10)
    for d in O.minimal_dep_sets(S.Skip(), t, [], dom):
        assert d <= E.pvars(e)


@settings(max_examples=80, deadline=None)
@given(gen.ec_terms())
def test_deps_within_pvars_or_grants(e):
    pairs = [pair("true", "a + b", {"g1"}), pair("a > 0", "a * c", {"g2"})]
    granting = ctx().assuming(pairs[1].cond_ec)
    out = E.deps(e, pairs, granting)
    assert out <= E.pvars(e) | frozenset({"g1", "g2"})
