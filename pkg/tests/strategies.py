"""Hypothesis strategies for surface-grammar ASTs and equivalence classes."""

from hypothesis import strategies as st

from depflow import ec as E
from depflow import syntax as S

PROG_VARS = ("a", "b", "c")
LOG_VARS = ("p", "q")
FIELDS = ("f", "g")

ints = st.integers(min_value=-3, max_value=5).map(S.IntLit)
prog_vars = st.sampled_from(PROG_VARS).map(S.ProgVar)

# arithmetic-only terms; conditionals are layered on top to avoid mutual
# recursion between the term and formula strategies
flat_terms = st.recursive(
    st.one_of(ints, prog_vars),
    lambda children: st.tuples(st.sampled_from(S.ARITH_OPS), children, children)
    .map(lambda t: S.ArithOp(*t)),
    max_leaves=6)

_pair = st.tuples(flat_terms, flat_terms)
comparisons = st.one_of(
    _pair.map(lambda p: S.Eq(*p)),
    st.tuples(st.sampled_from(S.CMP_OPS), _pair).map(lambda t: S.PredApp(t[0], t[1])),
)

flat_formulas = st.recursive(
    st.one_of(st.just(S.TrueF()), st.just(S.FalseF()), comparisons),
    lambda children: st.one_of(
        children.map(S.Not),
        st.tuples(children, children).map(lambda p: S.And(*p)),
        st.tuples(children, children).map(lambda p: S.Or(*p)),
        st.tuples(children, children).map(lambda p: S.Implies(*p)),
    ),
    max_leaves=5)


def terms():
    cond = st.tuples(flat_formulas, flat_terms, flat_terms).map(lambda t: S.CondTerm(*t))
    return st.recursive(
        st.one_of(ints, prog_vars, cond),
        lambda children: st.tuples(st.sampled_from(S.ARITH_OPS), children, children)
        .map(lambda t: S.ArithOp(*t)),
        max_leaves=6)


def formulas():
    cond = st.tuples(flat_formulas, flat_formulas, flat_formulas).map(
        lambda t: S.CondFormula(*t))
    return st.recursive(
        st.one_of(st.just(S.TrueF()), st.just(S.FalseF()), comparisons, cond),
        lambda children: st.one_of(
            children.map(S.Not),
            st.tuples(children, children).map(lambda p: S.And(*p)),
            st.tuples(children, children).map(lambda p: S.Or(*p)),
            st.tuples(children, children).map(lambda p: S.Implies(*p)),
        ),
        max_leaves=6)


def quantified():
    v = st.sampled_from(LOG_VARS)
    return st.tuples(st.booleans(), v, flat_terms).map(
        lambda t: (S.Exists if t[0] else S.Forall)(
            t[1], S.PredApp(">", (S.LogVar(t[1]), t[2]))))


def updates():
    elem = st.tuples(prog_vars, terms()).map(lambda p: S.ElemUpd(*p))
    return st.lists(elem, min_size=1, max_size=3).map(S.par_update)


def statements(depth: int = 2):
    assign = st.tuples(st.sampled_from(PROG_VARS), terms()).map(lambda p: S.Assign(*p))
    bool_assign = st.tuples(st.sampled_from(("t1", "t2")), flat_formulas).map(
        lambda p: S.Assign(*p))
    if depth <= 0:
        return st.one_of(assign, bool_assign)
    ifs = st.tuples(comparisons, blocks(depth - 1), blocks(depth - 1)).map(
        lambda t: S.If(*t))
    return st.one_of(assign, assign, bool_assign, ifs)


def blocks(depth: int = 2):
    return st.lists(statements(depth), min_size=0, max_size=3).map(S.seq)


def programs():
    return st.lists(statements(2), min_size=0, max_size=4).map(S.seq)


# --- equivalence-class terms over <= 3 int variables ------------------------

ec_vars = st.sampled_from(PROG_VARS).map(E.HVar)
ec_ints = st.integers(min_value=-2, max_value=3).map(E.HConst)

_flat_ec = st.recursive(
    st.one_of(ec_vars, ec_ints),
    lambda children: st.tuples(st.sampled_from(("+", "-", "*", "/", "%")),
                               children, children)
    .map(lambda t: E.HApp(t[0], (t[1], t[2]))),
    max_leaves=8)

_ec_cmp = st.tuples(st.sampled_from(("==", "<", "<=", ">", ">=")),
                    _flat_ec, _flat_ec).map(lambda t: E.HApp(t[0], (t[1], t[2])))

ec_bools = st.recursive(
    st.one_of(st.sampled_from((E.EC_TRUE, E.EC_FALSE)), _ec_cmp),
    lambda children: st.one_of(
        children.map(lambda c: E.HApp("!", (c,))),
        st.tuples(st.sampled_from(("&&", "||")), children, children)
        .map(lambda t: E.HApp(t[0], (t[1], t[2]))),
    ),
    max_leaves=4)


def ec_terms():
    cond = st.tuples(ec_bools, _flat_ec, _flat_ec).map(lambda t: E.HCond(*t))
    return st.recursive(
        st.one_of(ec_vars, ec_ints, cond),
        lambda children: st.tuples(st.sampled_from(("+", "-", "*", "/", "%")),
                                   children, children)
        .map(lambda t: E.HApp(t[0], (t[1], t[2]))),
        max_leaves=10)
