"""Concrete-syntax printer.

`pretty_print` renders any AST node (program, statement, term, formula,
update, or equivalence-class term) such that parsing the output yields a
structurally equal tree, for every tree expressible in the surface grammar.
Machine-generated names containing '#' render but do not re-parse.
"""

from __future__ import annotations

from . import ec as E
from . import syntax as S

# precedence levels; higher binds tighter
_P_IMPLIES = 10
_P_OR = 20
_P_AND = 30
_P_NOT = 40
_P_CMP = 50
_P_ADD = 60
_P_MUL = 70
_P_NEG = 80
_P_ATOM = 100

_ARITH_PREC = {"+": _P_ADD, "-": _P_ADD, "*": _P_MUL, "/": _P_MUL, "%": _P_MUL}


def _paren(s: str, node_prec: int, ctx_prec: int) -> str:
    return f"({s})" if node_prec < ctx_prec else s


def pp_term(t: S.Term, prec: int = 0) -> str:
    if isinstance(t, (S.ProgVar, S.LogVar)):
        return t.name
    if isinstance(t, S.IntLit):
        return _paren(str(t.value), _P_NEG if t.value < 0 else _P_ATOM, prec)
    if isinstance(t, S.BoolLit):
        return "true" if t.value else "false"
    if isinstance(t, S.FieldConst):
        return t.name
    if isinstance(t, S.DepVar):
        return f"{t.base}^dep"
    if isinstance(t, S.ECLit):
        return f"<{pp_ec(t.ec)}>"
    if isinstance(t, S.FnApp):
        if not t.args:
            return t.name
        return f"{t.name}({', '.join(pp_term(a) for a in t.args)})"
    if isinstance(t, S.ArithOp):
        p = _ARITH_PREC[t.op]
        s = f"{pp_term(t.left, p)} {t.op} {pp_term(t.right, p + 1)}"
        return _paren(s, p, prec)
    if isinstance(t, S.CondTerm):
        return f"if({pp_formula(t.cond)})then({pp_term(t.then)})else({pp_term(t.other)})"
    if isinstance(t, S.UpdApplyTerm):
        return f"{pp_update(t.update)}({pp_term(t.term)})"
    if isinstance(t, S.Store):
        args = (t.heap, t.obj, t.fieldref, t.value)
        return f"store({', '.join(pp_term(a) for a in args)})"
    if isinstance(t, S.Select):
        args = (t.heap, t.obj, t.fieldref)
        return f"select({', '.join(pp_term(a) for a in args)})"
    raise TypeError(f"unknown term: {t!r}")


def pp_formula(f: S.Formula, prec: int = 0) -> str:
    if isinstance(f, S.TrueF):
        return "true"
    if isinstance(f, S.FalseF):
        return "false"
    if isinstance(f, S.PredApp):
        s = f"{pp_term(f.args[0], _P_CMP + 1)} {f.op} {pp_term(f.args[1], _P_CMP + 1)}"
        return _paren(s, _P_CMP, prec)
    if isinstance(f, S.Eq):
        s = f"{pp_term(f.left, _P_CMP + 1)} == {pp_term(f.right, _P_CMP + 1)}"
        return _paren(s, _P_CMP, prec)
    if isinstance(f, S.Not):
        return _paren(f"!{pp_formula(f.sub, _P_NOT)}", _P_NOT, prec)
    if isinstance(f, S.And):
        s = f"{pp_formula(f.left, _P_AND)} && {pp_formula(f.right, _P_AND + 1)}"
        return _paren(s, _P_AND, prec)
    if isinstance(f, S.Or):
        s = f"{pp_formula(f.left, _P_OR)} || {pp_formula(f.right, _P_OR + 1)}"
        return _paren(s, _P_OR, prec)
    if isinstance(f, S.Implies):
        s = f"{pp_formula(f.left, _P_IMPLIES + 1)} -> {pp_formula(f.right, _P_IMPLIES)}"
        return _paren(s, _P_IMPLIES, prec)
    if isinstance(f, S.Exists):
        return _paren(f"\\exists {f.var}. {pp_formula(f.body)}", 5, prec)
    if isinstance(f, S.Forall):
        return _paren(f"\\forall {f.var}. {pp_formula(f.body)}", 5, prec)
    if isinstance(f, S.CondFormula):
        return (f"if({pp_formula(f.cond)})then({pp_formula(f.then)})"
                f"else({pp_formula(f.other)})")
    if isinstance(f, S.UpdApplyFormula):
        return f"{pp_update(f.update)}({pp_formula(f.formula)})"
    if isinstance(f, S.Box):
        return f"[{pp_program(f.program, inline=True)}]({pp_formula(f.formula)})"
    if isinstance(f, S.BoolTerm):
        return pp_term(f.term, prec)
    if isinstance(f, S.SubsetOf):
        return f"deps({pp_term(f.dep)}) <= {_pp_varset(f.allowed)}"
    if isinstance(f, S.DepsEq):
        return f"deps({pp_term(f.dep)}) == {_pp_varset(f.vars)}"
    raise TypeError(f"unknown formula: {f!r}")


def _pp_varset(vs) -> str:
    return "{" + ", ".join(sorted(vs)) + "}"


def pp_update(u: S.Update) -> str:
    elems = S.flatten_update(u)
    inner = " || ".join(f"{pp_term(e.target)} := {pp_term(e.value)}" for e in elems)
    return "{" + inner + "}"


def pp_stmt(s: S.Stmt, indent: int = 0, inline: bool = False) -> str:
    pad = "" if inline else "    " * indent
    if isinstance(s, S.Assign):
        rhs = pp_formula(s.rhs) if isinstance(s.rhs, S.Formula) else pp_term(s.rhs)
        return f"{pad}{s.var} = {rhs};"
    if isinstance(s, S.FieldAssign):
        return f"{pad}{s.obj}.{s.fieldname} = {pp_term(s.rhs)};"
    if isinstance(s, S.FieldRead):
        return f"{pad}{s.var} = {pp_term(s.source, _P_ATOM)}.{s.fieldname};"
    if isinstance(s, S.New):
        return f"{pad}{s.var} = new;"
    if isinstance(s, S.If):
        head = f"{pad}if ({pp_formula(s.cond)})"
        then = _pp_block(s.then, indent, inline)
        if isinstance(s.other, S.Skip):
            return f"{head} {then}"
        return f"{head} {then} else {_pp_block(s.other, indent, inline)}"
    if isinstance(s, S.While):
        head = f"{pad}while ({pp_formula(s.cond)})"
        if s.invariant is not None:
            head += f' invariant "{pp_formula(s.invariant)}"'
        return f"{head} {_pp_block(s.body, indent, inline)}"
    raise TypeError(f"unknown statement: {s!r}")


def _pp_block(p: S.Program, indent: int, inline: bool) -> str:
    stmts = S.stmts_of(p)
    if not stmts:
        return "{ }"
    if inline:
        return "{ " + " ".join(pp_stmt(s, 0, inline=True) for s in stmts) + " }"
    body = "\n".join(pp_stmt(s, indent + 1) for s in stmts)
    return "{\n" + body + "\n" + "    " * indent + "}"


def pp_program(p: S.Program, inline: bool = False) -> str:
    stmts = S.stmts_of(p)
    if not stmts:
        return ""
    if inline:
        return " ".join(pp_stmt(s, 0, inline=True) for s in stmts)
    return "\n".join(pp_stmt(s, 0) for s in stmts)


def pp_ec(e: E.ECTerm, prec: int = 0) -> str:
    if isinstance(e, E.HVar):
        return e.name
    if isinstance(e, E.HOpaque):
        return e.name
    if isinstance(e, E.HConst):
        v = e.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return _paren(str(v), _P_NEG if v < 0 else _P_ATOM, prec)
        if isinstance(v, E.FieldTag):
            return v.name
        if isinstance(v, E.AllocTag):
            return f"alloc{S.FRESH_MARK}{v.key}"
        return str(v)
    if isinstance(e, E.HApp):
        if e.op in S.ARITH_OPS:
            p = _ARITH_PREC[e.op]
            s = f"{pp_ec(e.args[0], p)} {e.op} {pp_ec(e.args[1], p + 1)}"
            return _paren(s, p, prec)
        if e.op in ("==",) + S.CMP_OPS:
            s = f"{pp_ec(e.args[0], _P_CMP + 1)} {e.op} {pp_ec(e.args[1], _P_CMP + 1)}"
            if e.op == ">":
                return f"({s})"  # a bare '>' would close an enclosing <...>
            return _paren(s, _P_CMP, prec)
        if e.op == "!":
            return _paren(f"!{pp_ec(e.args[0], _P_NOT)}", _P_NOT, prec)
        if e.op in ("&&", "||", "->"):
            p = {"&&": _P_AND, "||": _P_OR, "->": _P_IMPLIES}[e.op]
            s = f"{pp_ec(e.args[0], p)} {e.op} {pp_ec(e.args[1], p + 1)}"
            return _paren(s, p, prec)
        return f"{e.op}({', '.join(pp_ec(a) for a in e.args)})"
    if isinstance(e, E.HCond):
        return f"if({pp_ec(e.cond)})then({pp_ec(e.then)})else({pp_ec(e.other)})"
    if isinstance(e, E.HLoop):
        caps = ", ".join(n if c == E.HVar(n) else f"{n}={pp_ec(c)}" for n, c in e.captures)
        return f"W[{e.wid}]({e.var}; {caps})"
    raise TypeError(f"not an ECTerm: {e!r}")


def pretty_print(node) -> str:
    """Render any AST node in the concrete syntax."""
    if isinstance(node, (S.Program,)):
        return pp_program(node)
    if isinstance(node, S.Stmt):
        return pp_stmt(node)
    if isinstance(node, S.Update):
        return pp_update(node)
    if isinstance(node, S.Formula):
        return pp_formula(node)
    if isinstance(node, S.Term):
        return pp_term(node)
    if isinstance(node, E.ECTerm):
        return pp_ec(node)
    raise TypeError(f"cannot print {node!r}")
