"""Recursive-descent parser for programs, terms, formulas and updates.

Expressions are parsed with a unified grammar and classified as terms or
formulas afterwards; `true`/`false` and if-then-else coerce to whichever
side the context needs.  Programs are validated (restriction check plus
sort inference) before being returned.
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple, Union

from . import ec as E
from . import syntax as S
from .syntax import ParseError

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*)
    | (?P<int>\d+)
    | (?P<ident>[A-Za-z_][A-Za-z_0-9]*(\^dep)?)
    | (?P<string>"[^"\n]*")
    | (?P<op>\|\||&&|==|!=|<=|>=|->|:=|\\exists|\\forall|[-+*/%<>=!(){}\[\];,.])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"if", "then", "else", "while", "invariant", "new", "true", "false",
             "select", "store", "deps"}


class _Tok:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.value}"


def _tokenize(src: str) -> List[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0
        self.bound: List[str] = []  # quantifier scopes
        self.ec_depth = 0           # inside <...>, a bare '>' closes the literal

    # -- token plumbing ----------------------------------------------------

    def _peek(self) -> _Tok:
        return self.toks[self.pos]

    def _next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def _at(self, value: str) -> bool:
        t = self._peek()
        return t.value == value and t.kind in ("op", "ident")

    def _eat(self, value: str) -> bool:
        if self._at(value):
            self.pos += 1
            return True
        return False

    def _expect(self, value: str) -> _Tok:
        t = self._peek()
        if t.value != value:
            raise ParseError(f"expected {value!r}, found {t.value!r}", t.line, t.col)
        return self._next()

    def _fail(self, msg: str):
        t = self._peek()
        raise ParseError(msg, t.line, t.col)

    # -- coercions ----------------------------------------------------------

    def _as_term(self, e) -> S.Term:
        if isinstance(e, S.Term):
            return e
        if isinstance(e, S.TrueF):
            return S.BoolLit(True)
        if isinstance(e, S.FalseF):
            return S.BoolLit(False)
        if isinstance(e, S.CondFormula):
            return S.CondTerm(e.cond, self._as_term(e.then), self._as_term(e.other))
        self._fail("expected a term, found a formula")

    def _as_formula(self, e) -> S.Formula:
        if isinstance(e, S.Formula):
            return e
        return S.BoolTerm(e)

    # -- expressions ----------------------------------------------------------

    def _expr(self):
        return self._implies()

    def _implies(self):
        left = self._or()
        if self._at("->"):
            self._next()
            right = self._implies()
            return S.Implies(self._as_formula(left), self._as_formula(right))
        return left

    def _or(self):
        left = self._and()
        while self._at("||"):
            self._next()
            right = self._and()
            left = S.Or(self._as_formula(left), self._as_formula(right))
        return left

    def _and(self):
        left = self._unary_formula()
        while self._at("&&"):
            self._next()
            right = self._unary_formula()
            left = S.And(self._as_formula(left), self._as_formula(right))
        return left

    def _unary_formula(self):
        if self._at("!"):
            self._next()
            return S.Not(self._as_formula(self._unary_formula()))
        return self._cmp()

    def _cmp(self):
        left = self._add()
        t = self._peek()
        if t.value == ">" and self.ec_depth > 0:
            return left  # closes the enclosing <...>; parenthesize to compare
        if t.value in ("==", "!=", "<", "<=", ">", ">="):
            # a '<' opening an EC literal appears only in atom position,
            # never after a complete operand, so this is a comparison
            self._next()
            right = self._add()
            lt, rt = self._as_term(left), self._as_term(right)
            if t.value == "==":
                return S.Eq(lt, rt)
            if t.value == "!=":
                return S.Not(S.Eq(lt, rt))
            return S.PredApp(t.value, (lt, rt))
        return left

    def _add(self):
        left = self._mul()
        while self._peek().value in ("+", "-") and self._peek().kind == "op":
            op = self._next().value
            right = self._mul()
            left = S.ArithOp(op, self._as_term(left), self._as_term(right))
        return left

    def _mul(self):
        left = self._unary_term()
        while self._peek().value in ("*", "/", "%") and self._peek().kind == "op":
            op = self._next().value
            right = self._unary_term()
            left = S.ArithOp(op, self._as_term(left), self._as_term(right))
        return left

    def _unary_term(self):
        if self._at("-"):
            self._next()
            sub = self._unary_term()
            if isinstance(sub, S.IntLit):
                return S.IntLit(-sub.value)
            return S.ArithOp("-", S.IntLit(0), self._as_term(sub))
        return self._atom()

    def _atom(self):
        t = self._peek()
        if t.kind == "int":
            self._next()
            return S.IntLit(int(t.value))
        if t.value == "true":
            self._next()
            return S.TrueF()
        if t.value == "false":
            self._next()
            return S.FalseF()
        if t.value == "if":
            return self._ifthenelse()
        if t.value == "deps":
            return self._deps_formula()
        if t.value in ("select", "store"):
            return self._heap_fn()
        if t.value in ("\\exists", "\\forall"):
            return self._quantifier()
        if t.value == "(":
            self._next()
            e = self._expr()
            self._expect(")")
            return e
        if t.value == "{":
            upd = self._update()
            self._expect("(")
            e = self._expr()
            self._expect(")")
            if isinstance(e, S.Formula):
                return S.UpdApplyFormula(upd, e)
            return S.UpdApplyTerm(upd, e)
        if t.value == "[":
            self._next()
            prog = self._stmt_list(("]",))
            self._expect("]")
            self._expect("(")
            body = self._as_formula(self._expr())
            self._expect(")")
            return S.Box(prog, body)
        if t.value == "<":
            self._next()
            self.ec_depth += 1
            try:
                inner = self._expr()
            finally:
                self.ec_depth -= 1
            self._expect(">")
            return S.ECLit(E.wrap(inner))
        if t.kind == "ident":
            self._next()
            name = t.value
            if name in _KEYWORDS:
                raise ParseError(f"unexpected keyword {name!r}", t.line, t.col)
            if name.endswith("^dep"):
                return S.DepVar(name[:-4])
            if self._at("("):
                raise ParseError(f"unknown function {name!r}", t.line, t.col)
            if name in self.bound:
                return S.LogVar(name)
            return S.ProgVar(name)
        self._fail(f"unexpected token {t.value!r}")

    def _ifthenelse(self):
        self._expect("if")
        self._expect("(")
        cond = self._as_formula(self._expr())
        self._expect(")")
        self._expect("then")
        self._expect("(")
        b1 = self._expr()
        self._expect(")")
        self._expect("else")
        self._expect("(")
        b2 = self._expr()
        self._expect(")")
        if isinstance(b1, S.Formula) or isinstance(b2, S.Formula):
            return S.CondFormula(cond, self._as_formula(b1), self._as_formula(b2))
        return S.CondTerm(cond, b1, b2)

    def _deps_formula(self):
        self._expect("deps")
        self._expect("(")
        arg = self._as_term(self._expr())
        if not isinstance(arg, (S.DepVar, S.ECLit)):
            self._fail("deps(...) takes a ghost variable or an <...> class")
        self._expect(")")
        t = self._next()
        if t.value not in ("<=", "=="):
            raise ParseError("expected '<=' or '==' after deps(...)", t.line, t.col)
        vs = self._varset()
        return S.SubsetOf(arg, vs) if t.value == "<=" else S.DepsEq(arg, vs)

    def _varset(self) -> frozenset:
        self._expect("{")
        names = []
        if not self._at("}"):
            while True:
                tok = self._next()
                if tok.kind != "ident":
                    raise ParseError("expected a variable name", tok.line, tok.col)
                names.append(tok.value)
                if not self._eat(","):
                    break
        self._expect("}")
        return frozenset(names)

    def _heap_fn(self):
        kind = self._next().value
        self._expect("(")
        heap = self._as_term(self._expr())
        self._expect(",")
        obj = self._as_term(self._expr())
        self._expect(",")
        fieldref = self._field_arg()
        if kind == "store":
            self._expect(",")
            value = self._as_term(self._expr())
            self._expect(")")
            return S.Store(heap, obj, fieldref, value)
        self._expect(")")
        return S.Select(heap, obj, fieldref)

    def _field_arg(self) -> S.Term:
        e = self._as_term(self._expr())
        if isinstance(e, S.ProgVar):
            return S.FieldConst(e.name)
        return e

    def _quantifier(self):
        kind = self._next().value
        tok = self._next()
        if tok.kind != "ident" or tok.value in _KEYWORDS:
            raise ParseError("expected a variable after quantifier", tok.line, tok.col)
        self._expect(".")
        self.bound.append(tok.value)
        try:
            body = self._as_formula(self._expr())
        finally:
            self.bound.pop()
        return S.Exists(tok.value, body) if kind == "\\exists" else S.Forall(tok.value, body)

    # -- updates --------------------------------------------------------------

    def _update(self) -> S.Update:
        self._expect("{")
        elems = []
        while True:
            target = self._as_term(self._cmp())
            if not isinstance(target, (S.ProgVar, S.DepVar)):
                self._fail("update target must be a variable or ghost")
            self._expect(":=")
            # '||' separates parallel updates here, so payloads stop below it;
            # boolean payloads go through if(...)/true/false atoms
            value = self._as_term(self._cmp())
            elems.append(S.ElemUpd(target, value))
            if not self._eat("||"):
                break
        self._expect("}")
        return S.par_update(elems)

    # -- statements -------------------------------------------------------------

    def _stmt_list(self, stop: Tuple[str, ...]) -> S.Program:
        stmts = []
        while self._peek().kind != "eof" and self._peek().value not in stop:
            stmts.append(self._stmt())
        return S.seq(stmts)

    def _block(self) -> S.Program:
        self._expect("{")
        p = self._stmt_list(("}",))
        self._expect("}")
        return p

    def _stmt(self) -> S.Stmt:
        t = self._peek()
        if t.value == "if":
            self._next()
            self._expect("(")
            cond = self._as_formula(self._expr())
            self._expect(")")
            then = self._block()
            other: S.Program = S.Skip()
            if self._eat("else"):
                other = self._block()
            return S.If(cond, then, other)
        if t.value == "while":
            self._next()
            self._expect("(")
            cond = self._as_formula(self._expr())
            self._expect(")")
            invariant = None
            if self._eat("invariant"):
                tok = self._next()
                if tok.kind != "string":
                    raise ParseError("expected a quoted invariant", tok.line, tok.col)
                invariant = parse_formula(tok.value[1:-1])
            body = self._block()
            return S.While(cond, body, invariant)
        if t.kind == "ident" and t.value not in _KEYWORDS:
            name = self._next().value
            if name.endswith("^dep"):
                raise ParseError("ghost variables cannot be assigned", t.line, t.col)
            if self._eat("."):
                ftok = self._next()
                if ftok.kind != "ident":
                    raise ParseError("expected a field name", ftok.line, ftok.col)
                self._expect("=")
                rhs = self._as_term(self._expr())
                self._expect(";")
                return S.FieldAssign(name, ftok.value, rhs)
            self._expect("=")
            if self._at("new"):
                self._next()
                self._expect(";")
                return S.New(name)
            rhs = self._expr()
            if self._at("."):
                self._next()
                ftok = self._next()
                if ftok.kind != "ident":
                    raise ParseError("expected a field name", ftok.line, ftok.col)
                self._expect(";")
                return S.FieldRead(name, self._as_term(rhs), ftok.value)
            self._expect(";")
            return S.Assign(name, rhs)
        self._fail(f"expected a statement, found {t.value!r}")

    def _finish(self):
        t = self._peek()
        if t.kind != "eof":
            raise ParseError(f"trailing input {t.value!r}", t.line, t.col)


# ---------------------------------------------------------------------------
# Entry points


def parse_program(src: str) -> S.Program:
    """Parse and validate a program; raises on syntax or sort errors."""
    p = _Parser(src)
    prog = p._stmt_list(())
    p._finish()
    S.validate_program(prog)
    S.infer_signature(prog)
    return prog


def parse_term(src: str) -> S.Term:
    p = _Parser(src)
    e = p._as_term(p._expr())
    p._finish()
    return e


def parse_formula(src: str) -> S.Formula:
    p = _Parser(src)
    e = p._as_formula(p._expr())
    p._finish()
    return e


def parse_expr(src: str):
    """Parse as whichever of term/formula the expression naturally is."""
    p = _Parser(src)
    e = p._expr()
    p._finish()
    return e


def parse_update(src: str) -> S.Update:
    p = _Parser(src)
    u = p._update()
    p._finish()
    return u
