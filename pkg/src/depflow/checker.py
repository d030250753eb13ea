"""Goal construction and discharge: per-variable security verdicts.

For each target the goal has the shape `deps(x^dep) <= LVL(x)` with one
declassification pair per released term at or below the target's level.
Discharge normalizes the final class, splits conditionals into both
branches, matches pairs against the path context, and falls back to the
homomorphic dependency set.  Verdicts are three-valued: a closed proof is
Secure, an escaping variable is Insecure, and failed loop-invariant
premises degrade to Unknown (a proof may exist, we just did not find one).
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from . import ec as E
from . import policy as PO
from . import printer
from . import symex as SX
from . import syntax as S
from .ec import ECTerm, Tri, normalize


# ---------------------------------------------------------------------------
# Path context and entailment


@dataclass(frozen=True)
class PathContext:
    """Normalized path knowledge: asserted and negated condition classes,
    plus dependency bounds for havocked ghosts."""

    asserted: frozenset = frozenset()
    negated: frozenset = frozenset()
    bounds: Tuple[Tuple[str, frozenset], ...] = ()
    universe: frozenset = frozenset()

    def assuming(self, e: ECTerm) -> "PathContext":
        return replace(self, asserted=self.asserted | _conjuncts(normalize(e)))

    def denying(self, e: ECTerm) -> "PathContext":
        return replace(self, negated=self.negated | {normalize(e)})

    def entails(self, e: ECTerm) -> Tri:
        e = normalize(e)
        if e == E.EC_TRUE:
            return Tri.YES
        if e == E.EC_FALSE:
            return Tri.NO
        if e in self.asserted:
            return Tri.YES
        if e in self.negated:
            return Tri.NO
        if isinstance(e, E.HApp) and e.op == "&&":
            a = self.entails(e.args[0])
            b = self.entails(e.args[1])
            if a is Tri.YES and b is Tri.YES:
                return Tri.YES
            if Tri.NO in (a, b):
                return Tri.NO
            return Tri.UNKNOWN
        if isinstance(e, E.HApp) and e.op == "!":
            inner = self.entails(e.args[0])
            if inner is Tri.YES:
                return Tri.NO
            if inner is Tri.NO:
                return Tri.YES
        return Tri.UNKNOWN

    def opaque_bound(self, name: str) -> frozenset:
        for n, b in self.bounds:
            if n == name:
                return b
        # an unconstrained havocked ghost may depend on anything
        return self.universe


def _conjuncts(e: ECTerm) -> frozenset:
    if isinstance(e, E.HApp) and e.op == "&&":
        return _conjuncts(e.args[0]) | _conjuncts(e.args[1])
    return frozenset({e})


def entails(ctx: PathContext, phi: S.Formula) -> Tri:
    """Entailment of a formula against the path context (sound, incomplete)."""
    return ctx.entails(E.wrap(phi))


def context_from(pairs: Iterable[Tuple[ECTerm, bool]], bounds=(),
                 universe=frozenset()) -> PathContext:
    ctx = PathContext(bounds=tuple(bounds), universe=frozenset(universe))
    for e, negated in pairs:
        ctx = ctx.denying(e) if negated else ctx.assuming(e)
    return ctx


# ---------------------------------------------------------------------------
# Verdicts


@dataclass
class Verdict:
    status: str                      # "secure" | "insecure" | "unknown"
    target: str
    kind: str                        # "variable" | "goal"
    allowed: frozenset
    computed: frozenset              # dependency set reported by the proof
    residual: frozenset              # computed - allowed (empty iff secure)
    trace: List[Tuple[str, str]] = field(default_factory=list)

    def to_dict(self, include_trace: bool = False) -> dict:
        d = {
            "target": self.target,
            "kind": self.kind,
            "status": self.status,
            "allowed": sorted(self.allowed),
            "deps": sorted(self.computed),
            "residual": sorted(self.residual),
            "trace_len": len(self.trace),
        }
        if include_trace:
            d["trace"] = [f"{rule}: {detail}" if detail else rule
                          for rule, detail in self.trace]
        return d


@dataclass
class AnalysisReport:
    verdicts: List[Verdict]
    premises: List[dict]
    program_digest: str
    policy_digest: str
    warnings: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def verdict_for(self, target: str) -> Verdict:
        for v in self.verdicts:
            if v.target == target:
                return v
        raise KeyError(target)

    def worst(self) -> str:
        statuses = {v.status for v in self.verdicts}
        if "insecure" in statuses:
            return "insecure"
        if "unknown" in statuses:
            return "unknown"
        return "secure"

    def to_dict(self, include_trace: bool = False) -> dict:
        return {
            "format": 1,
            "program_digest": self.program_digest,
            "policy_digest": self.policy_digest,
            "targets": [v.to_dict(include_trace) for v in self.verdicts],
            "loop_premises": self.premises,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Goal construction


@dataclass
class Goal:
    target: str
    kind: str
    allowed: frozenset
    pairs: List[E.DepsPair]


def build_pairs(level: str, pol: PO.SecurityPolicy) -> List[E.DepsPair]:
    out = []
    for pair in PO.dp_for_level(level, pol):
        out.append(E.DepsPair(
            cond=pair.when,
            cond_ec=normalize(E.wrap(pair.when)),
            what_ec=normalize(E.wrap(pair.what)),
            grant=PO.vars_at_or_below(pair.level, pol),
            label=pair.label()))
    return out


def build_goal(x: str, pol: PO.SecurityPolicy) -> Goal:
    """Security goal for a program variable: deps(x^dep) <= LVL(x) under the
    declassification pairs visible at lvl(x)."""
    allowed = PO.lvl_set(x, pol)
    return Goal(x, "variable", allowed, build_pairs(pol.level_of(x), pol))


# ---------------------------------------------------------------------------
# Discharge


def prove_inclusion(ob: SX.ProofObligation, pairs: List[E.DepsPair],
                    ctx: PathContext) -> Verdict:
    """Discharge `deps(e) <= allowed`, splitting conditional classes."""
    goal = ob.goal
    if not isinstance(goal, S.SubsetOf):
        raise TypeError("prove_inclusion expects a subset goal")
    e = goal.dep.ec if isinstance(goal.dep, S.ECLit) else E.HVar(goal.dep.base)
    allowed = goal.allowed
    trace: List[Tuple[str, str]] = []
    computed = _branch_deps(normalize(e), pairs, ctx, trace)
    residual = computed - allowed
    status = "secure" if not residual else "insecure"
    trace.append(("inclusion", f"{{{', '.join(sorted(computed))}}} <= "
                               f"{{{', '.join(sorted(allowed))}}}: {status}"))
    return Verdict(status, ob.target, ob.kind, allowed, computed, residual, trace)


def _branch_deps(e: ECTerm, pairs, ctx: PathContext,
                 trace: List[Tuple[str, str]]) -> frozenset:
    e = normalize(e)
    if isinstance(e, E.HCond):
        trace.append(("ifElseSplit", printer.pp_ec(e.cond)))
        then_ctx = ctx.assuming(e.cond)
        else_ctx = ctx.denying(e.cond)
        then_deps = (_deps_traced(e.cond, pairs, then_ctx, trace)
                     | _branch_deps(e.then, pairs, then_ctx, trace))
        else_deps = (_deps_traced(e.cond, pairs, else_ctx, trace)
                     | _branch_deps(e.other, pairs, else_ctx, trace))
        return then_deps | else_deps
    return _deps_traced(e, pairs, ctx, trace)


def _deps_traced(e: ECTerm, pairs, ctx: PathContext,
                 trace: List[Tuple[str, str]]) -> frozenset:
    events: List[Tuple[str, str]] = []
    out = E.deps(e, pairs, ctx, events)
    trace.extend(events)
    return out


def check_equality_premise(ob: SX.ProofObligation) -> bool:
    assert isinstance(ob.goal, S.Eq)
    return E.ec_equal(ob.goal.left.ec, ob.goal.right.ec)


# ---------------------------------------------------------------------------
# Whole-program check


def check_program(program: S.Program, pol: PO.SecurityPolicy,
                  signature: Optional[S.Signature] = None,
                  program_source: str = "", policy_source: str = "") -> AnalysisReport:
    """Analyze every program variable plus every explicit goal."""
    t0 = time.perf_counter()
    PO.validate_for_program(pol, program)
    if signature is None:
        signature = S.infer_signature(program)

    var_names = sorted(n for n in S.prog_var_names(program) if n != S.HEAP_VAR)
    universe = frozenset(var_names) | {S.HEAP_VAR}

    requests = [SX.GoalRequest(x, "variable", var=x, allowed=PO.lvl_set(x, pol))
                for x in var_names]
    for g in pol.goals:
        requests.append(SX.GoalRequest(g.label, "goal-term", term=g.term,
                                       allowed=g.allowed))
    result = SX.symex_run(program, requests, signature)
    t1 = time.perf_counter()

    premises = [ob for ob in result.obligations if ob.kind != "goal"]
    goal_obs = {ob.target: ob for ob in result.obligations if ob.kind == "goal"}

    premise_records = []
    all_premises_ok = True
    for ob in premises:
        ctx = context_from(ob.context, result.final.bounds, universe)
        if isinstance(ob.goal, S.Eq):
            ok = check_equality_premise(ob)
            detail = "class equality" if ok else "class equality not established"
        else:
            v = prove_inclusion(ob, [], ctx)
            ok = v.status == "secure"
            detail = f"deps {{{', '.join(sorted(v.computed))}}}"
        premise_records.append({"origin": f"{ob.kind} {ob.target}",
                                "status": "ok" if ok else "failed",
                                "detail": detail})
        all_premises_ok = all_premises_ok and ok

    verdicts = []
    for req in requests:
        ob = goal_obs[req.label]
        ctx = context_from(ob.context, result.final.bounds, universe)
        if req.kind == "variable":
            pairs = build_pairs(pol.level_of(req.var), pol)
        else:
            # explicit goals carry no level; no declassification applies
            pairs = []
        verdict = prove_inclusion(ob, pairs, ctx)
        if verdict.status == "secure" and not all_premises_ok:
            # without the invariant premises there is no closed proof
            verdict.status = "unknown"
            verdict.trace.append(("loopInvariant", "invariant premise failed"))
        verdict.kind = "variable" if req.kind == "variable" else "goal"
        verdicts.append(verdict)

    t2 = time.perf_counter()
    report = AnalysisReport(
        verdicts=verdicts,
        premises=premise_records,
        program_digest=_digest(program_source or printer.pp_program(program)),
        policy_digest=_digest(policy_source or pol.source),
        warnings=list(pol.warnings),
        timings={"symex": t1 - t0, "discharge": t2 - t1, "total": t2 - t0},
    )
    return report


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
