"""Command-line entry point.

    depflow analyze <prog> --policy <file> [--oracle] [--domain 0,1,2]
        [--objects N] [--fuel N] [--trace] [--format text|json] [--out FILE]

Exit codes: 0 all targets secure, 1 some target insecure (or a soundness
bug), 2 some target unknown and none insecure, 3 usage/parse/policy error.
The structured report is deterministic: identical inputs and flags produce
byte-identical output (timings never enter the report body).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import List, Optional

from . import checker as C
from . import oracle as O
from . import parser as P
from . import policy as PO
from . import syntax as S
from .syntax import LangError


@dataclass
class RunConfig:
    program_path: str
    policy_path: str
    mode: str = "analyze"            # "analyze" | "both"
    domain: Optional[tuple] = None
    objects: int = 0
    fuel: int = 100
    trace: bool = False
    out_format: str = "text"
    out_path: Optional[str] = None


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="depflow",
                                 description="dependency-based information-flow analyzer")
    sub = ap.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", help="check a program against a policy")
    an.add_argument("program", help="program file")
    an.add_argument("--policy", required=True, help="policy file")
    an.add_argument("--oracle", action="store_true",
                    help="also run the finite-domain oracle (requires --domain)")
    an.add_argument("--domain", default=None,
                    help="comma-separated integers, e.g. 0,1,2")
    an.add_argument("--objects", type=int, default=0, help="pre-allocated object count")
    an.add_argument("--fuel", type=int, default=100, help="loop budget per oracle run")
    an.add_argument("--trace", action="store_true", help="include proof traces")
    an.add_argument("--format", choices=("text", "json"), default="text")
    an.add_argument("--out", default=None, help="also write the structured report here")
    return ap


def _parse_domain(raw: str) -> tuple:
    try:
        return tuple(int(x) for x in raw.split(","))
    except ValueError:
        raise LangError(f"bad --domain value {raw!r}; expected e.g. 0,1,2")


def run_analysis(cfg: RunConfig) -> dict:
    with open(cfg.program_path, "r", encoding="utf-8") as fh:
        prog_src = fh.read()
    with open(cfg.policy_path, "r", encoding="utf-8") as fh:
        pol_src = fh.read()
    program = P.parse_program(prog_src)
    pol = PO.load_policy(pol_src)
    report = C.check_program(program, pol, program_source=prog_src, policy_source=pol_src)
    doc = report.to_dict(include_trace=cfg.trace)
    doc["status"] = report.worst()
    if cfg.mode == "both":
        doc["oracle"] = run_both(cfg, program, pol, report)
        if doc["oracle"]["soundness_bugs"]:
            doc["status"] = "insecure"
    return doc


def run_both(cfg: RunConfig, program: S.Program, pol: PO.SecurityPolicy,
             report: C.AnalysisReport) -> dict:
    """Cross-check the checker against the oracle; a Secure verdict refuted
    by a concrete counterexample is recorded as a SOUNDNESS-BUG."""
    if cfg.domain is None:
        raise LangError("--oracle requires --domain")
    dom = O.FiniteDomain(cfg.domain, cfg.objects, cfg.fuel)
    runs = O.OracleRuns(program, dom, O._policy_extras(pol))
    targets = []
    bugs: List[str] = []
    for v in report.verdicts:
        entry = {"target": v.target}
        if v.kind == "variable":
            outcome = O.check_ni_for_var(program, pol, dom, v.target, runs)
            dp = PO.dp_for_level(pol.level_of(v.target), pol)
            depset_ok = O.check_dep_set(program, S.ProgVar(v.target), v.computed,
                                        dp, dom, runs)
        else:
            goal = next(g for g in pol.goals if g.label == v.target)
            depset_ok = O.check_dep_set(program, goal.term, v.computed, [], dom, runs)
            outcome = None if depset_ok is True else (
                O.INCONCLUSIVE if depset_ok is O.INCONCLUSIVE else
                O.Counterexample({}, {}, v.target, "-", None, None))
        if isinstance(outcome, O.Counterexample):
            entry["outcome"] = "counterexample"
            if outcome.s1 or outcome.s2:
                entry["witness"] = outcome.to_dict()
        elif outcome is O.INCONCLUSIVE:
            entry["outcome"] = "inconclusive"
        else:
            entry["outcome"] = "none"
        entry["depset_ok"] = (True if depset_ok is True else
                              "inconclusive" if depset_ok is O.INCONCLUSIVE else False)
        if v.status == "secure":
            if entry["outcome"] == "counterexample" or entry["depset_ok"] is False:
                bugs.append(f"SOUNDNESS-BUG: {v.target} verified secure but refuted "
                            "by the oracle")
        targets.append(entry)
    return {
        "domain": list(cfg.domain),
        "objects": cfg.objects,
        "fuel": cfg.fuel,
        "targets": targets,
        "soundness_bugs": bugs,
    }


def render_text(doc: dict) -> str:
    lines = []
    lines.append(f"depflow report (format {doc['format']})")
    lines.append(f"program {doc['program_digest']}  policy {doc['policy_digest']}")
    lines.append("targets:")
    for t in doc["targets"]:
        extra = ""
        if t["residual"]:
            extra = "  residual={" + ", ".join(t["residual"]) + "}"
        lines.append(f"  {t['target']:<12} {t['kind']:<8} {t['status'].upper():<9}"
                     f" deps={{{', '.join(t['deps'])}}}"
                     f" allowed={{{', '.join(t['allowed'])}}}{extra}")
        for step in t.get("trace", []):
            lines.append(f"      . {step}")
    if doc["loop_premises"]:
        lines.append("loop premises:")
        for p in doc["loop_premises"]:
            lines.append(f"  {p['origin']:<28} {p['status']:<7} {p['detail']}")
    for w in doc["warnings"]:
        lines.append(f"warning: {w}")
    if "oracle" in doc:
        o = doc["oracle"]
        dom = ", ".join(str(x) for x in o["domain"])
        lines.append(f"oracle (domain {{{dom}}}, objects {o['objects']}, fuel {o['fuel']}):")
        for t in o["targets"]:
            lines.append(f"  {t['target']:<12} {t['outcome']:<16} depset_ok={t['depset_ok']}")
        for b in o["soundness_bugs"]:
            lines.append(b)
    lines.append(f"overall: {doc['status'].upper()}")
    return "\n".join(lines) + "\n"


_EXIT = {"secure": 0, "insecure": 1, "unknown": 2}


def main(argv: Optional[List[str]] = None) -> int:
    ap = _build_argparser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit:
        return 3
    domain = None
    try:
        if ns.domain is not None:
            domain = _parse_domain(ns.domain)
        cfg = RunConfig(
            program_path=ns.program,
            policy_path=ns.policy,
            mode="both" if ns.oracle else "analyze",
            domain=domain,
            objects=ns.objects,
            fuel=ns.fuel,
            trace=ns.trace,
            out_format=ns.format,
            out_path=ns.out,
        )
        if cfg.fuel < 1:
            raise LangError("--fuel must be at least 1")
        doc = run_analysis(cfg)
    except (LangError, PO.PolicyError, O.StateSpaceCap, OSError) as exc:
        print(f"depflow: error: {exc}", file=sys.stderr)
        return 3
    structured = json.dumps(doc, indent=2) + "\n"
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            fh.write(structured)
    sys.stdout.write(render_text(doc) if cfg.out_format == "text" else structured)
    return _EXIT[doc["status"]]


if __name__ == "__main__":
    raise SystemExit(main())
