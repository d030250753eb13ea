"""depflow: a dependency-tracking information-flow analyzer.

The analyzer verifies non-interference with delimited information release
for a small imperative language with a heap.  It symbolically executes
programs while maintaining per-variable dependency classes, discharges
`deps(x^dep) <= LVL(x)` goals under conditional declassification, and ships
a brute-force finite-domain oracle that validates verdicts on small
domains.
"""

from .checker import AnalysisReport, PathContext, Verdict, build_goal, check_program, \
    entails, prove_inclusion
from .ec import DepsPair, ECTerm, HApp, HCond, HConst, HLoop, HOpaque, HVar, \
    deps, ec_equal, normalize, pvars, wrap
from .interp import FuelExhausted, State, eval_formula, eval_program, \
    eval_program_dep, eval_term, eval_update, init_state
from .oracle import INCONCLUSIVE, Counterexample, FiniteDomain, OracleRuns, \
    check_dep_set, check_ni, dp_equivalent, l_equivalent, minimal_dep_sets
from .parser import parse_formula, parse_program, parse_term, parse_update
from .policy import DeclassPair, PolicyError, SecurityLattice, SecurityPolicy, \
    dp_for_level, load_policy, lvl_set
from .printer import pretty_print
from .symex import GoalRequest, ParallelUpdate, ProofObligation, SymState, \
    apply_update, exec_assign_field, exec_assign_local, exec_field_read, exec_if, \
    exec_new, exec_while, generate_invariant, simplify_update, symex_run
from .syntax import LangError, ParseError, Sort, SortError, UnsupportedConstruct

__version__ = "0.1.0"
