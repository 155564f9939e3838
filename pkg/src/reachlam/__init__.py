"""Reachability-typed lambda calculus: checker, evaluator, monitor, rewrites.

The package implements a small boolean lambda calculus with mutable
references whose types carry reachability qualifiers. Two checking modes
are provided: Base (qualifiers only, references store nothing reachable)
and Full (nested references plus tracked write effects). On top of the
checker sit a fuel-bounded evaluator, a runtime monitor that validates the
static discipline against actual stores, qualifier-directed program
rewrites, and a random-program harness with differential testing.
"""

from .evaluator import DEFAULT_FUEL, Done, EvalOutcome, Stuck, StuckReason, Timeout, eval_term
from .harness import (
    BetaSample,
    CorpusResult,
    DiffVerdict,
    GenConfig,
    ReorderSample,
    RULE_NAMES,
    difftest,
    generate,
    generate_corpus,
    rule_census,
    sample_beta,
    sample_reorder,
)
from .monitor import (
    MonitorResult,
    StoreTyping,
    ViolationReport,
    locs,
    locs_of_names,
    monitored_eval,
    sat_locs,
)
from .qualifiers import (
    cond_union,
    overlap_bounded,
    overlap_witness,
    saturate,
    separate,
    subqual,
    subst_self,
    subst_var,
)
from .rewriter import (
    ReorderReport,
    RewriteRefusal,
    beta_inline,
    can_reorder,
    context_at,
    reorder,
    replace_at,
    subst_term,
    term_at,
)
from .surface import ParseError, format_value, parse_qualified_type, parse_term, print_term
from .syntax import (
    Abs,
    App,
    Assign,
    BoolType,
    BoolVal,
    Closure,
    Const,
    Deref,
    EMPTY_EFFECT,
    EMPTY_QUAL,
    Effect,
    FunType,
    Loc,
    QualifiedType,
    Qualifier,
    ReachlamError,
    RefAlloc,
    RefType,
    Seq,
    StructureError,
    Term,
    TypeEnv,
    UnboundVariableError,
    ValueEnv,
    Var,
    free_vars,
    term_depth,
    term_size,
)
from .typecheck import (
    CheckError,
    CheckMode,
    Elaborated,
    Typing,
    check_program,
    check_subtype,
    pretype_equal,
    typecheck,
)

__version__ = "0.1.0"

__all__ = [
    "Abs",
    "App",
    "Assign",
    "BetaSample",
    "BoolType",
    "BoolVal",
    "CheckError",
    "CheckMode",
    "Closure",
    "Const",
    "CorpusResult",
    "DEFAULT_FUEL",
    "Deref",
    "DiffVerdict",
    "Done",
    "EMPTY_EFFECT",
    "EMPTY_QUAL",
    "Effect",
    "Elaborated",
    "EvalOutcome",
    "FunType",
    "GenConfig",
    "Loc",
    "MonitorResult",
    "ParseError",
    "QualifiedType",
    "Qualifier",
    "RULE_NAMES",
    "ReachlamError",
    "RefAlloc",
    "RefType",
    "ReorderReport",
    "ReorderSample",
    "RewriteRefusal",
    "Seq",
    "StoreTyping",
    "StructureError",
    "Stuck",
    "StuckReason",
    "Term",
    "Timeout",
    "TypeEnv",
    "Typing",
    "UnboundVariableError",
    "ValueEnv",
    "Var",
    "ViolationReport",
    "beta_inline",
    "can_reorder",
    "check_program",
    "check_subtype",
    "cond_union",
    "context_at",
    "difftest",
    "eval_term",
    "format_value",
    "free_vars",
    "generate",
    "generate_corpus",
    "locs",
    "locs_of_names",
    "monitored_eval",
    "overlap_bounded",
    "overlap_witness",
    "parse_qualified_type",
    "parse_term",
    "pretype_equal",
    "print_term",
    "reorder",
    "replace_at",
    "rule_census",
    "sample_beta",
    "sample_reorder",
    "sat_locs",
    "saturate",
    "separate",
    "subqual",
    "subst_self",
    "subst_term",
    "subst_var",
    "term_at",
    "term_depth",
    "term_size",
    "typecheck",
]
