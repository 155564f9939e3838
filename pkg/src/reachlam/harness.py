"""Random well-typed programs and differential testing.

The generator works backwards from the typing rules: it first stages a
prefix of bindings (booleans, fresh references, aliases, nested references,
small functions), each introduced by an applied abstraction whose domain
qualifier matches the bound value exactly, then grows a boolean-typed core
below them. Every candidate is re-checked before it is returned; a
candidate that fails the check (which would be a generator bug) is counted
and replaced by the trivial program.

``sample_reorder`` produces sequence pairs together with the reorder
verdicts of both checking modes, and ``sample_beta`` produces closed
beta-redexes ready for inlining. ``difftest`` compares two closed boolean
programs by running both: stores are intentionally not compared, only the
final booleans; a timeout on either side is inconclusive rather than a
disagreement.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass
from random import Random
from typing import Optional

from .evaluator import DEFAULT_FUEL, Done, Stuck, Timeout, eval_term
from .rewriter import beta_inline, can_reorder
from .syntax import (
    Abs,
    App,
    Assign,
    BoolType,
    BoolVal,
    Const,
    Deref,
    EMPTY_QUAL,
    QualifiedType,
    Qualifier,
    RefAlloc,
    RefType,
    Seq,
    Term,
    TypeEnv,
    Var,
    free_vars,
    term_children,
)
from .typecheck import CheckError, CheckMode, check_program, typecheck

RULE_NAMES = (
    "t-cst",
    "t-var",
    "t-abs",
    "t-app",
    "t-app-fresh",
    "t-ref",
    "t-deref",
    "t-assign",
    "t-seq",
)

BOOL_QT = QualifiedType(BoolType(), EMPTY_QUAL)
REF_BOOL = RefType(BOOL_QT)
FRESH_REF_QT = QualifiedType(REF_BOOL, Qualifier(frozenset(), fresh=True))


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 8
    mode: CheckMode = CheckMode.FULL


@dataclass(frozen=True)
class CorpusResult:
    terms: tuple[Term, ...]
    rule_hits: Counter
    fallbacks: int


@dataclass(frozen=True)
class ReorderSample:
    """A sequence program, its swapped twin, and both modes' verdicts."""

    program: Term
    swapped: Term
    base_ok: bool
    full_ok: bool
    base_condition: Optional[str]
    full_condition: Optional[str]


@dataclass(frozen=True)
class BetaSample:
    redex: Term
    inlined: Term


@dataclass(frozen=True)
class DiffVerdict:
    kind: str  # "equal" | "unequal" | "inconclusive"
    left: Optional[bool] = None
    right: Optional[bool] = None

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "left": self.left, "right": self.right}


@dataclass
class _Binding:
    name: str
    annotation: QualifiedType
    value: Term


class _Gen:
    def __init__(self, rng: Random, mode: CheckMode):
        self.rng = rng
        self.mode = mode
        self.env = TypeEnv.empty()
        self.bindings: list[_Binding] = []
        self.bools: list[str] = []
        self.refs: list[str] = []
        self.fresh_refs: list[str] = []
        self.ref2s: list[str] = []
        self.funs: list[str] = []
        self.counter = 0

    def fresh_name(self, prefix: str) -> str:
        name = f"{prefix}{self.counter}"
        self.counter += 1
        return name

    # -- binding prefix ----------------------------------------------------

    def binding_kinds(self) -> list[str]:
        kinds = ["bool", "ref"]
        if self.refs:
            kinds.extend(["alias", "fun"])
        if self.fresh_refs and self.mode is CheckMode.FULL:
            kinds.append("ref2")
        return kinds

    def add_binding(self, kind: str, value_budget: int) -> None:
        if kind == "bool":
            name = self.fresh_name("b")
            value = self.gen_bool(max(1, value_budget), need_empty=True)
            self._push(name, QualifiedType(BoolType(), EMPTY_QUAL), value)
            self.bools.append(name)
        elif kind == "ref":
            name = self.fresh_name("r")
            # an empty-qualifier initialiser keeps the referent empty, which
            # is what the (Ref Bool^{})^{fresh} annotation promises
            init = self.gen_bool(max(1, value_budget - 1), need_empty=True)
            self._push(name, FRESH_REF_QT, RefAlloc(init))
            self.refs.append(name)
            self.fresh_refs.append(name)
        elif kind == "alias":
            name = self.fresh_name("a")
            target = self.rng.choice(self.refs)
            self._push(
                name, QualifiedType(REF_BOOL, Qualifier.of(target)), Var(target)
            )
            self.refs.append(name)
        elif kind == "ref2":
            name = self.fresh_name("rr")
            target = self.rng.choice(self.fresh_refs)
            inner = QualifiedType(REF_BOOL, Qualifier.of(target))
            self._push(
                name,
                QualifiedType(RefType(inner), Qualifier.of(target, fresh=True)),
                RefAlloc(Var(target)),
            )
            self.ref2s.append(name)
        elif kind == "fun":
            name = self.fresh_name("f")
            param = self.fresh_name("v")
            self.bools.append(param)
            body = self.gen_bool(max(1, min(value_budget - 1, 3)))
            self.bools.remove(param)
            ann = Qualifier(free_vars(body) - {param})
            value = Abs(ann, param, BOOL_QT, body)
            scope = self.env.with_observation(self.env.dom)
            recorded = typecheck(scope, value, self.mode).typing.qtype
            self._push(name, recorded, value)
            self.funs.append(name)
        else:
            raise ValueError(kind)

    def _push(self, name: str, annotation: QualifiedType, value: Term) -> None:
        self.bindings.append(_Binding(name, annotation, value))
        binder_qual = Qualifier(annotation.qual.vars, annotation.qual.fresh)
        self.env = self.env.extend(name, QualifiedType(annotation.pretype, binder_qual))
        self.env = self.env.with_observation(self.env.dom)

    # -- boolean-typed core ------------------------------------------------

    def gen_bool(self, depth: int, need_empty: bool = False) -> Term:
        rng = self.rng
        options: list[tuple[int, str]] = [(8 if depth > 1 else 20, "const")]
        if self.bools and not need_empty:
            options.append((6, "var"))
        if depth >= 2:
            if self.refs:
                options.append((10, "deref"))
                options.append((16, "assign"))
            options.append((10, "seq"))
            if self.funs and not need_empty:
                options.append((4, "call"))
        if depth >= 3:
            options.append((8, "deref_alloc"))
            options.append((6, "alloc_assign"))
            if self.ref2s:
                options.append((5, "deref_deref"))
                options.append((6, "assign_inner"))
            if not need_empty:
                options.append((10, "redex"))
                options.append((5, "fresh_redex"))

        total = sum(w for w, _ in options)
        pick = rng.randrange(total)
        shape = options[-1][1]
        for weight, candidate in options:
            if pick < weight:
                shape = candidate
                break
            pick -= weight

        if shape == "const":
            return Const(rng.random() < 0.5)
        if shape == "var":
            return Var(rng.choice(self.bools))
        if shape == "deref":
            return Deref(Var(rng.choice(self.refs)))
        if shape == "assign":
            return Assign(Var(rng.choice(self.refs)), self.gen_bool(depth - 1))
        if shape == "seq":
            return Seq(self.gen_bool(depth - 1), self.gen_bool(depth - 1))
        if shape == "call":
            return App(Var(rng.choice(self.funs)), self.gen_bool(depth - 1, need_empty=True))
        if shape == "deref_alloc":
            # the referent (hence the read's qualifier) echoes the initialiser
            return Deref(RefAlloc(self.gen_bool(depth - 2, need_empty=need_empty)))
        if shape == "alloc_assign":
            return Assign(RefAlloc(self.gen_bool(depth - 2)), self.gen_bool(depth - 1))
        if shape == "deref_deref":
            return Deref(Deref(Var(rng.choice(self.ref2s))))
        if shape == "assign_inner":
            return Assign(Deref(Var(rng.choice(self.ref2s))), self.gen_bool(depth - 1))
        if shape == "redex":
            return self._gen_redex(depth)
        if shape == "fresh_redex":
            return self._gen_fresh_redex(depth)
        raise AssertionError(shape)

    def _gen_redex(self, depth: int) -> Term:
        rng = self.rng
        param = self.fresh_name("v")
        arg: Term
        if self.bools and rng.random() < 0.4:
            source = rng.choice(self.bools)
            arg = Var(source)
            domain = QualifiedType(BoolType(), Qualifier.of(source))
        else:
            arg = self.gen_bool(depth - 1, need_empty=True)
            domain = BOOL_QT
        self.bools.append(param)
        body = self.gen_bool(depth - 2)
        self.bools.remove(param)
        ann = Qualifier((free_vars(body) - {param}) | domain.qual.vars)
        return App(Abs(ann, param, domain, body), arg)

    def _gen_fresh_redex(self, depth: int) -> Term:
        param = self.fresh_name("v")
        arg = RefAlloc(self.gen_bool(depth - 2, need_empty=True))
        self.refs.append(param)
        body = self.gen_bool(depth - 2)
        self.refs.remove(param)
        ann = Qualifier(free_vars(body) - {param})
        return App(Abs(ann, param, FRESH_REF_QT, body), arg)

    # -- binding wrapper ---------------------------------------------------

    def wrap(self, core: Term) -> Term:
        term = core
        for binding in reversed(self.bindings):
            ann = Qualifier(
                (free_vars(term) - {binding.name}) | binding.annotation.qual.vars
            )
            term = App(Abs(ann, binding.name, binding.annotation, term), binding.value)
        return term


def _generate_once(rng: Random, cfg: GenConfig) -> Term:
    gen = _Gen(rng, cfg.mode)
    max_bindings = max(0, (cfg.max_depth - 1) // 2)
    n_bindings = min(rng.choice((0, 1, 2, 2, 2)), max_bindings)
    for i in range(n_bindings):
        kinds = gen.binding_kinds()
        # lead with a reference so the store fragment is exercised often
        kind = "ref" if i == 0 and rng.random() < 0.8 else rng.choice(kinds)
        gen.add_binding(kind, value_budget=cfg.max_depth - 2 * i - 1)
    core = gen.gen_bool(cfg.max_depth - 2 * n_bindings)
    return gen.wrap(core)


def generate(cfg: GenConfig) -> Term:
    """One closed boolean program; deterministic in the config."""
    term, _ = _generate_checked(cfg)
    return term


def _generate_checked(cfg: GenConfig) -> tuple[Term, bool]:
    for attempt in range(3):
        rng = Random(f"gen:{cfg.seed}:{attempt}")
        try:
            candidate = _generate_once(rng, cfg)
            check_program(candidate, cfg.mode)
            return candidate, False
        except CheckError:
            continue
    return Const(True), True


def generate_corpus(cfg: GenConfig, count: int) -> CorpusResult:
    """``count`` programs from consecutive seeds, with a rule census."""
    terms: list[Term] = []
    hits: Counter = Counter()
    fallbacks = 0
    for i in range(count):
        term, fell_back = _generate_checked(dataclasses.replace(cfg, seed=cfg.seed + i))
        terms.append(term)
        fallbacks += fell_back
        hits.update(rule_census(term))
    return CorpusResult(tuple(terms), hits, fallbacks)


def rule_census(term: Term) -> Counter:
    """Syntactic census of the typing rules a checked term exercises."""
    hits: Counter = Counter()
    stack = [term]
    while stack:
        node = stack.pop()
        if isinstance(node, Const):
            hits["t-cst"] += 1
        elif isinstance(node, Var):
            hits["t-var"] += 1
        elif isinstance(node, Abs):
            hits["t-abs"] += 1
        elif isinstance(node, App):
            fn = node.fn
            if isinstance(fn, Abs) and fn.param_type.qual.fresh:
                hits["t-app-fresh"] += 1
            else:
                hits["t-app"] += 1
        elif isinstance(node, RefAlloc):
            hits["t-ref"] += 1
        elif isinstance(node, Deref):
            hits["t-deref"] += 1
        elif isinstance(node, Assign):
            hits["t-assign"] += 1
        elif isinstance(node, Seq):
            hits["t-seq"] += 1
        stack.extend(term_children(node))
    return hits


def sample_reorder(cfg: GenConfig) -> ReorderSample:
    """A sequence pair over a shared binding prefix, with both verdicts.

    Bindings stay within the Base fragment (no nested referents) so the
    same pair can be judged in both modes.
    """
    rng = Random(f"reorder:{cfg.seed}")
    gen = _Gen(rng, CheckMode.FULL)
    n_refs = rng.randint(2, 3)
    for _ in range(n_refs):
        gen.add_binding("ref", value_budget=1)
    for _ in range(rng.randint(0, 2)):
        gen.add_binding(rng.choice(("alias", "bool")), value_budget=1)

    first = gen.gen_bool(rng.randint(2, 4))
    second = gen.gen_bool(rng.randint(2, 4))
    env = gen.env.with_observation(gen.env.dom)
    base = can_reorder(env, first, second, CheckMode.BASE)
    full = can_reorder(env, first, second, CheckMode.FULL)
    return ReorderSample(
        program=gen.wrap(Seq(first, second)),
        swapped=gen.wrap(Seq(second, first)),
        base_ok=base.ok,
        full_ok=full.ok,
        base_condition=base.condition,
        full_condition=full.condition,
    )


_PURE_BOOL_ARGS = (
    lambda rng: Const(rng.random() < 0.5),
    lambda rng: Seq(Const(True), Const(rng.random() < 0.5)),
    lambda rng: Deref(RefAlloc(Const(rng.random() < 0.5))),
    lambda rng: Assign(RefAlloc(Const(True)), Const(rng.random() < 0.5)),
)


def sample_beta(cfg: GenConfig) -> BetaSample:
    """A closed beta-redex with a closed, unqualified, effect-free argument."""
    rng = Random(f"beta:{cfg.seed}")
    gen = _Gen(rng, cfg.mode)
    param = gen.fresh_name("x")

    if rng.random() < 0.3:
        inner = gen.fresh_name("u")
        fn_body: Term = Var(inner) if rng.random() < 0.5 else Const(True)
        arg: Term = Abs(EMPTY_QUAL, inner, BOOL_QT, fn_body)
        synth = typecheck(TypeEnv.empty(), arg, cfg.mode).typing.qtype
        annotation = QualifiedType(synth.pretype, EMPTY_QUAL)
        gen.funs.append(param)
    else:
        arg = rng.choice(_PURE_BOOL_ARGS)(rng)
        annotation = BOOL_QT
        gen.bools.append(param)

    body = gen.gen_bool(rng.randint(2, 4))
    redex = App(Abs(Qualifier(free_vars(body) - {param}), param, annotation, body), arg)
    check_program(redex, cfg.mode)
    inlined, _ = beta_inline(TypeEnv.empty(), redex, cfg.mode)
    return BetaSample(redex, inlined)


def difftest(left: Term, right: Term, fuel: int = DEFAULT_FUEL) -> DiffVerdict:
    """Compare two closed boolean programs by evaluation.

    Only the final booleans are compared; the stores the two programs build
    may differ (allocation order is not behaviour). A timeout on either
    side yields an inconclusive verdict, never a disagreement.
    """
    results = []
    for program in (left, right):
        outcome = eval_term(program, fuel=fuel)
        if isinstance(outcome, Timeout):
            results.append(None)
            continue
        if isinstance(outcome, Stuck):
            raise ValueError(f"difftest program got stuck: {outcome.reason.value}")
        assert isinstance(outcome, Done)
        if not isinstance(outcome.value, BoolVal):
            raise ValueError("difftest programs must produce booleans")
        results.append(outcome.value.value)
    lhs, rhs = results
    if lhs is None or rhs is None:
        return DiffVerdict("inconclusive", lhs, rhs)
    return DiffVerdict("equal" if lhs == rhs else "unequal", lhs, rhs)
