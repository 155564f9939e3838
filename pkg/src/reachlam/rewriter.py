"""Equational rewrites with checked side conditions.

Two rewrites are provided. ``reorder`` swaps the components of a sequence
when their footprints cannot interfere: in Base mode the saturated
observations of the two components must be disjoint, in Full mode each
component's saturated observation must be disjoint from the other's
saturated write effect (so read-read sharing is fine). ``beta_inline``
collapses an applied abstraction whose argument is closed, effect-free and
carries the empty qualifier, substituting the argument into the body and
dropping the parameter from every qualifier annotation it appeared in.

Both refuse, naming the failed side condition and a witness set, rather
than produce an unjustified rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .qualifiers import saturate
from .syntax import (
    Abs,
    App,
    Assign,
    BoolType,
    Const,
    Deref,
    Effect,
    FunType,
    QualifiedType,
    Qualifier,
    ReachlamError,
    RefAlloc,
    RefType,
    Seq,
    StructureError,
    Term,
    TypeEnv,
    Var,
    free_vars,
    term_children,
)
from .typecheck import CheckError, CheckMode, Elaborated, Typing, typecheck

EMPTY_QUAL = Qualifier(frozenset())


class RewriteRefusal(ReachlamError):
    """A rewrite's side condition failed; carries the condition name."""

    def __init__(self, message: str, condition: str, witnesses: Optional[dict] = None):
        super().__init__(message, rule=condition)
        self.condition = condition
        self.witnesses = witnesses or {}

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["condition"] = self.condition
        data["witnesses"] = {k: sorted(v) for k, v in self.witnesses.items()}
        return data


@dataclass(frozen=True)
class ReorderReport:
    ok: bool
    condition: Optional[str] = None
    witnesses: dict = field(default_factory=dict, compare=False)
    first_typing: Optional[Typing] = None
    second_typing: Optional[Typing] = None


def can_reorder(env: TypeEnv, first: Term, second: Term, mode: CheckMode) -> ReorderReport:
    """Decide whether ``seq first second`` may be swapped under ``env``."""
    phi = env.observation
    phi1 = free_vars(first) & phi
    phi2 = free_vars(second) & phi
    try:
        first_elab = typecheck(env.with_observation(phi1), first, mode)
        second_elab = typecheck(env.with_observation(phi2), second, mode)
    except CheckError as err:
        return ReorderReport(False, condition="ill-typed-component", witnesses={"error": {err.rule or "check"}})

    t1, t2 = first_elab.typing, second_elab.typing
    if not isinstance(t1.qtype.pretype, BoolType) or not isinstance(t2.qtype.pretype, BoolType):
        return ReorderReport(False, condition="component-not-bool", first_typing=t1, second_typing=t2)

    sat1 = saturate(env, phi1)
    sat2 = saturate(env, phi2)

    if mode is CheckMode.BASE:
        overlap = sat1 & sat2
        if overlap:
            return ReorderReport(
                False,
                condition="observation-overlap",
                witnesses={"overlap": overlap, "first": sat1, "second": sat2},
                first_typing=t1,
                second_typing=t2,
            )
        return ReorderReport(True, witnesses={"first": sat1, "second": sat2}, first_typing=t1, second_typing=t2)

    eff1 = saturate(env, t1.effect.vars)
    eff2 = saturate(env, t2.effect.vars)
    hit12 = sat1 & eff2
    if hit12:
        return ReorderReport(
            False,
            condition="first-observation-meets-second-effect",
            witnesses={"overlap": hit12, "observation": sat1, "effect": eff2},
            first_typing=t1,
            second_typing=t2,
        )
    hit21 = sat2 & eff1
    if hit21:
        return ReorderReport(
            False,
            condition="second-observation-meets-first-effect",
            witnesses={"overlap": hit21, "observation": sat2, "effect": eff1},
            first_typing=t1,
            second_typing=t2,
        )
    return ReorderReport(
        True,
        witnesses={"first": sat1, "second": sat2, "first_effect": eff1, "second_effect": eff2},
        first_typing=t1,
        second_typing=t2,
    )


def reorder(env: TypeEnv, term: Term, mode: CheckMode) -> tuple[Term, Typing]:
    """Swap the components of a sequence; refuse if they may interfere."""
    if not isinstance(term, Seq):
        raise RewriteRefusal("reorder applies to a sequence", condition="not-a-sequence")
    report = can_reorder(env, term.first, term.second, mode)
    if not report.ok:
        assert report.condition is not None
        raise RewriteRefusal(
            f"cannot reorder: {report.condition}",
            condition=report.condition,
            witnesses=report.witnesses,
        )
    assert report.first_typing is not None and report.second_typing is not None
    effect = report.first_typing.effect.union(report.second_typing.effect)
    swapped = Seq(term.second, term.first, span=term.span)
    return swapped, Typing(QualifiedType(BoolType(), EMPTY_QUAL), effect)


def _qual_drop(qual: Qualifier, name: str) -> Qualifier:
    if name not in qual.vars:
        return qual
    return Qualifier(qual.vars - {name}, qual.fresh, qual.self_ref)


def _effect_drop(effect: Effect, name: str) -> Effect:
    if name not in effect.vars:
        return effect
    return Effect(effect.vars - {name}, effect.self_ref, effect.arg)


def _pretype_drop(pretype, name: str):
    if isinstance(pretype, BoolType):
        return pretype
    if isinstance(pretype, RefType):
        return RefType(_qtype_drop(pretype.inner, name))
    if isinstance(pretype, FunType):
        domain = _qtype_drop(pretype.domain, name)
        if pretype.param == name:
            # the type-level binder shadows the substituted name
            return FunType(pretype.param, domain, pretype.latent, pretype.codomain)
        return FunType(
            pretype.param,
            domain,
            _effect_drop(pretype.latent, name),
            _qtype_drop(pretype.codomain, name),
        )
    raise TypeError(f"not a pretype: {pretype!r}")


def _qtype_drop(qtype: QualifiedType, name: str) -> QualifiedType:
    return QualifiedType(_pretype_drop(qtype.pretype, name), _qual_drop(qtype.qual, name))


def subst_term(term: Term, name: str, replacement: Term) -> Term:
    """Substitute a closed term for a variable.

    Occurrences of the variable in qualifier and effect annotations are
    dropped (the replacement is closed, so it contributes no reachability).
    A binder that shadows the name stops the substitution.
    """
    if isinstance(term, Const):
        return term
    if isinstance(term, Var):
        return replacement if term.name == name else term
    if isinstance(term, Abs):
        if term.param == name:
            return term
        return Abs(
            _qual_drop(term.qual_annotation, name),
            term.param,
            _qtype_drop(term.param_type, name),
            subst_term(term.body, name, replacement),
            span=term.span,
        )
    if isinstance(term, App):
        return App(subst_term(term.fn, name, replacement), subst_term(term.arg, name, replacement), span=term.span)
    if isinstance(term, RefAlloc):
        return RefAlloc(subst_term(term.init, name, replacement), span=term.span)
    if isinstance(term, Deref):
        return Deref(subst_term(term.target, name, replacement), span=term.span)
    if isinstance(term, Assign):
        return Assign(
            subst_term(term.target, name, replacement),
            subst_term(term.value, name, replacement),
            span=term.span,
        )
    if isinstance(term, Seq):
        return Seq(
            subst_term(term.first, name, replacement),
            subst_term(term.second, name, replacement),
            span=term.span,
        )
    raise TypeError(f"not a term: {term!r}")


def beta_inline(env: TypeEnv, term: Term, mode: CheckMode) -> tuple[Term, Typing]:
    """Inline an applied abstraction whose argument is closed and pure.

    The argument must typecheck on its own at the empty qualifier with no
    effect; the result is the body with the argument substituted in, typed
    at the application's instantiated type and effect.
    """
    if not isinstance(term, App) or not isinstance(term.fn, Abs):
        raise RewriteRefusal("inline applies to an applied abstraction", condition="not-a-beta-redex")
    arg = term.arg
    stray = free_vars(arg)
    if stray:
        raise RewriteRefusal(
            "argument mentions bound variables",
            condition="argument-not-closed",
            witnesses={"free": stray},
        )
    try:
        arg_elab = typecheck(TypeEnv.empty(), arg, mode)
    except CheckError as err:
        raise RewriteRefusal(
            f"argument does not typecheck on its own: {err.message}",
            condition="argument-ill-typed",
        ) from err
    arg_qual = arg_elab.typing.qtype.qual
    if arg_qual.vars or arg_qual.fresh or arg_qual.self_ref:
        raise RewriteRefusal(
            f"argument qualifier {arg_qual} is not empty",
            condition="argument-not-empty-qualified",
            witnesses={"qualifier": arg_qual.vars | ({"fresh"} if arg_qual.fresh else set())},
        )
    if not arg_elab.typing.effect.is_empty():
        raise RewriteRefusal(
            f"argument carries effect {arg_elab.typing.effect}",
            condition="argument-effectful",
        )
    try:
        redex_elab = typecheck(env, term, mode)
    except CheckError as err:
        raise RewriteRefusal(
            f"redex does not typecheck: {err.message}",
            condition="redex-ill-typed",
        ) from err
    inlined = subst_term(term.fn.body, term.fn.param, arg)
    return inlined, redex_elab.typing


def term_at(term: Term, path: tuple[int, ...]) -> Term:
    """Follow child indices (evaluation order) down to a subterm."""
    node = term
    for idx in path:
        children = term_children(node)
        if not 0 <= idx < len(children):
            raise StructureError(f"path step {idx} out of range for {type(node).__name__}")
        node = children[idx]
    return node


def replace_at(term: Term, path: tuple[int, ...], new: Term) -> Term:
    if not path:
        return new
    idx, rest = path[0], path[1:]
    children = list(term_children(term))
    if not 0 <= idx < len(children):
        raise StructureError(f"path step {idx} out of range for {type(term).__name__}")
    children[idx] = replace_at(children[idx], rest, new)
    if isinstance(term, Abs):
        return Abs(term.qual_annotation, term.param, term.param_type, children[0], span=term.span)
    if isinstance(term, App):
        return App(children[0], children[1], span=term.span)
    if isinstance(term, RefAlloc):
        return RefAlloc(children[0], span=term.span)
    if isinstance(term, Deref):
        return Deref(children[0], span=term.span)
    if isinstance(term, Assign):
        return Assign(children[0], children[1], span=term.span)
    if isinstance(term, Seq):
        return Seq(children[0], children[1], span=term.span)
    raise StructureError(f"{type(term).__name__} has no children")


def context_at(root: Elaborated, path: tuple[int, ...]) -> tuple[TypeEnv, Elaborated]:
    """Environment and elaboration for the subterm at ``path``.

    The root elaboration must come from an empty environment (a checked
    closed program); binders crossed on the way down are re-entered.
    """
    env = TypeEnv.empty()
    node = root
    for idx in path:
        if not 0 <= idx < len(node.children):
            raise StructureError(f"path step {idx} out of range for {type(node.term).__name__}")
        if isinstance(node.term, Abs):
            assert node.binder is not None
            env = env.extend(*node.binder)
        node = node.children[idx]
    return env.with_observation(node.observation), node
