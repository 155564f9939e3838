"""Type-and-effect checking with reachability qualifiers.

Two modes share one algorithm:

* ``BASE``: references hold values that reach nothing (empty referent
  qualifiers), functions carry no latent effects, and structural subtyping
  (``check_subtype``) is available at elimination sites.
* ``FULL``: references may hold reachable values (the referent qualifier
  names what the stored value may reach), every judgment synthesizes a write
  effect, and elimination sites demand structurally equal pretypes.

Checking is synthesis-directed: each subterm gets a minimal qualifier, and
subsumption is applied only at elimination sites, as saturated-set
containment (applications) or a bounded subqualifier search (stores).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .qualifiers import overlap_witness, saturate, subqual, subst_self, subst_var
from .syntax import (
    Abs,
    App,
    Assign,
    BoolType,
    Const,
    Deref,
    Effect,
    EMPTY_EFFECT,
    EMPTY_QUAL,
    FunType,
    Pretype,
    Qualifier,
    QualifiedType,
    ReachlamError,
    RefAlloc,
    RefType,
    Seq,
    StructureError,
    Term,
    TypeEnv,
    Var,
    free_vars,
    qtype_free_vars,
)


class CheckMode(Enum):
    BASE = "base"
    FULL = "full"


class CheckError(ReachlamError):
    """A typing failure: the violated rule, a message, and witness sets."""

    def __init__(
        self,
        message: str,
        *,
        rule: str,
        span: Optional[tuple[int, int]] = None,
        witnesses: Optional[dict[str, list[str]]] = None,
    ):
        super().__init__(message, rule=rule, span=span)
        self.witnesses = witnesses or {}

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["witnesses"] = self.witnesses
        return data


@dataclass(frozen=True)
class Typing:
    """The checked qualified type and write effect of one subterm."""

    qtype: QualifiedType
    effect: Effect

    def __post_init__(self) -> None:
        if self.effect.arg:
            raise StructureError(
                "a term-level effect may not carry the parameter flag", rule="wf-effect"
            )

    def __str__(self) -> str:
        eff = sorted(self.effect.vars)
        if self.effect.self_ref:
            eff.append("self")
        return f"{self.qtype} ! {{{' '.join(eff)}}}"


@dataclass(frozen=True)
class Elaborated:
    """A term annotated with its checked typing.

    ``children`` mirror the term structure in evaluation order. Allocation
    nodes record the checked referent qualifier; lambda nodes record the
    binder's environment entry. The root additionally carries any warnings.
    """

    term: Term
    typing: Typing
    children: tuple["Elaborated", ...]
    observation: frozenset[str]
    mode: CheckMode
    referent: Optional[Qualifier] = None
    binder: Optional[tuple[str, QualifiedType]] = None
    warnings: tuple[str, ...] = field(default=(), compare=False)


def _witness(**sets) -> dict[str, list[str]]:
    return {key: sorted(value) for key, value in sets.items()}


def instantiate_latent(latent: Effect, arg_vars: frozenset[str], fn_vars: frozenset[str]) -> Effect:
    """Resolve a latent effect at a call site: the parameter becomes the
    argument's variables, the self marker becomes the function's."""
    names = set(latent.vars)
    if latent.arg:
        names |= arg_vars
    if latent.self_ref:
        names |= fn_vars
    return Effect(frozenset(names))


# ---------------------------------------------------------------------------
# Pretype comparison
# ---------------------------------------------------------------------------


def pretype_equal(left: Pretype, right: Pretype) -> bool:
    """Structural pretype equality up to parameter renaming."""
    if isinstance(left, BoolType) and isinstance(right, BoolType):
        return True
    if isinstance(left, RefType) and isinstance(right, RefType):
        return left.inner.qual == right.inner.qual and pretype_equal(
            left.inner.pretype, right.inner.pretype
        )
    if isinstance(left, FunType) and isinstance(right, FunType):
        if left.domain.qual != right.domain.qual:
            return False
        if not pretype_equal(left.domain.pretype, right.domain.pretype):
            return False
        if left.latent != right.latent:
            return False
        cod_right = subst_var(right.codomain.qual, right.param, Qualifier.of(left.param))
        if left.codomain.qual != cod_right:
            return False
        return pretype_equal(left.codomain.pretype, right.codomain.pretype)
    return False


def _fresh_name(base: str, taken: frozenset[str]) -> str:
    name = base
    while name in taken:
        name += "'"
    return name


def _pretype_subtype(
    env: TypeEnv,
    left: Pretype,
    right: Pretype,
    outer_left: Qualifier,
    outer_right: Qualifier,
) -> bool:
    """Structural subtyping for Base mode. Self markers inside a function
    type are resolved against the enclosing qualified type's qualifier (the
    bound on the closure's own reachability)."""
    if isinstance(left, BoolType) and isinstance(right, BoolType):
        return True
    if isinstance(left, RefType) and isinstance(right, RefType):
        # Invariant in both the pretype and the referent qualifier.
        li, ri = left.inner, right.inner
        return (
            subqual(env, li.qual, ri.qual)
            and subqual(env, ri.qual, li.qual)
            and _pretype_subtype(env, li.pretype, ri.pretype, li.qual, ri.qual)
            and _pretype_subtype(env, ri.pretype, li.pretype, ri.qual, li.qual)
        )
    if isinstance(left, FunType) and isinstance(right, FunType):
        s1, s2 = left.domain.qual, right.domain.qual
        if s1.self_ref and not s1.fresh:
            return False  # a self-referential domain must also admit fresh values
        s1_res = subst_self(s1, outer_left)
        s2_res = subst_self(s2, outer_right)
        if not (s1.fresh and s1.self_ref):  # a fresh+self domain admits anything
            if not subqual(env, s2_res, s1_res):
                return False
        if not _pretype_subtype(
            env, right.domain.pretype, left.domain.pretype, s2_res, s1_res
        ):
            return False
        if left.latent != right.latent:
            return False
        binder = _fresh_name(left.param, env.dom)
        binder_qual = Qualifier(s2_res.vars, s2_res.fresh)
        env2 = env.extend(binder, QualifiedType(right.domain.pretype, binder_qual))
        r1 = subst_self(subst_var(left.codomain.qual, left.param, Qualifier.of(binder)), outer_left)
        r2 = subst_self(subst_var(right.codomain.qual, right.param, Qualifier.of(binder)), outer_right)
        if not subqual(env2, r1, r2):
            return False
        return _pretype_subtype(env2, left.codomain.pretype, right.codomain.pretype, r1, r2)
    return False


def check_subtype(env: TypeEnv, lower: QualifiedType, upper: QualifiedType) -> bool:
    """Decide the declarative qualified-subtype relation (Base mode)."""
    if not subqual(env, lower.qual, upper.qual):
        return False
    return _pretype_subtype(env, lower.pretype, upper.pretype, lower.qual, upper.qual)


# ---------------------------------------------------------------------------
# The checker
# ---------------------------------------------------------------------------


class _Checker:
    def __init__(self, mode: CheckMode):
        self.mode = mode
        self.warnings: list[str] = []

    # -- mode well-formedness of annotations --------------------------------

    def validate_annotation(self, env: TypeEnv, qtype: QualifiedType, span) -> None:
        loose = qtype_free_vars(qtype) - env.dom
        if loose:
            raise CheckError(
                f"type annotation mentions unbound {sorted(loose)}",
                rule="wf-type",
                span=span,
                witnesses=_witness(unbound=loose),
            )
        self._validate_pretype(qtype.pretype, span)

    def _validate_pretype(self, pretype: Pretype, span) -> None:
        if isinstance(pretype, BoolType):
            return
        if isinstance(pretype, RefType):
            if self.mode is CheckMode.BASE and pretype.inner.qual.vars:
                raise CheckError(
                    f"base mode requires empty referent qualifiers, got {pretype.inner.qual}",
                    rule="wf-type",
                    span=span,
                    witnesses=_witness(referent=pretype.inner.qual.vars),
                )
            self._validate_pretype(pretype.inner.pretype, span)
            return
        if isinstance(pretype, FunType):
            if self.mode is CheckMode.BASE and not pretype.latent.is_empty():
                raise CheckError(
                    "base mode carries no effects; latent effect must be empty",
                    rule="wf-type",
                    span=span,
                )
            self._validate_pretype(pretype.domain.pretype, span)
            self._validate_pretype(pretype.codomain.pretype, span)
            return
        raise TypeError(f"not a pretype: {pretype!r}")

    # -- the typing rules ----------------------------------------------------

    def check(self, env: TypeEnv, term: Term) -> Elaborated:
        phi = env.observation

        if isinstance(term, Const):
            return Elaborated(
                term,
                Typing(QualifiedType(BoolType(), EMPTY_QUAL), EMPTY_EFFECT),
                (),
                phi,
                self.mode,
            )

        if isinstance(term, Var):
            bound = env.lookup(term.name)
            if bound is None:
                raise CheckError(
                    f"unbound variable {term.name!r}", rule="t-var", span=term.span
                )
            if term.name not in phi:
                raise CheckError(
                    f"variable {term.name!r} is outside the observation {sorted(phi)}",
                    rule="t-var",
                    span=term.span,
                    witnesses=_witness(observation=phi, variable={term.name}),
                )
            return Elaborated(
                term,
                Typing(QualifiedType(bound.pretype, Qualifier.of(term.name)), EMPTY_EFFECT),
                (),
                phi,
                self.mode,
            )

        if isinstance(term, Abs):
            return self._check_abs(env, term)

        if isinstance(term, App):
            return self._check_app(env, term)

        if isinstance(term, RefAlloc):
            return self._check_ref(env, term)

        if isinstance(term, Deref):
            return self._check_deref(env, term)

        if isinstance(term, Assign):
            return self._check_assign(env, term)

        if isinstance(term, Seq):
            return self._check_seq(env, term)

        raise TypeError(f"not a term: {term!r}")

    def _check_abs(self, env: TypeEnv, term: Abs) -> Elaborated:
        phi = env.observation
        captured = term.qual_annotation.vars
        if not captured <= phi:
            raise CheckError(
                f"capture annotation {term.qual_annotation} escapes the observation {sorted(phi)}",
                rule="t-abs",
                span=term.span,
                witnesses=_witness(escaping=captured - phi, observation=phi),
            )
        if term.param in env.dom:
            raise CheckError(
                f"parameter {term.param!r} shadows an existing binding",
                rule="t-abs",
                span=term.span,
            )
        self.validate_annotation(env, term.param_type, term.span)

        domain = term.param_type.qual
        if not domain.vars <= captured:
            raise CheckError(
                f"domain qualifier {domain} names variables outside the capture set "
                f"{term.qual_annotation}",
                rule="t-abs",
                span=term.span,
                witnesses=_witness(escaping=domain.vars - captured, captured=captured),
            )

        # Binder entry: resolve the domain's self marker against the capture
        # set and keep its fresh marker.
        resolved = subst_self(domain, Qualifier(captured))
        binder_qual = Qualifier(resolved.vars & phi, resolved.fresh)
        binder_qtype = QualifiedType(term.param_type.pretype, binder_qual)
        body_env = env.extend(term.param, binder_qtype).with_observation(captured | {term.param})

        body = self.check(body_env, term.body)
        body_qual = body.typing.qtype.qual
        body_effect = body.typing.effect

        # Fold the captured set back into a self marker where it covers the
        # body's answer; this is what lets a closure's type survive the
        # captured names going out of scope.
        if captured and captured <= body_qual.vars:
            result_qual = Qualifier(body_qual.vars - captured, body_qual.fresh, True)
        else:
            result_qual = body_qual
        if captured and captured <= body_effect.vars:
            latent = Effect(
                body_effect.vars - captured - {term.param},
                True,
                term.param in body_effect.vars,
            )
        else:
            latent = Effect(
                body_effect.vars - {term.param}, False, term.param in body_effect.vars
            )

        try:
            fun = FunType(
                term.param,
                term.param_type,
                latent,
                QualifiedType(body.typing.qtype.pretype, result_qual),
            )
        except StructureError as err:
            raise CheckError(
                f"codomain pretype mentions the parameter {term.param!r}: {err.message}",
                rule="t-abs",
                span=term.span,
            ) from err

        typing = Typing(QualifiedType(fun, Qualifier(captured)), EMPTY_EFFECT)
        return Elaborated(
            term, typing, (body,), phi, self.mode, binder=(term.param, binder_qtype)
        )

    def _check_app(self, env: TypeEnv, term: App) -> Elaborated:
        phi = env.observation
        fn = self.check(env, term.fn)
        arg = self.check(env, term.arg)

        fn_type = fn.typing.qtype
        if not isinstance(fn_type.pretype, FunType):
            raise CheckError(
                f"applied a non-function of type {fn_type}",
                rule="t-app",
                span=term.span,
            )
        fun: FunType = fn_type.pretype
        p = fn_type.qual
        o = arg.typing.qtype.qual
        s = fun.domain.qual
        r = fun.codomain.qual
        rule = "t-app-fresh" if s.fresh else "t-app"

        if self.mode is CheckMode.BASE:
            ok = _pretype_subtype(env, arg.typing.qtype.pretype, fun.domain.pretype, o, s)
            if not ok:
                raise CheckError(
                    f"argument pretype {arg.typing.qtype.pretype} is not a subtype of the "
                    f"domain {fun.domain.pretype}",
                    rule=rule,
                    span=term.span,
                )
        else:
            if not pretype_equal(arg.typing.qtype.pretype, fun.domain.pretype):
                raise CheckError(
                    f"argument pretype {arg.typing.qtype.pretype} does not match the "
                    f"domain {fun.domain.pretype}",
                    rule=rule,
                    span=term.span,
                )

        if not s.vars <= phi:
            raise CheckError(
                f"domain qualifier {s} escapes the observation {sorted(phi)}",
                rule=rule,
                span=term.span,
                witnesses=_witness(escaping=s.vars - phi),
            )
        if not (r.vars - {fun.param}) <= phi:
            raise CheckError(
                f"codomain qualifier {r} escapes the observation {sorted(phi)}",
                rule=rule,
                span=term.span,
                witnesses=_witness(escaping=r.vars - {fun.param} - phi),
            )
        if self.mode is CheckMode.FULL and not fun.latent.vars <= phi:
            raise CheckError(
                f"latent effect escapes the observation {sorted(phi)}",
                rule=rule,
                span=term.span,
                witnesses=_witness(escaping=fun.latent.vars - phi),
            )

        if s.fresh:
            if not s.self_ref:
                bad = overlap_witness(env, p, o, s)
                if bad:
                    raise CheckError(
                        f"argument overlaps with the function via {sorted(bad)} "
                        f"beyond the domain {s}",
                        rule=rule,
                        span=term.span,
                        witnesses=_witness(
                            overlap=bad,
                            function=saturate(env, p.vars),
                            argument=saturate(env, o.vars),
                        ),
                    )
        else:
            if o.fresh:
                raise CheckError(
                    "fresh argument passed to a non-fresh domain",
                    rule=rule,
                    span=term.span,
                )
            arg_sat = saturate(env, o.vars)
            dom_sat = saturate(env, s.vars)
            if not arg_sat <= dom_sat:
                raise CheckError(
                    f"argument reaches {sorted(arg_sat - dom_sat)} beyond the domain {s}",
                    rule=rule,
                    span=term.span,
                    witnesses=_witness(argument=arg_sat, domain=dom_sat),
                )

        result_qual = subst_self(subst_var(r, fun.param, o), p)
        result = QualifiedType(fun.codomain.pretype, result_qual)

        if self.mode is CheckMode.FULL:
            call = instantiate_latent(fun.latent, o.vars, p.vars)
            effect = fn.typing.effect.union(arg.typing.effect).union(call)
        else:
            effect = EMPTY_EFFECT
        return Elaborated(term, Typing(result, effect), (fn, arg), phi, self.mode)

    def _check_ref(self, env: TypeEnv, term: RefAlloc) -> Elaborated:
        phi = env.observation
        init = self.check(env, term.init)
        o = init.typing.qtype.qual

        if self.mode is CheckMode.BASE:
            if o.fresh or not subqual(env, o, EMPTY_QUAL):
                raise CheckError(
                    f"stored value must reach nothing in base mode, got {o}",
                    rule="t-ref",
                    span=term.span,
                    witnesses=_witness(value=o.vars),
                )
            referent = EMPTY_QUAL
        else:
            if o.fresh:
                raise CheckError(
                    "cannot store a fresh value in a reference",
                    rule="t-ref",
                    span=term.span,
                )
            referent = Qualifier(o.vars)

        qtype = QualifiedType(
            RefType(QualifiedType(init.typing.qtype.pretype, referent)),
            Qualifier(referent.vars, fresh=True),
        )
        return Elaborated(
            term, Typing(qtype, init.typing.effect), (init,), phi, self.mode, referent=referent
        )

    def _check_deref(self, env: TypeEnv, term: Deref) -> Elaborated:
        phi = env.observation
        target = self.check(env, term.target)
        target_type = target.typing.qtype
        if not isinstance(target_type.pretype, RefType):
            raise CheckError(
                f"dereferenced a non-reference of type {target_type}",
                rule="t-deref",
                span=term.span,
            )
        inner = target_type.pretype.inner
        if not inner.qual.vars <= phi:
            raise CheckError(
                f"referent qualifier {inner.qual} escapes the observation {sorted(phi)}",
                rule="t-deref",
                span=term.span,
                witnesses=_witness(escaping=inner.qual.vars - phi),
            )
        return Elaborated(
            term, Typing(inner, target.typing.effect), (target,), phi, self.mode
        )

    def _check_assign(self, env: TypeEnv, term: Assign) -> Elaborated:
        phi = env.observation
        target = self.check(env, term.target)
        value = self.check(env, term.value)
        target_type = target.typing.qtype
        if not isinstance(target_type.pretype, RefType):
            raise CheckError(
                f"assigned to a non-reference of type {target_type}",
                rule="t-assign",
                span=term.span,
            )
        inner = target_type.pretype.inner
        if not inner.qual.vars <= phi:
            raise CheckError(
                f"referent qualifier {inner.qual} escapes the observation {sorted(phi)}",
                rule="t-assign",
                span=term.span,
                witnesses=_witness(escaping=inner.qual.vars - phi),
            )

        if self.mode is CheckMode.BASE:
            ok_pre = _pretype_subtype(
                env, value.typing.qtype.pretype, inner.pretype, value.typing.qtype.qual, inner.qual
            )
        else:
            ok_pre = pretype_equal(value.typing.qtype.pretype, inner.pretype)
        if not ok_pre:
            raise CheckError(
                f"stored value pretype {value.typing.qtype.pretype} does not fit the "
                f"referent {inner.pretype}",
                rule="t-assign",
                span=term.span,
            )
        if not subqual(env, value.typing.qtype.qual, inner.qual):
            raise CheckError(
                f"stored value qualifier {value.typing.qtype.qual} does not fit the "
                f"referent qualifier {inner.qual}",
                rule="t-assign",
                span=term.span,
                witnesses=_witness(
                    value=value.typing.qtype.qual.vars, referent=inner.qual.vars
                ),
            )

        if self.mode is CheckMode.FULL:
            effect = (
                target.typing.effect
                .union(value.typing.effect)
                .union(Effect(target_type.qual.vars))
            )
        else:
            effect = EMPTY_EFFECT
        return Elaborated(
            term,
            Typing(QualifiedType(BoolType(), EMPTY_QUAL), effect),
            (target, value),
            phi,
            self.mode,
        )

    def _check_seq(self, env: TypeEnv, term: Seq) -> Elaborated:
        phi = env.observation
        first_obs = free_vars(term.first) & phi
        second_obs = free_vars(term.second) & phi
        first = self.check(env.with_observation(first_obs), term.first)
        second = self.check(env.with_observation(second_obs), term.second)
        for label, side in (("first", first), ("second", second)):
            if not isinstance(side.typing.qtype.pretype, BoolType):
                raise CheckError(
                    f"sequence {label} component must be boolean, got {side.typing.qtype}",
                    rule="t-seq",
                    span=term.span,
                )
            if side.typing.qtype.qual.fresh:
                self.warnings.append(
                    f"sequence discards a fresh {label} component of type {side.typing.qtype}"
                )
        effect = (
            first.typing.effect.union(second.typing.effect)
            if self.mode is CheckMode.FULL
            else EMPTY_EFFECT
        )
        return Elaborated(
            term,
            Typing(QualifiedType(BoolType(), EMPTY_QUAL), effect),
            (first, second),
            phi,
            self.mode,
        )


def typecheck(env: TypeEnv, term: Term, mode: CheckMode = CheckMode.FULL) -> Elaborated:
    """Check ``term`` under ``env`` and its observation; raises CheckError."""
    checker = _Checker(mode)
    elab = checker.check(env, term)
    if checker.warnings:
        elab = Elaborated(
            elab.term,
            elab.typing,
            elab.children,
            elab.observation,
            elab.mode,
            elab.referent,
            elab.binder,
            tuple(checker.warnings),
        )
    return elab


def check_program(term: Term, mode: CheckMode = CheckMode.FULL) -> Elaborated:
    """Check a closed program (empty environment and observation)."""
    stray = free_vars(term)
    if stray:
        raise CheckError(
            f"program is not closed: free {sorted(stray)}",
            rule="t-var",
            witnesses=_witness(free=stray),
        )
    return typecheck(TypeEnv.empty(), term, mode)
