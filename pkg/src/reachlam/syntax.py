"""Core syntax: qualifiers, effects, types, terms, environments, values.

Every node is an immutable dataclass. Construction enforces the structural
invariants (marker positions, parameter scoping, environment well-formedness)
so that downstream passes can assume well-formed inputs and report anything
else as a structured error instead of crashing.

Qualifier conventions:
  * a qualifier is a finite set of variable names plus two markers:
    ``fresh`` (the value may reach locations allocated during evaluation)
    and ``self`` (the enclosing function value itself);
  * ``self`` may appear only inside a function type's domain/codomain
    qualifiers or latent effect, never in a term-level qualifier;
  * ``fresh`` may not appear in a reference's referent qualifier nor in a
    lambda's capture annotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class ReachlamError(Exception):
    """Base for structured errors; carries a rule name and optional span."""

    def __init__(self, message: str, *, rule: str = "", span: Optional[tuple[int, int]] = None):
        super().__init__(message)
        self.message = message
        self.rule = rule
        self.span = span

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "rule": self.rule, "message": self.message, "span": self.span}


class StructureError(ReachlamError):
    """A construction-time invariant violation (ill-formed syntax or env)."""


class UnboundVariableError(StructureError):
    """A qualifier or term mentions a name the environment does not bind."""


# ---------------------------------------------------------------------------
# Qualifiers and effects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Qualifier:
    """A reachability qualifier: variable names plus fresh/self markers."""

    vars: frozenset[str] = frozenset()
    fresh: bool = False
    self_ref: bool = False

    @staticmethod
    def of(*names: str, fresh: bool = False, self_ref: bool = False) -> "Qualifier":
        return Qualifier(frozenset(names), fresh, self_ref)

    def union(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(self.vars | other.vars, self.fresh or other.fresh, self.self_ref or other.self_ref)

    def with_vars(self, names: Iterable[str]) -> "Qualifier":
        return Qualifier(frozenset(names), self.fresh, self.self_ref)

    @property
    def has_markers(self) -> bool:
        return self.fresh or self.self_ref

    def __str__(self) -> str:
        parts = sorted(self.vars)
        if self.fresh:
            parts.append("fresh")
        if self.self_ref:
            parts.append("self")
        return "{" + " ".join(parts) + "}"


EMPTY_QUAL = Qualifier()


def strip_markers(qual: Qualifier) -> frozenset[str]:
    """The plain variable set of a qualifier, markers removed."""
    return qual.vars


@dataclass(frozen=True)
class Effect:
    """A write effect: variable names, optional self marker, optional
    occurrence of the enclosing function's own parameter (``arg``).

    ``arg`` may be true only in a latent effect on a function type; a
    synthesized term-level effect always has ``arg`` false.
    """

    vars: frozenset[str] = frozenset()
    self_ref: bool = False
    arg: bool = False

    @staticmethod
    def of(*names: str, self_ref: bool = False, arg: bool = False) -> "Effect":
        return Effect(frozenset(names), self_ref, arg)

    def union(self, other: "Effect") -> "Effect":
        return Effect(self.vars | other.vars, self.self_ref or other.self_ref, self.arg or other.arg)

    def is_empty(self) -> bool:
        return not self.vars and not self.self_ref and not self.arg

    def __str__(self) -> str:
        parts = sorted(self.vars)
        if self.arg:
            parts.append("arg")
        if self.self_ref:
            parts.append("self")
        return "{" + " ".join(parts) + "}"


EMPTY_EFFECT = Effect()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoolType:
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class RefType:
    """A mutable cell. The referent qualifier is marker-free by construction."""

    inner: "QualifiedType"

    def __post_init__(self) -> None:
        if self.inner.qual.has_markers:
            raise StructureError(
                f"referent qualifier {self.inner.qual} may not carry fresh/self markers",
                rule="wf-ref-qual",
            )

    def __str__(self) -> str:
        return f"(Ref {self.inner})"


@dataclass(frozen=True)
class FunType:
    """A function pretype. The codomain pretype may not mention the
    parameter (only the codomain *qualifier* and latent effect may)."""

    param: str
    domain: "QualifiedType"
    latent: Effect
    codomain: "QualifiedType"

    def __post_init__(self) -> None:
        if self.param in pretype_free_qual_vars(self.codomain.pretype):
            raise StructureError(
                f"codomain pretype mentions parameter {self.param!r}",
                rule="wf-fun-codomain",
            )

    def __str__(self) -> str:
        eff = sorted(self.latent.vars | ({self.param} if self.latent.arg else set()))
        if self.latent.self_ref:
            eff.append("self")
        eff_str = "{" + " ".join(eff) + "}"
        return f"(({self.param} : {self.domain}) -> {self.codomain} / {eff_str})"


Pretype = Union[BoolType, RefType, FunType]


@dataclass(frozen=True)
class QualifiedType:
    pretype: Pretype
    qual: Qualifier

    def __str__(self) -> str:
        return f"{self.pretype}^{self.qual}"


def pretype_free_qual_vars(pretype: Pretype) -> frozenset[str]:
    """Variables occurring in any qualifier nested inside a pretype."""
    if isinstance(pretype, BoolType):
        return frozenset()
    if isinstance(pretype, RefType):
        return qtype_free_vars(pretype.inner)
    if isinstance(pretype, FunType):
        inner = qtype_free_vars(pretype.codomain) | pretype.latent.vars
        return qtype_free_vars(pretype.domain) | (inner - {pretype.param})
    raise TypeError(f"not a pretype: {pretype!r}")


def qtype_free_vars(qtype: QualifiedType) -> frozenset[str]:
    return pretype_free_qual_vars(qtype.pretype) | qtype.qual.vars


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: bool
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Abs:
    """A lambda with an explicit capture annotation and parameter type.

    The annotation is the set of outer variables the body may observe; it is
    a plain variable set (no markers).
    """

    qual_annotation: Qualifier
    param: str
    param_type: QualifiedType
    body: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.qual_annotation.has_markers:
            raise StructureError(
                f"capture annotation {self.qual_annotation} may not carry fresh/self markers",
                rule="wf-qual",
                span=self.span,
            )


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RefAlloc:
    init: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Deref:
    target: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    target: "Term"
    value: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: "Term"
    second: "Term"
    span: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


Term = Union[Const, Var, Abs, App, RefAlloc, Deref, Assign, Seq]


def free_vars(term: Term) -> frozenset[str]:
    """Free variables of a term, including variables mentioned by qualifier
    and type annotations (a lambda's capture set and parameter type)."""
    if isinstance(term, Const):
        return frozenset()
    if isinstance(term, Var):
        return frozenset((term.name,))
    if isinstance(term, Abs):
        return (
            term.qual_annotation.vars
            | qtype_free_vars(term.param_type)
            | (free_vars(term.body) - {term.param})
        )
    if isinstance(term, App):
        return free_vars(term.fn) | free_vars(term.arg)
    if isinstance(term, RefAlloc):
        return free_vars(term.init)
    if isinstance(term, Deref):
        return free_vars(term.target)
    if isinstance(term, Assign):
        return free_vars(term.target) | free_vars(term.value)
    if isinstance(term, Seq):
        return free_vars(term.first) | free_vars(term.second)
    raise TypeError(f"not a term: {term!r}")


def term_children(term: Term) -> tuple[Term, ...]:
    """Subterms in evaluation order (the lambda body counts as one child)."""
    if isinstance(term, (Const, Var)):
        return ()
    if isinstance(term, Abs):
        return (term.body,)
    if isinstance(term, App):
        return (term.fn, term.arg)
    if isinstance(term, RefAlloc):
        return (term.init,)
    if isinstance(term, Deref):
        return (term.target,)
    if isinstance(term, Assign):
        return (term.target, term.value)
    if isinstance(term, Seq):
        return (term.first, term.second)
    raise TypeError(f"not a term: {term!r}")


def term_size(term: Term) -> int:
    return 1 + sum(term_size(c) for c in term_children(term))


def term_depth(term: Term) -> int:
    children = term_children(term)
    if not children:
        return 1
    return 1 + max(term_depth(c) for c in children)


# ---------------------------------------------------------------------------
# Typing environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeEnv:
    """An ordered typing context with an observation set.

    Invariants (checked at construction):
      * binding names are distinct;
      * each binding's qualifier mentions only strictly earlier names
        (acyclic one-step reachability), carries no self marker, and the
        binding's type annotations are scoped over earlier names;
      * the observation is a subset of the bound names.
    """

    bindings: tuple[tuple[str, QualifiedType], ...] = ()
    observation: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, qtype in self.bindings:
            if name in seen:
                raise StructureError(f"duplicate binding {name!r}", rule="wf-env")
            if qtype.qual.self_ref:
                raise StructureError(
                    f"binding {name!r} carries a self marker in its qualifier",
                    rule="wf-env",
                )
            loose = qtype_free_vars(qtype) - seen
            if loose:
                raise StructureError(
                    f"binding {name!r} refers to {sorted(loose)} before they are bound",
                    rule="wf-env",
                )
            seen.add(name)
        stray = self.observation - seen
        if stray:
            raise StructureError(
                f"observation mentions unbound {sorted(stray)}", rule="wf-observation"
            )

    @staticmethod
    def empty() -> "TypeEnv":
        return TypeEnv()

    @property
    def dom(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.bindings)

    def lookup(self, name: str) -> Optional[QualifiedType]:
        for bound, qtype in reversed(self.bindings):
            if bound == name:
                return qtype
        return None

    def extend(self, name: str, qtype: QualifiedType) -> "TypeEnv":
        return TypeEnv(self.bindings + ((name, qtype),), self.observation)

    def with_observation(self, names: Iterable[str]) -> "TypeEnv":
        return TypeEnv(self.bindings, frozenset(names))

    def __len__(self) -> int:
        return len(self.bindings)


# ---------------------------------------------------------------------------
# Runtime values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoolVal:
    value: bool


@dataclass(frozen=True)
class Loc:
    index: int


@dataclass(frozen=True)
class Closure:
    """A function value: captured environment, parameter, body, and the
    qualifier annotation it was built with. The body is a term for plain
    evaluation or an elaborated node under the monitor."""

    env: Optional["ValueEnv"]
    param: str
    body: object
    qual: Qualifier


Value = Union[BoolVal, Loc, Closure]

Store = list  # list[Value]; locations are consecutive indices


@dataclass(frozen=True)
class ValueEnv:
    """A persistent runtime environment (a cons chain; lookup takes the
    most recent binding, so shadowing behaves correctly)."""

    name: str
    value: Value
    parent: Optional["ValueEnv"] = None


def env_extend(env: Optional[ValueEnv], name: str, value: Value) -> ValueEnv:
    return ValueEnv(name, value, env)


def env_lookup(env: Optional[ValueEnv], name: str) -> Optional[Value]:
    node = env
    while node is not None:
        if node.name == name:
            return node.value
        node = node.parent
    return None


def env_names(env: Optional[ValueEnv]) -> frozenset[str]:
    names: set[str] = set()
    node = env
    while node is not None:
        names.add(node.name)
        node = node.parent
    return frozenset(names)
