"""Fuel-bounded big-step evaluation.

One unit of fuel is spent per term node entered; running out yields
``Timeout``, which is always distinct from ``Stuck``. Evaluation works on a
private copy of the input store, so distinct runs never share state; a
``Done`` outcome carries the final store, which extends the input store
(locations are never reused).

Sequencing returns the conjunction of its two boolean components;
assignment returns ``true`` and overwrites the target cell in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .syntax import (
    Abs,
    App,
    Assign,
    BoolVal,
    Closure,
    Const,
    Deref,
    Loc,
    RefAlloc,
    Seq,
    Store,
    Term,
    Value,
    ValueEnv,
    Var,
    env_extend,
    env_lookup,
)

DEFAULT_FUEL = 1_000_000


class StuckReason(Enum):
    NOT_A_FUNCTION = "not-a-function"
    NOT_A_LOCATION = "not-a-location"
    UNBOUND_VARIABLE = "unbound-variable"
    NOT_A_BOOL = "not-a-bool"


@dataclass(frozen=True)
class Done:
    value: Value
    store: Store


@dataclass(frozen=True)
class Timeout:
    pass


@dataclass(frozen=True)
class Stuck:
    reason: StuckReason
    message: str = ""


EvalOutcome = Union[Done, Timeout, Stuck]


class _Halt(Exception):
    def __init__(self, outcome: EvalOutcome):
        self.outcome = outcome


class _Fuel:
    __slots__ = ("remaining",)

    def __init__(self, amount: int):
        self.remaining = amount

    def spend(self) -> None:
        if self.remaining <= 0:
            raise _Halt(Timeout())
        self.remaining -= 1


def eval_term(
    term: Term,
    env: Optional[ValueEnv] = None,
    store: Optional[Store] = None,
    fuel: int = DEFAULT_FUEL,
) -> EvalOutcome:
    """Evaluate ``term`` under ``env`` starting from a copy of ``store``."""
    working: Store = list(store) if store is not None else []
    meter = _Fuel(fuel)
    try:
        value = _eval(term, env, working, meter)
    except _Halt as halt:
        return halt.outcome
    return Done(value, working)


def _eval(term: Term, env: Optional[ValueEnv], store: Store, meter: _Fuel) -> Value:
    meter.spend()

    if isinstance(term, Const):
        return BoolVal(term.value)

    if isinstance(term, Var):
        value = env_lookup(env, term.name)
        if value is None:
            raise _Halt(Stuck(StuckReason.UNBOUND_VARIABLE, term.name))
        return value

    if isinstance(term, Abs):
        return Closure(env, term.param, term.body, term.qual_annotation)

    if isinstance(term, App):
        fn = _eval(term.fn, env, store, meter)
        if not isinstance(fn, Closure):
            raise _Halt(Stuck(StuckReason.NOT_A_FUNCTION, f"applied {type(fn).__name__}"))
        arg = _eval(term.arg, env, store, meter)
        body = fn.body
        assert isinstance(body, (Const, Var, Abs, App, RefAlloc, Deref, Assign, Seq))
        return _eval(body, env_extend(fn.env, fn.param, arg), store, meter)

    if isinstance(term, RefAlloc):
        value = _eval(term.init, env, store, meter)
        store.append(value)
        return Loc(len(store) - 1)

    if isinstance(term, Deref):
        target = _eval(term.target, env, store, meter)
        if not isinstance(target, Loc) or not 0 <= target.index < len(store):
            raise _Halt(Stuck(StuckReason.NOT_A_LOCATION, f"dereferenced {type(target).__name__}"))
        return store[target.index]

    if isinstance(term, Assign):
        target = _eval(term.target, env, store, meter)
        if not isinstance(target, Loc) or not 0 <= target.index < len(store):
            raise _Halt(Stuck(StuckReason.NOT_A_LOCATION, f"assigned to {type(target).__name__}"))
        value = _eval(term.value, env, store, meter)
        store[target.index] = value
        return BoolVal(True)

    if isinstance(term, Seq):
        first = _eval(term.first, env, store, meter)
        if not isinstance(first, BoolVal):
            raise _Halt(Stuck(StuckReason.NOT_A_BOOL, "sequence component"))
        second = _eval(term.second, env, store, meter)
        if not isinstance(second, BoolVal):
            raise _Halt(Stuck(StuckReason.NOT_A_BOOL, "sequence component"))
        return BoolVal(first.value and second.value)

    raise TypeError(f"not a term: {term!r}")
