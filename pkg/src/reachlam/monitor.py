"""Runtime store monitor.

Re-evaluates an elaborated term while maintaining a store typing: a map from
each allocated location to the set of locations its cell was declared to
reach. Along the way it checks the invariants that make the static
discipline sound, reporting violations instead of aborting:

- ``Acyclicity``: a new cell only points to strictly older locations.
- ``StoreWF``: every cell write (allocation or assignment) stores a value
  whose reachable locations stay within the cell's declared reach.
- ``TypingExtension``: the store typing only grows, never changes.
- ``ResultReachability``: the final value reaches only locations granted by
  the static qualifier (plus fresh ones when the qualifier allows them).
- ``Frame``: cells outside the observed (Base) or declared-effect (Full)
  footprint keep their initial values.
- ``EffectSafety``: writes to pre-existing cells stay within that footprint.

With ``check_calls`` enabled the same write discipline is enforced at every
call boundary against the callee's declared latent effect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .evaluator import DEFAULT_FUEL, Done, EvalOutcome, Stuck, StuckReason, Timeout, _Fuel, _Halt
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
    StructureError,
    Value,
    ValueEnv,
    Var,
    env_extend,
    env_lookup,
)
from .typecheck import CheckMode, Elaborated


class StoreTyping:
    """Map from location to the set of locations its cell may reach."""

    __slots__ = ("_reach",)

    def __init__(self, reach: Optional[dict[int, frozenset[int]]] = None):
        self._reach: dict[int, frozenset[int]] = dict(reach) if reach else {}

    def declare(self, loc: int, reachable: frozenset[int]) -> None:
        if loc in self._reach:
            raise StructureError(f"location {loc} already declared")
        self._reach[loc] = reachable

    def get(self, loc: int) -> frozenset[int]:
        return self._reach.get(loc, frozenset())

    def __contains__(self, loc: int) -> bool:
        return loc in self._reach

    def __len__(self) -> int:
        return len(self._reach)

    def domain(self) -> frozenset[int]:
        return frozenset(self._reach)

    def items(self) -> list[tuple[int, frozenset[int]]]:
        return sorted(self._reach.items())

    def copy(self) -> "StoreTyping":
        return StoreTyping(self._reach)


@dataclass(frozen=True)
class ViolationReport:
    kind: str
    step: int
    message: str
    witnesses: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "step": self.step,
            "message": self.message,
            "witnesses": {k: sorted(v) for k, v in self.witnesses.items()},
        }


@dataclass
class MonitorResult:
    outcome: EvalOutcome
    store_typing: StoreTyping
    violations: list[ViolationReport]

    @property
    def ok(self) -> bool:
        return not self.violations


def locs(value: Value) -> frozenset[int]:
    """Locations directly reachable from a value.

    For a closure this is the union over its qualifier's variables of the
    locations of the captured values, matching what its qualifier grants.
    """
    if isinstance(value, BoolVal):
        return frozenset()
    if isinstance(value, Loc):
        return frozenset({value.index})
    if isinstance(value, Closure):
        out: frozenset[int] = frozenset()
        for name in value.qual.vars:
            captured = env_lookup(value.env, name)
            if captured is None:
                raise StructureError(f"closure qualifier names unbound variable {name}")
            out |= locs(captured)
        return out
    raise TypeError(f"not a value: {value!r}")


def locs_of_names(env: Optional[ValueEnv], names: frozenset[str]) -> frozenset[int]:
    """Locations reachable from the environment entries for ``names``."""
    out: frozenset[int] = frozenset()
    for name in names:
        value = env_lookup(env, name)
        if value is None:
            raise StructureError(f"observed variable {name} is unbound at runtime")
        out |= locs(value)
    return out


def sat_locs(sigma: StoreTyping, base: frozenset[int]) -> frozenset[int]:
    """Close a location set under the reach recorded in the store typing."""
    reached = set(base)
    frontier = list(base)
    while frontier:
        loc = frontier.pop()
        if loc not in sigma:
            raise StructureError(f"location {loc} has no store-typing entry", rule="wf-env")
        for succ in sigma.get(loc):
            if succ not in reached:
                reached.add(succ)
                frontier.append(succ)
    return frozenset(reached)


@dataclass
class _CallFrame:
    writes_start: int
    store_size: int
    allowed: frozenset[int]
    label: str


class _Monitor:
    def __init__(
        self,
        store: Store,
        sigma: StoreTyping,
        fuel: int,
        check_calls: bool,
    ):
        self.store = store
        self.sigma = sigma
        self.meter = _Fuel(fuel)
        self.fuel = fuel
        self.check_calls = check_calls
        self.violations: list[ViolationReport] = []
        self.writes: list[int] = []

    def step(self) -> int:
        return self.fuel - self.meter.remaining

    def report(self, kind: str, message: str, **witnesses: frozenset[int]) -> None:
        self.violations.append(
            ViolationReport(kind, self.step(), message, {k: v for k, v in witnesses.items()})
        )

    def eval(self, elab: Elaborated, env: Optional[ValueEnv]) -> Value:
        self.meter.spend()
        term = elab.term

        if isinstance(term, Const):
            return BoolVal(term.value)

        if isinstance(term, Var):
            value = env_lookup(env, term.name)
            if value is None:
                raise _Halt(Stuck(StuckReason.UNBOUND_VARIABLE, term.name))
            return value

        if isinstance(term, Abs):
            return Closure(env, term.param, elab.children[0], term.qual_annotation)

        if isinstance(term, App):
            fn = self.eval(elab.children[0], env)
            if not isinstance(fn, Closure):
                raise _Halt(Stuck(StuckReason.NOT_A_FUNCTION, f"applied {type(fn).__name__}"))
            arg = self.eval(elab.children[1], env)
            frame = self._enter_call(elab, env, fn, arg) if self.check_calls else None
            body = fn.body
            assert isinstance(body, Elaborated)
            result = self.eval(body, env_extend(fn.env, fn.param, arg))
            if frame is not None:
                self._exit_call(frame)
            return result

        if isinstance(term, RefAlloc):
            value = self.eval(elab.children[0], env)
            referent = elab.referent
            assert referent is not None
            declared = (
                locs_of_names(env, referent.vars) if referent.vars else frozenset()
            )
            loc = len(self.store)
            self.store.append(value)
            for older in declared:
                if older >= loc:
                    self.report(
                        "Acyclicity",
                        f"cell {loc} declared to reach {older}, which is not older",
                        declared=declared,
                    )
            held = sat_locs(self.sigma, locs(value))
            granted = sat_locs(self.sigma, declared)
            if not held <= granted:
                self.report(
                    "StoreWF",
                    f"cell {loc} initialised with a value reaching outside its declared set",
                    held=held,
                    granted=granted,
                )
            self.sigma.declare(loc, declared)
            return Loc(loc)

        if isinstance(term, Deref):
            target = self.eval(elab.children[0], env)
            if not isinstance(target, Loc) or not 0 <= target.index < len(self.store):
                raise _Halt(Stuck(StuckReason.NOT_A_LOCATION, f"dereferenced {type(target).__name__}"))
            return self.store[target.index]

        if isinstance(term, Assign):
            target = self.eval(elab.children[0], env)
            if not isinstance(target, Loc) or not 0 <= target.index < len(self.store):
                raise _Halt(Stuck(StuckReason.NOT_A_LOCATION, f"assigned to {type(target).__name__}"))
            value = self.eval(elab.children[1], env)
            held = sat_locs(self.sigma, locs(value))
            granted = sat_locs(self.sigma, self.sigma.get(target.index))
            if not held <= granted:
                self.report(
                    "StoreWF",
                    f"cell {target.index} assigned a value reaching outside its declared set",
                    held=held,
                    granted=granted,
                )
            self.store[target.index] = value
            self.writes.append(target.index)
            return BoolVal(True)

        if isinstance(term, Seq):
            first = self.eval(elab.children[0], env)
            if not isinstance(first, BoolVal):
                raise _Halt(Stuck(StuckReason.NOT_A_BOOL, "sequence component"))
            second = self.eval(elab.children[1], env)
            if not isinstance(second, BoolVal):
                raise _Halt(Stuck(StuckReason.NOT_A_BOOL, "sequence component"))
            return BoolVal(first.value and second.value)

        raise TypeError(f"not a term: {term!r}")

    def _enter_call(
        self,
        app_elab: Elaborated,
        env: Optional[ValueEnv],
        fn: Closure,
        arg: Value,
    ) -> _CallFrame:
        if app_elab.mode is CheckMode.BASE:
            # Base types carry no latent effects; the body's observation is
            # the capture set plus the parameter, so that is the write bound.
            granted = locs(fn) | locs(arg)
            label = "captures+argument"
        else:
            fn_qtype = app_elab.children[0].typing.qtype
            latent = fn_qtype.pretype.latent  # type: ignore[union-attr]
            granted = locs_of_names(env, latent.vars)
            if latent.arg:
                granted |= locs(arg)
            if latent.self_ref:
                granted |= locs(fn)
            label = str(latent)
        return _CallFrame(
            writes_start=len(self.writes),
            store_size=len(self.store),
            allowed=sat_locs(self.sigma, granted),
            label=label,
        )

    def _exit_call(self, frame: _CallFrame) -> None:
        for loc in self.writes[frame.writes_start :]:
            if loc < frame.store_size and loc not in frame.allowed:
                self.report(
                    "EffectSafety",
                    f"call with latent effect {frame.label} wrote pre-existing cell {loc}",
                    written=frozenset({loc}),
                    allowed=frame.allowed,
                )


def monitored_eval(
    elab: Elaborated,
    fuel: int = DEFAULT_FUEL,
    env: Optional[ValueEnv] = None,
    store: Optional[Store] = None,
    store_typing: Optional[StoreTyping] = None,
    check_calls: bool = False,
) -> MonitorResult:
    """Evaluate an elaborated term under the store monitor.

    The observation and mode are taken from the elaboration itself. The
    input store and store typing are copied, never mutated.
    """
    initial_store: Store = list(store) if store is not None else []
    working = list(initial_store)
    sigma = store_typing.copy() if store_typing is not None else StoreTyping()
    initial_sigma = sigma.copy()
    mon = _Monitor(working, sigma, fuel, check_calls)

    try:
        value = mon.eval(elab, env)
        outcome: EvalOutcome = Done(value, working)
    except _Halt as halt:
        outcome = halt.outcome

    if isinstance(outcome, Done):
        _check_final(mon, elab, env, initial_store, initial_sigma, outcome.value)
    return MonitorResult(outcome, sigma, mon.violations)


def _check_final(
    mon: _Monitor,
    elab: Elaborated,
    env: Optional[ValueEnv],
    initial_store: Store,
    initial_sigma: StoreTyping,
    value: Value,
) -> None:
    sigma = mon.sigma
    phi = elab.observation
    qual = elab.typing.qtype.qual

    held = sat_locs(sigma, locs(value))
    granted_names = phi & qual.vars
    base_locs = locs_of_names(env, granted_names)
    if qual.fresh:
        base_locs |= frozenset(range(len(initial_store), len(mon.store)))
    granted = sat_locs(sigma, base_locs)
    if not held <= granted:
        mon.report(
            "ResultReachability",
            "result reaches locations not granted by its qualifier",
            held=held,
            granted=granted,
        )

    if elab.mode is CheckMode.BASE:
        footprint_names = phi
    else:
        footprint_names = phi & elab.typing.effect.vars
    footprint = sat_locs(initial_sigma, locs_of_names(env, footprint_names))

    for loc in range(len(initial_store)):
        if loc not in footprint and mon.store[loc] != initial_store[loc]:
            mon.report(
                "Frame",
                f"pre-existing cell {loc} outside the footprint changed value",
                changed=frozenset({loc}),
                footprint=footprint,
            )

    touched = {loc for loc in mon.writes if loc < len(initial_store)}
    stray = frozenset(touched) - footprint
    if stray:
        mon.report(
            "EffectSafety",
            "writes touched pre-existing cells outside the declared footprint",
            written=stray,
            footprint=footprint,
        )

    for loc, declared in initial_sigma.items():
        if sigma.get(loc) != declared:
            mon.report(
                "TypingExtension",
                f"store typing entry for cell {loc} changed",
                before=declared,
                after=sigma.get(loc),
            )
