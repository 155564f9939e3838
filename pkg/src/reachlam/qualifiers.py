"""Qualifier algebra: saturation, substitution, separation, and the
bounded subqualifier search.

Saturation closes a variable set under one-step reachability: ``x`` reaches
``y`` when the environment binds ``x`` at a type whose qualifier mentions
``y``. Environment well-formedness makes the reachability graph acyclic
(bindings only mention earlier names), so every fixpoint here terminates in
at most ``len(env)`` rounds.
"""

from __future__ import annotations

from collections import deque
from functools import lru_cache
from typing import Iterable

from .syntax import Qualifier, TypeEnv, UnboundVariableError


def _require_bound(env: TypeEnv, names: Iterable[str], *, context: str) -> None:
    missing = sorted(set(names) - env.dom)
    if missing:
        raise UnboundVariableError(
            f"{context}: unbound {', '.join(missing)}", rule="unbound-variable"
        )


@lru_cache(maxsize=None)
def _saturate_cached(bindings: tuple, names: frozenset[str]) -> frozenset[str]:
    one_step = {name: qtype.qual.vars for name, qtype in bindings}
    reached = set(names)
    frontier = deque(names)
    while frontier:
        for target in one_step[frontier.popleft()]:
            if target not in reached:
                reached.add(target)
                frontier.append(target)
    return frozenset(reached)


def saturate(env: TypeEnv, names: Iterable[str]) -> frozenset[str]:
    """The reflexive-transitive closure of one-step variable reachability."""
    names = frozenset(names)
    _require_bound(env, names, context="saturate")
    return _saturate_cached(env.bindings, names)


def subst_var(qual: Qualifier, name: str, replacement: Qualifier) -> Qualifier:
    """``qual[replacement/name]``: if ``name`` occurs, splice in the
    replacement; otherwise the qualifier is unchanged."""
    if name not in qual.vars:
        return qual
    return Qualifier(
        (qual.vars - {name}) | replacement.vars,
        qual.fresh or replacement.fresh,
        qual.self_ref or replacement.self_ref,
    )


def subst_self(qual: Qualifier, replacement: Qualifier) -> Qualifier:
    """``qual[replacement/self]``: replace the self marker if present."""
    if not qual.self_ref:
        return qual
    return Qualifier(
        qual.vars | replacement.vars,
        qual.fresh or replacement.fresh,
        replacement.self_ref,
    )


def cond_union(base: Qualifier, extra: Qualifier, condition: bool) -> Qualifier:
    """Union ``extra`` into ``base`` only when ``condition`` holds."""
    return base.union(extra) if condition else base


def separate(env: TypeEnv, left: Iterable[str], right: Iterable[str]) -> bool:
    """Do the two variable sets have disjoint saturations?"""
    return not (saturate(env, left) & saturate(env, right))


def overlap_bounded(env: TypeEnv, fn_qual: Qualifier, arg_qual: Qualifier, domain: Qualifier) -> bool:
    """The fresh-argument overlap condition at an application: anything the
    function and the argument both reach must be named by the domain
    qualifier. A self marker in the domain waives the bound."""
    if domain.self_ref:
        return True
    shared = saturate(env, fn_qual.vars) & saturate(env, arg_qual.vars)
    return shared <= domain.vars


def overlap_witness(env: TypeEnv, fn_qual: Qualifier, arg_qual: Qualifier, domain: Qualifier) -> frozenset[str]:
    """The offending part of the saturated intersection (empty when fine)."""
    if domain.self_ref:
        return frozenset()
    shared = saturate(env, fn_qual.vars) & saturate(env, arg_qual.vars)
    return frozenset(shared - domain.vars)


def subqual(env: TypeEnv, lower: Qualifier, upper: Qualifier) -> bool:
    """Decide ``lower <: upper``: can rewriting variables of ``lower`` by
    their binding qualifiers (left-to-right, any subset of occurrences)
    reach a subset of ``upper``? Markers are monotone: they can be
    introduced by a rewrite but never dropped."""
    _require_bound(env, lower.vars | upper.vars, context="subqual")
    if lower.self_ref and not upper.self_ref:
        return False

    quals = {name: qtype.qual for name, qtype in env.bindings}
    target_vars = upper.vars
    target_fresh = upper.fresh

    start = (lower.vars, lower.fresh)
    seen = {start}
    frontier = deque([start])
    while frontier:
        names, fresh = frontier.popleft()
        if names <= target_vars and (not fresh or target_fresh):
            return True
        for name in names:
            if name in target_vars:
                continue  # keeping a name already allowed is never worse
            binding = quals[name]
            if binding.fresh and not target_fresh:
                continue  # would introduce an undroppable fresh marker
            state = ((names - {name}) | binding.vars, fresh or binding.fresh)
            if state not in seen:
                seen.add(state)
                frontier.append(state)
    return False
