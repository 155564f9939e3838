"""Qualifier algebra: pinned examples plus algebraic laws."""

from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_env
from reachlam import (
    BoolType,
    QualifiedType,
    Qualifier,
    TypeEnv,
    UnboundVariableError,
    cond_union,
    overlap_bounded,
    saturate,
    separate,
    subqual,
    subst_self,
    subst_var,
)


def qual(*names: str, fresh: bool = False, self_ref: bool = False) -> Qualifier:
    return Qualifier(frozenset(names), fresh=fresh, self_ref=self_ref)


def naive_saturate(env: TypeEnv, names) -> frozenset[str]:
    """Transitive-closure oracle over the binding-qualifier graph."""
    reached = set(names)
    while True:
        step = set(reached)
        for name in reached:
            for bound, qtype in env.bindings:
                if bound == name:
                    step |= qtype.qual.vars
        if step == reached:
            return frozenset(reached)
        reached = step


def random_chain_env(rng: random.Random, size: int) -> TypeEnv:
    """Env of Bool bindings whose qualifiers mention only earlier names."""
    bindings = []
    names: list[str] = []
    for i in range(size):
        name = f"v{i}"
        k = rng.randint(0, min(len(names), 3))
        vars_ = frozenset(rng.sample(names, k)) if k else frozenset()
        fresh = rng.random() < 0.3
        bindings.append((name, QualifiedType(BoolType(), Qualifier(vars_, fresh=fresh))))
        names.append(name)
    return TypeEnv(tuple(bindings), observation=frozenset(names))


class TestSaturate:
    def test_ref_chain(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{x}"))
        assert saturate(env, {"y"}) == {"y", "x"}

    def test_empty(self) -> None:
        env = make_env(("x", "Bool^{}"))
        assert saturate(env, frozenset()) == frozenset()

    def test_bool_chain(self) -> None:
        env = make_env(("a", "Bool^{}"), ("b", "Bool^{a}"), ("c", "Bool^{b}"))
        assert saturate(env, {"c"}) == {"c", "b", "a"}

    def test_unbound_name_rejected(self) -> None:
        env = make_env(("x", "Bool^{}"))
        with pytest.raises(UnboundVariableError):
            saturate(env, {"ghost"})

    def test_matches_naive_closure(self) -> None:
        rng = random.Random(7)
        for _ in range(500):
            env = random_chain_env(rng, rng.randint(1, 8))
            pool = sorted(n for n, _ in env.bindings)
            names = frozenset(rng.sample(pool, rng.randint(0, min(3, len(pool)))))
            assert saturate(env, names) == naive_saturate(env, names)


class TestSubstVar:
    def test_hit(self) -> None:
        assert subst_var(qual("x"), "x", qual("c2")) == qual("c2")

    def test_miss(self) -> None:
        assert subst_var(qual("y"), "x", qual("c2")) == qual("y")

    def test_markers_preserved(self) -> None:
        assert subst_var(qual("x", fresh=True), "x", qual("a", "b")) == qual("a", "b", fresh=True)

    def test_replacement_markers_join_on_hit(self) -> None:
        assert subst_var(qual("x"), "x", qual(fresh=True)) == qual(fresh=True)
        # a miss must not leak the replacement's markers
        assert subst_var(qual("y"), "x", qual(fresh=True)) == qual("y")


class TestSubstSelf:
    def test_hit(self) -> None:
        assert subst_self(qual(self_ref=True), qual("z")) == qual("z")

    def test_miss(self) -> None:
        assert subst_self(qual("x"), qual("z")) == qual("x")

    def test_markers(self) -> None:
        assert subst_self(qual("x", self_ref=True), qual("a", fresh=True)) == qual("x", "a", fresh=True)


class TestCondUnion:
    def test_true_unions(self) -> None:
        assert cond_union(qual("a"), qual("b"), True) == qual("a", "b")

    def test_false_keeps_base(self) -> None:
        assert cond_union(qual("a"), qual("b"), False) == qual("a")

    def test_marker_union(self) -> None:
        assert cond_union(qual(), qual(fresh=True), True) == qual(fresh=True)


class TestSeparate:
    def test_disjoint_refs(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{fresh}"))
        assert separate(env, {"x"}, {"y"})

    def test_empty_left(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"))
        assert separate(env, frozenset(), {"x"})

    def test_shared_target(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{x}"))
        assert not separate(env, {"y"}, {"x"})

    def test_symmetric(self) -> None:
        rng = random.Random(11)
        for _ in range(300):
            env = random_chain_env(rng, rng.randint(1, 7))
            names = sorted(n for n, _ in env.bindings)
            q1 = frozenset(rng.sample(names, rng.randint(0, min(2, len(names)))))
            q2 = frozenset(rng.sample(names, rng.randint(0, min(2, len(names)))))
            assert separate(env, q1, q2) == separate(env, q2, q1)


class TestOverlapBounded:
    def test_owner_outside_domain(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{z}"))
        assert not overlap_bounded(env, qual("z"), qual("y"), qual(fresh=True))

    def test_owner_inside_domain(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{z}"))
        assert overlap_bounded(env, qual("z"), qual("y"), qual("z", fresh=True))

    def test_disjoint_with_empty_domain(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{fresh}"))
        assert overlap_bounded(env, qual("x"), qual("y"), qual())

    def test_self_marker_waives_bound(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{z}"))
        assert overlap_bounded(env, qual("z"), qual("y"), qual(self_ref=True))

    def test_empty_argument_always_bounded(self) -> None:
        rng = random.Random(13)
        for _ in range(300):
            env = random_chain_env(rng, rng.randint(1, 7))
            names = sorted(n for n, _ in env.bindings)
            p = Qualifier(frozenset(rng.sample(names, rng.randint(0, min(3, len(names))))))
            s = Qualifier(frozenset(rng.sample(names, rng.randint(0, min(2, len(names))))))
            assert overlap_bounded(env, p, Qualifier(), s)


class TestSubqual:
    def test_subset(self) -> None:
        env = make_env(("x", "Bool^{}"), ("y", "Bool^{}"))
        assert subqual(env, qual("x"), qual("x", "y"))

    def test_fresh_cannot_drop(self) -> None:
        env = make_env(("x", "Bool^{}"))
        assert not subqual(env, qual("x", fresh=True), qual("x"))

    def test_fresh_can_widen(self) -> None:
        env = make_env(("x", "Bool^{}"))
        assert subqual(env, qual("x"), qual("x", fresh=True))

    def test_var_rewrite(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{z}"), ("w", "Bool^{}"))
        assert subqual(env, qual("y"), qual("z", "w"))
        assert not subqual(env, qual("y"), qual("w"))

    def test_var_rewrite_collapses_through_empty_binders(self) -> None:
        # z's own qualifier is empty, so {y} rewrites to {z}, then to {}
        env = make_env(("z", "Bool^{}"), ("y", "Bool^{z}"), ("w", "Bool^{}"))
        assert subqual(env, qual("y"), qual("w"))

    def test_rewrite_cannot_invent_freshness(self) -> None:
        env = make_env(("r", "(Ref Bool^{})^{fresh}"))
        assert not subqual(env, qual("r"), qual())
        assert subqual(env, qual("r"), qual(fresh=True))

    def test_bool_chain_collapses(self) -> None:
        env = make_env(("b", "Bool^{}"))
        assert subqual(env, qual("b"), qual())


@st.composite
def chain_env_and_sets(draw):
    size = draw(st.integers(1, 7))
    bindings = []
    names: list[str] = []
    for i in range(size):
        name = f"v{i}"
        upto = min(len(names), 3)
        k = draw(st.integers(0, upto))
        vars_ = frozenset(names[j] for j in draw(st.sets(st.integers(0, len(names) - 1), min_size=k, max_size=k))) if names and k else frozenset()
        fresh = draw(st.booleans())
        bindings.append((name, QualifiedType(BoolType(), Qualifier(vars_, fresh=fresh))))
        names.append(name)
    env = TypeEnv(tuple(bindings), observation=frozenset(names))
    q1 = frozenset(draw(st.sets(st.sampled_from(names))))
    q2 = frozenset(draw(st.sets(st.sampled_from(names))))
    return env, q1, q2


@given(chain_env_and_sets())
def test_saturation_laws(case) -> None:
    env, q1, q2 = case
    s1 = saturate(env, q1)
    assert q1 <= s1
    assert saturate(env, s1) == s1
    assert saturate(env, q1 | q2) >= s1
    if q1 <= q2:
        assert s1 <= saturate(env, q2)


@given(chain_env_and_sets())
def test_subqual_reflexive_and_monotone(case) -> None:
    env, q1, q2 = case
    a = Qualifier(q1)
    assert subqual(env, a, a)
    assert subqual(env, a, Qualifier(q1 | q2))
    assert subqual(env, a, Qualifier(q1, fresh=True))


@given(chain_env_and_sets(), st.booleans(), st.booleans())
def test_subst_var_never_reintroduces(case, fresh_r, fresh_p) -> None:
    env, q1, q2 = case
    names = sorted(q1 | q2) or ["x"]
    x = names[0]
    r = Qualifier(q1, fresh=fresh_r)
    p = Qualifier(q2 - {x}, fresh=fresh_p)
    out = subst_var(r, x, p)
    assert x not in out.vars
    if x not in r.vars:
        assert out == r
    else:
        assert out.vars == (r.vars - {x}) | p.vars
        assert out.fresh == (r.fresh or p.fresh)


def test_subqual_transitive_random_chains() -> None:
    rng = random.Random(23)
    hits = 0
    for _ in range(2000):
        env = random_chain_env(rng, rng.randint(2, 7))
        names = sorted(n for n, _ in env.bindings)
        binder = dict(env.bindings)
        a_vars = set(rng.sample(names, rng.randint(0, min(2, len(names)))))
        a = Qualifier(frozenset(a_vars), fresh=rng.random() < 0.3)

        def widen(q: Qualifier) -> Qualifier:
            vars_ = set(q.vars)
            fresh = q.fresh
            for _ in range(rng.randint(0, 2)):
                if vars_ and rng.random() < 0.5:
                    v = rng.choice(sorted(vars_))
                    bq = binder[v].qual
                    vars_.discard(v)
                    vars_ |= bq.vars
                    fresh = fresh or bq.fresh
                else:
                    vars_.add(rng.choice(names))
            return Qualifier(frozenset(vars_), fresh=fresh)

        b = widen(a)
        c = widen(b)
        assert subqual(env, a, b)
        assert subqual(env, b, c)
        assert subqual(env, a, c)
        hits += 1
    assert hits == 2000
