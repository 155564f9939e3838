"""Type-and-effect checking: pinned judgments, rejections, relations, laws."""

from __future__ import annotations

import pytest

from conftest import make_env
from reachlam import (
    Abs,
    App,
    Assign,
    CheckError,
    CheckMode,
    Const,
    Deref,
    EMPTY_EFFECT,
    GenConfig,
    Qualifier,
    RefAlloc,
    Seq,
    Term,
    TypeEnv,
    Var,
    check_program,
    check_subtype,
    generate,
    parse_qualified_type,
    parse_term,
    typecheck,
)

B = CheckMode.BASE
F = CheckMode.FULL


def typing_of(env: TypeEnv, src: str, mode: CheckMode):
    return typecheck(env, parse_term(src), mode).typing


def rendered(env: TypeEnv, src: str, mode: CheckMode) -> str:
    t = typing_of(env, src, mode)
    return f"{t.qtype} ! {t.effect}"


def rejection(env: TypeEnv, src: str, mode: CheckMode) -> CheckError:
    with pytest.raises(CheckError) as exc:
        typecheck(env, parse_term(src), mode)
    return exc.value


class TestFrozenTypings:
    def test_ref_true_both_modes(self) -> None:
        for mode in (B, F):
            assert rendered(TypeEnv(), "(ref true)", mode) == "(Ref Bool^{})^{fresh} ! {}"

    def test_identity_on_fresh_refs(self) -> None:
        src = "(lam {} (x : (Ref Bool^{})^{fresh}) x)"
        want = "((x : (Ref Bool^{})^{fresh}) -> (Ref Bool^{})^{x} / {})^{} ! {}"
        for mode in (B, F):
            assert rendered(TypeEnv(), src, mode) == want

    def test_assign_effect_names_target(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{x}"))
        assert rendered(env, "(:= y true)", F) == "Bool^{} ! {y}"

    def test_deref_exposes_referent(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("r2", "(Ref (Ref Bool^{})^{z})^{z fresh}"))
        assert rendered(env, "(! r2)", F) == "(Ref Bool^{})^{z} ! {}"

    def test_assign_within_referent_bound(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("r2", "(Ref (Ref Bool^{})^{z})^{z fresh}"))
        assert rendered(env, "(:= r2 z)", F) == "Bool^{} ! {r2}"

    def test_var_is_minimal(self) -> None:
        env = make_env(("x", "Bool^{}"))
        assert rendered(env, "x", F) == "Bool^{x} ! {}"

    def test_nested_allocation_full(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"))
        assert rendered(env, "(ref z)", F) == "(Ref (Ref Bool^{})^{z})^{z fresh} ! {}"

    def test_assign_collapsible_value(self) -> None:
        env = make_env(("b", "Bool^{}"), ("r", "(Ref Bool^{})^{fresh}"))
        assert rendered(env, "(:= r b)", F) == "Bool^{} ! {r}"

    def test_seq_result_is_plain_bool(self) -> None:
        assert rendered(TypeEnv(), "(seq true false)", F) == "Bool^{} ! {}"

    def test_fresh_codomain_discard_warns(self) -> None:
        env = make_env(("f", "((a : Bool^{}) -> Bool^{fresh} / {})^{}"))
        elab = typecheck(env, parse_term("(seq (app f true) true)"), F)
        assert str(elab.typing.qtype) == "Bool^{}"
        assert any("discards a fresh" in w for w in elab.warnings)

    def test_allocation_records_referent(self) -> None:
        elab = typecheck(TypeEnv(), parse_term("(ref true)"), F)
        assert elab.referent == Qualifier()
        env = make_env(("z", "(Ref Bool^{})^{fresh}"))
        elab2 = typecheck(env, parse_term("(ref z)"), F)
        assert elab2.referent == Qualifier(frozenset({"z"}))


class TestRejections:
    def test_unbound_variable(self) -> None:
        assert rejection(TypeEnv(), "x", F).rule == "t-var"

    def test_variable_outside_observation(self) -> None:
        env = make_env(("x", "Bool^{}"), observation=())
        assert rejection(env, "x", F).rule == "t-var"

    def test_shadowing_parameter(self) -> None:
        err = rejection(TypeEnv(), "(lam {} (x : Bool^{}) (lam {} (x : Bool^{}) x))", F)
        assert err.rule == "t-abs"

    def test_codomain_pretype_mentions_parameter(self) -> None:
        err = rejection(TypeEnv(), "(lam {} (x : Bool^{}) (ref x))", F)
        assert err.rule == "t-abs"
        assert "codomain" in str(err)

    def test_seq_component_must_be_bool(self) -> None:
        assert rejection(TypeEnv(), "(seq (ref true) true)", F).rule == "t-seq"

    def test_base_mode_referent_must_be_empty(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"))
        assert rejection(env, "(ref z)", B).rule == "t-ref"

    def test_full_mode_rejects_fresh_referent(self) -> None:
        assert rejection(TypeEnv(), "(ref (ref true))", F).rule == "t-ref"

    def test_assign_rejects_fresh_value(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("r2", "(Ref (Ref Bool^{})^{z})^{z fresh}"))
        assert rejection(env, "(:= r2 (ref true))", F).rule == "t-assign"

    def test_app_pretype_mismatch(self) -> None:
        err = rejection(TypeEnv(), "(app (lam {} (x : Bool^{}) x) (ref true))", F)
        assert err.rule == "t-app"

    def test_app_domain_outside_observation(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), observation=())
        err = rejection(env, "(app (lam {} (x : (Ref Bool^{})^{z}) true) (ref true))", F)
        assert err.rule in ("t-app", "t-var", "t-abs")

    def test_fresh_domain_overlap(self) -> None:
        env = make_env(("z", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{z}"))
        err = rejection(env, "(app (lam {z} (x : (Ref Bool^{})^{fresh}) true) y)", F)
        assert err.rule == "t-app-fresh"

    def test_deref_requires_ref(self) -> None:
        assert rejection(TypeEnv(), "(! true)", F).rule == "t-deref"

    def test_assign_requires_ref(self) -> None:
        assert rejection(TypeEnv(), "(:= true false)", F).rule == "t-assign"


class TestSubtype:
    def test_reflexive(self) -> None:
        env = make_env(("c", "(Ref Bool^{})^{fresh}"))
        for src in (
            "Bool^{}",
            "(Ref Bool^{})^{fresh}",
            "((x : (Ref Bool^{})^{fresh}) -> (Ref Bool^{})^{x} / {})^{}",
        ):
            qt = parse_qualified_type(src)
            assert check_subtype(env, qt, qt)

    def test_qualifier_widening(self) -> None:
        env = make_env(("c", "(Ref Bool^{})^{fresh}"))
        lo = parse_qualified_type("Bool^{}")
        hi = parse_qualified_type("Bool^{c}")
        assert check_subtype(env, lo, hi)
        assert not check_subtype(env, hi, lo)

    def test_self_marked_domain_chain(self) -> None:
        env = make_env(("c", "(Ref Bool^{})^{fresh}"))
        lo = parse_qualified_type(
            "((x : (Ref Bool^{})^{fresh self}) -> (Ref Bool^{})^{x} / {})^{c}"
        )
        hi = parse_qualified_type("((x : (Ref Bool^{})^{c}) -> (Ref Bool^{})^{self} / {})^{c}")
        assert check_subtype(env, lo, hi)
        assert not check_subtype(env, hi, lo)

    def test_ref_invariance_requires_mutual_fit(self) -> None:
        env = make_env(("a", "(Ref Bool^{})^{fresh}"), ("b", "(Ref Bool^{})^{fresh}"))
        lo = parse_qualified_type("(Ref Bool^{a})^{fresh}")
        hi = parse_qualified_type("(Ref Bool^{a b})^{fresh}")
        assert not check_subtype(env, lo, hi)
        assert not check_subtype(env, hi, lo)

    def test_ref_invariance_mutual_collapse(self) -> None:
        env = make_env(("a", "Bool^{}"), ("b", "Bool^{a}"))
        lo = parse_qualified_type("(Ref Bool^{a})^{fresh}")
        hi = parse_qualified_type("(Ref Bool^{a b})^{fresh}")
        assert check_subtype(env, lo, hi)
        assert check_subtype(env, hi, lo)

    def test_fun_domain_contravariant(self) -> None:
        env = make_env(("a", "(Ref Bool^{})^{fresh}"), ("b", "(Ref Bool^{})^{fresh}"))
        narrow = parse_qualified_type("((x : (Ref Bool^{})^{a}) -> Bool^{} / {})^{}")
        wide = parse_qualified_type("((x : (Ref Bool^{})^{a b}) -> Bool^{} / {})^{}")
        assert check_subtype(env, wide, narrow)
        assert not check_subtype(env, narrow, wide)


def _contains_assign(t: Term) -> bool:
    if isinstance(t, Assign):
        return True
    if isinstance(t, Abs):
        return _contains_assign(t.body)
    if isinstance(t, App):
        return _contains_assign(t.fn) or _contains_assign(t.arg)
    if isinstance(t, Seq):
        return _contains_assign(t.first) or _contains_assign(t.second)
    if isinstance(t, RefAlloc):
        return _contains_assign(t.init)
    if isinstance(t, Deref):
        return _contains_assign(t.target)
    return False


class TestInvariants:
    def test_determinism(self) -> None:
        for seed in range(30):
            t = generate(GenConfig(seed=seed, max_depth=7))
            assert check_program(t, F) == check_program(t, F)

    def test_elaboration_agrees_with_rechecking(self) -> None:
        env = make_env(("x", "(Ref Bool^{})^{fresh}"), ("y", "(Ref Bool^{})^{x}"))
        elab = typecheck(env, parse_term("(seq (:= y true) (! y))"), F)
        assert typecheck(env, elab.term, F) == elab

    def test_closed_roots_have_empty_effects(self) -> None:
        for mode in (B, F):
            for seed in range(120):
                t = generate(GenConfig(seed=seed, max_depth=7, mode=mode))
                typing = check_program(t, mode).typing
                assert typing.effect == EMPTY_EFFECT
                assert typing.qtype.qual.vars == frozenset()
                assert not typing.qtype.qual.self_ref

    def test_observation_widening_preserves_typing(self) -> None:
        extras = make_env(("pad0", "Bool^{}"), ("pad1", "(Ref Bool^{})^{fresh}"))
        for seed in range(60):
            t = generate(GenConfig(seed=seed, max_depth=6))
            narrow = check_program(t, F).typing
            wide = typecheck(extras, t, F).typing
            assert narrow == wide

    def test_pure_base_fragment_agrees_with_full(self) -> None:
        checked = 0
        for seed in range(200):
            t = generate(GenConfig(seed=seed, max_depth=6, mode=B))
            if _contains_assign(t):
                continue
            base = check_program(t, B).typing
            full = check_program(t, F).typing
            assert full.qtype == base.qtype
            assert full.effect == EMPTY_EFFECT
            checked += 1
        assert checked >= 20
