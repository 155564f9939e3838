"""Big-step evaluation: pinned outcomes, fuel behavior, store discipline."""

from __future__ import annotations

import pytest

from reachlam import (
    BoolVal,
    CheckMode,
    Done,
    GenConfig,
    Loc,
    Stuck,
    StuckReason,
    Timeout,
    check_program,
    eval_term,
    generate,
    parse_term,
)


def run(src: str, **kwargs):
    return eval_term(parse_term(src), **kwargs)


class TestFrozenOutcomes:
    def test_seq_conjunction(self) -> None:
        table = {("true", "true"): True, ("true", "false"): False,
                 ("false", "true"): False, ("false", "false"): False}
        for (a, b), want in table.items():
            assert run(f"(seq {a} {b})") == Done(BoolVal(want), [])

    def test_assign_returns_true_and_updates(self) -> None:
        assert run("(:= (ref true) false)") == Done(BoolVal(True), [BoolVal(False)])

    def test_deref_of_fresh_cell(self) -> None:
        assert run("(! (ref true))") == Done(BoolVal(True), [BoolVal(True)])

    def test_allocations_never_reuse_locations(self) -> None:
        out = run("(seq (! (ref true)) (! (ref false)))")
        assert out == Done(BoolVal(False), [BoolVal(True), BoolVal(False)])

    def test_closure_captures_binding(self) -> None:
        src = "(app (app (lam {} (x : Bool^{}) (lam {x} (y : Bool^{}) x)) true) false)"
        assert run(src) == Done(BoolVal(True), [])


class TestStuck:
    def test_apply_non_function(self) -> None:
        out = run("(app true false)")
        assert isinstance(out, Stuck) and out.reason is StuckReason.NOT_A_FUNCTION

    def test_deref_non_location(self) -> None:
        out = run("(! true)")
        assert isinstance(out, Stuck) and out.reason is StuckReason.NOT_A_LOCATION

    def test_assign_non_location(self) -> None:
        out = run("(:= true false)")
        assert isinstance(out, Stuck) and out.reason is StuckReason.NOT_A_LOCATION

    def test_unbound_variable(self) -> None:
        out = run("x")
        assert isinstance(out, Stuck) and out.reason is StuckReason.UNBOUND_VARIABLE

    def test_sequencing_non_bool(self) -> None:
        out = run("(seq (ref true) true)")
        assert isinstance(out, Stuck) and out.reason is StuckReason.NOT_A_BOOL


class TestFuel:
    def test_exhaustion_is_timeout_not_stuck(self) -> None:
        src = "(app (lam {} (x : Bool^{}) x) true)"
        assert run(src, fuel=3) == Timeout()
        assert run(src, fuel=4) == Done(BoolVal(True), [])

    def test_done_is_stable_under_more_fuel(self) -> None:
        for seed in range(40):
            term = generate(GenConfig(seed=seed, max_depth=7))
            settled = eval_term(term)
            assert isinstance(settled, Done)
            first_done = None
            for fuel in range(1, 200):
                out = eval_term(term, fuel=fuel)
                if first_done is None:
                    assert out in (Timeout(), settled)
                    if out == settled:
                        first_done = fuel
                else:
                    assert out == settled
            assert first_done is not None

    def test_low_fuel_never_stuck_on_typed_terms(self) -> None:
        for seed in range(60):
            term = generate(GenConfig(seed=seed, max_depth=7))
            for fuel in (1, 2, 5, 17):
                assert not isinstance(eval_term(term, fuel=fuel), Stuck)

    def test_zero_fuel(self) -> None:
        assert run("true", fuel=0) == Timeout()


class TestStoreDiscipline:
    def test_input_store_never_mutated(self) -> None:
        preload = [BoolVal(False)]
        out = run("(ref true)", store=preload)
        assert out == Done(Loc(1), [BoolVal(False), BoolVal(True)])
        assert preload == [BoolVal(False)]

    def test_store_only_grows(self) -> None:
        for seed in range(60):
            term = generate(GenConfig(seed=seed, max_depth=7))
            preload = [BoolVal(True), BoolVal(False)]
            out = eval_term(term, store=list(preload))
            assert isinstance(out, Done)
            assert len(out.store) >= len(preload)

    def test_pure_term_leaves_store_alone(self) -> None:
        preload = [BoolVal(True)]
        out = run("(seq true false)", store=preload)
        assert out == Done(BoolVal(False), [BoolVal(True)])


class TestDeterminismAndTotality:
    def test_identical_runs(self) -> None:
        for seed in range(30):
            term = generate(GenConfig(seed=seed, max_depth=7))
            assert eval_term(term) == eval_term(term)

    @pytest.mark.parametrize("mode", [CheckMode.BASE, CheckMode.FULL])
    def test_typed_corpus_runs_to_done(self, mode: CheckMode) -> None:
        for seed in range(200):
            term = generate(GenConfig(seed=seed, max_depth=8, mode=mode))
            check_program(term, mode)
            out = eval_term(term)
            assert isinstance(out, Done)
            assert isinstance(out.value, BoolVal)
