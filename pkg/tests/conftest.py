"""Shared helpers for the test suite."""

from __future__ import annotations

from hypothesis import HealthCheck, settings

from reachlam import TypeEnv, parse_qualified_type

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def make_env(*bindings: tuple[str, str], observation=None) -> TypeEnv:
    """Build a TypeEnv from (name, qualified-type source) pairs.

    The observation defaults to every bound name.
    """
    parsed = tuple((name, parse_qualified_type(text)) for name, text in bindings)
    names = frozenset(name for name, _ in parsed)
    obs = names if observation is None else frozenset(observation)
    return TypeEnv(parsed, observation=obs)


def frame_demo(write_target: str) -> str:
    """Two cells x (holding true) and y (holding false), a closure f that
    writes ``write_target``, called before x is read back.

    The closure's declared latent effect covers exactly the cell it writes,
    so the monitor's call-boundary frame certifies the other cell untouched.
    """
    assert write_target in ("x", "y")
    # x starts true and y starts false; the write always flips its target
    written = "true" if write_target == "y" else "false"
    fn = f"(lam {{{write_target}}} (u : Bool^{{}}) (:= {write_target} {written}))"
    fn_type = f"((u : Bool^{{}}) -> Bool^{{}} / {{self}})^{{{write_target}}}"
    return (
        "(app (lam {} (x : (Ref Bool^{})^{fresh}) "
        "(app (lam {x} (y : (Ref Bool^{})^{fresh}) "
        f"(app (lam {{x y}} (f : {fn_type}) "
        "(seq (app f true) (! x))) "
        f"{fn})) "
        "(ref false))) "
        "(ref true))"
    )


BORROWER_FN_TYPE = "((a : Bool^{}) -> Bool^{} / {})^{fresh}"

BORROW_SRC = (
    "(lam {} (z : (Ref Bool^{})^{fresh}) "
    f"(lam {{z}} (f : {BORROWER_FN_TYPE}) (:= z (app f (! z)))))"
)


def borrow_demo(good: bool) -> str:
    """A cell x lent to a combinator that feeds its content through a callback.

    The callback's domain demands separation from the lender's cell. The good
    callback is a closed transformer; the bad one peeks at x itself.
    """
    g = "(lam {} (a : Bool^{}) (seq a a))" if good else "(lam {x} (a : Bool^{}) (seq (! x) a))"
    return (
        "(app (lam {} (x : (Ref Bool^{})^{fresh}) "
        f"(app (app {BORROW_SRC} x) {g})) "
        "(ref true))"
    )
