"""Command-line interface.

Exit codes follow a fixed contract so scripts can branch on them:

- 0  success (for ``difftest``: the programs agree)
- 1  type error, rewrite refusal, or a ``difftest`` disagreement
- 2  parse error or unreadable input
- 3  monitor violations
- 4  evaluation timeout (or an inconclusive ``difftest``)
- 5  evaluation got stuck

``--json`` switches every command to one machine-readable object per line
tagged with the schema id.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .evaluator import DEFAULT_FUEL, Done, Stuck, Timeout, eval_term
from .harness import GenConfig, difftest, generate
from .monitor import monitored_eval
from .rewriter import RewriteRefusal, beta_inline, context_at, reorder, replace_at
from .surface import ParseError, format_value, parse_term, print_term
from .syntax import ReachlamError, StructureError, Term, term_size
from .typecheck import CheckError, CheckMode, check_program

SCHEMA = "reachlam/1"


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as err:
        _emit_error(args, err)
        return 2
    except RewriteRefusal as err:
        _emit_error(args, err)
        return 1
    except CheckError as err:
        _emit_error(args, err)
        return 1
    except StructureError as err:
        _emit_error(args, err)
        return 2
    except OSError as err:
        _print_or_json(args, {"schema": SCHEMA, "error": "OSError", "message": str(err)}, f"error: {err}")
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachlam",
        description="Typecheck, run, monitor, rewrite, and fuzz reachability-typed programs.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("check", help="typecheck a closed program")
    p.add_argument("file")
    _common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("run", help="evaluate a closed program")
    p.add_argument("file")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    _common(p, mode=False)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("monitor", help="typecheck, then evaluate under the store monitor")
    p.add_argument("file")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument(
        "--call-boundary",
        action="store_true",
        help="also enforce declared latent effects at every call",
    )
    _common(p)
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("rewrite", help="apply a checked rewrite to a subterm")
    p.add_argument("file")
    p.add_argument("--rule", choices=("reorder", "beta"), required=True)
    p.add_argument("--at", default="", help="dot-separated child path to the subterm (default: root)")
    _common(p)
    p.set_defaults(func=_cmd_rewrite)

    p = sub.add_parser("difftest", help="compare two closed boolean programs by evaluation")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    _common(p)
    p.set_defaults(func=_cmd_difftest)

    p = sub.add_parser("gen", help="generate well-typed closed programs")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=8)
    _common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("report", help="run a campaign and render its report")
    p.add_argument("--out", default="reachlam-report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", type=int, default=200)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--betas", type=int, default=100)
    p.add_argument("--fuel", type=int, default=100_000)
    _common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def _common(p: argparse.ArgumentParser, mode: bool = True) -> None:
    if mode:
        p.add_argument("--mode", choices=("base", "full"), default="full")
    p.add_argument("--json", action="store_true")


def _mode(args) -> CheckMode:
    return CheckMode.BASE if getattr(args, "mode", "full") == "base" else CheckMode.FULL


def _load(path: str) -> Term:
    return parse_term(Path(path).read_text(encoding="utf-8"))


def _print_or_json(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload))
    elif human:
        print(human)


def _emit_error(args, err: ReachlamError) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"schema": SCHEMA, **err.to_dict()}))
    else:
        rule = f" [{err.rule}]" if err.rule else ""
        print(f"error{rule}: {err.message}", file=sys.stderr)


def _cmd_check(args) -> int:
    elab = check_program(_load(args.file), _mode(args))
    payload = {
        "schema": SCHEMA,
        "command": "check",
        "mode": _mode(args).value,
        "type": str(elab.typing.qtype),
        "effect": str(elab.typing.effect),
        "warnings": list(elab.warnings),
    }
    lines = [f"type: {elab.typing.qtype}", f"effect: {elab.typing.effect}"]
    lines.extend(f"warning: {w}" for w in elab.warnings)
    _print_or_json(args, payload, "\n".join(lines))
    return 0


def _outcome_code(outcome) -> int:
    if isinstance(outcome, Timeout):
        return 4
    if isinstance(outcome, Stuck):
        return 5
    return 0


def _outcome_fields(outcome) -> dict:
    if isinstance(outcome, Done):
        return {"outcome": "done", "value": format_value(outcome.value), "store_size": len(outcome.store)}
    if isinstance(outcome, Timeout):
        return {"outcome": "timeout"}
    return {"outcome": "stuck", "reason": outcome.reason.value}


def _cmd_run(args) -> int:
    outcome = eval_term(_load(args.file), fuel=args.fuel)
    fields = _outcome_fields(outcome)
    if isinstance(outcome, Done):
        human = format_value(outcome.value)
    elif isinstance(outcome, Timeout):
        human = "timeout"
    else:
        human = f"stuck: {outcome.reason.value}"
    _print_or_json(args, {"schema": SCHEMA, "command": "run", **fields}, human)
    return _outcome_code(outcome)


def _cmd_monitor(args) -> int:
    mode = _mode(args)
    elab = check_program(_load(args.file), mode)
    result = monitored_eval(elab, fuel=args.fuel, check_calls=args.call_boundary)
    payload = {
        "schema": SCHEMA,
        "command": "monitor",
        "mode": mode.value,
        **_outcome_fields(result.outcome),
        "cells": len(result.store_typing),
        "violations": [v.to_dict() for v in result.violations],
    }
    lines = []
    if isinstance(result.outcome, Done):
        lines.append(format_value(result.outcome.value))
    elif isinstance(result.outcome, Timeout):
        lines.append("timeout")
    else:
        lines.append(f"stuck: {result.outcome.reason.value}")
    lines.append(f"store typing: {len(result.store_typing)} cells")
    for violation in result.violations:
        lines.append(f"violation[{violation.kind}] step={violation.step}: {violation.message}")
    _print_or_json(args, payload, "\n".join(lines))
    code = _outcome_code(result.outcome)
    if code == 0 and result.violations:
        return 3
    return code


def _parse_path(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split("."))
    except ValueError as err:
        raise StructureError(f"bad path {text!r}: {err}") from None


def _cmd_rewrite(args) -> int:
    mode = _mode(args)
    program = _load(args.file)
    elab = check_program(program, mode)
    path = _parse_path(args.at)
    env, node = context_at(elab, path)
    if args.rule == "reorder":
        rewritten_sub, typing = reorder(env, node.term, mode)
    else:
        rewritten_sub, typing = beta_inline(env, node.term, mode)
    rewritten = replace_at(program, path, rewritten_sub)
    check_program(rewritten, mode)  # the rewrite is type-preserving
    payload = {
        "schema": SCHEMA,
        "command": "rewrite",
        "rule": args.rule,
        "at": list(path),
        "program": print_term(rewritten),
        "subterm_type": str(typing.qtype),
        "subterm_effect": str(typing.effect),
    }
    _print_or_json(args, payload, print_term(rewritten))
    return 0


def _cmd_difftest(args) -> int:
    mode = _mode(args)
    left = _load(args.left)
    right = _load(args.right)
    check_program(left, mode)
    check_program(right, mode)
    verdict = difftest(left, right, fuel=args.fuel)
    payload = {
        "schema": SCHEMA,
        "command": "difftest",
        **verdict.to_dict(),
    }
    human = verdict.kind
    if verdict.kind != "inconclusive":
        human = f"{verdict.kind}: {str(verdict.left).lower()} vs {str(verdict.right).lower()}"
    _print_or_json(args, payload, human)
    if verdict.kind == "equal":
        return 0
    if verdict.kind == "unequal":
        return 1
    return 4


def _cmd_gen(args) -> int:
    mode = _mode(args)
    for i in range(args.count):
        term = generate(GenConfig(seed=args.seed + i, max_depth=args.depth, mode=mode))
        if args.json:
            print(
                json.dumps(
                    {
                        "schema": SCHEMA,
                        "command": "gen",
                        "seed": args.seed + i,
                        "size": term_size(term),
                        "term": print_term(term),
                    }
                )
            )
        else:
            print(print_term(term))
    return 0


def _cmd_report(args) -> int:
    from .report import run_campaign  # matplotlib import deferred to here

    summary = run_campaign(
        args.out,
        seed=args.seed,
        corpus=args.corpus,
        depth=args.depth,
        mode=_mode(args),
        pairs=args.pairs,
        betas=args.betas,
        fuel=args.fuel,
    )
    if args.json:
        print(json.dumps({"schema": SCHEMA, "command": "report", **summary}))
    else:
        for key, value in summary.items():
            print(f"{key}\t{value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
