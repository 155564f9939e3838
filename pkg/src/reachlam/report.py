"""Campaign reports: delimited summaries plus rendered figures.

A campaign generates a corpus, evaluates and monitors every program,
exercises the two rewrites with differential testing, and writes the
results into a directory:

- ``summary.tsv``         one key/value row per headline number
- ``rule_hits.tsv``       typing-rule census over the corpus
- ``outcomes.tsv``        evaluation and monitor outcome counts
- ``verdicts.jsonl``      one JSON object per differential comparison
- ``*.png``               the same numbers rendered as figures
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import (
    GenConfig,
    RULE_NAMES,
    difftest,
    generate_corpus,
    sample_beta,
    sample_reorder,
)
from .monitor import monitored_eval
from .syntax import term_size
from .typecheck import CheckMode, check_program


def run_campaign(
    out_dir: str | Path,
    *,
    seed: int = 0,
    corpus: int = 200,
    depth: int = 8,
    mode: CheckMode = CheckMode.FULL,
    pairs: int = 100,
    betas: int = 100,
    fuel: int = 100_000,
) -> dict:
    """Run the full campaign and render its report into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = GenConfig(seed=seed, max_depth=depth, mode=mode)
    verdict_rows: list[dict] = []

    corpus_result = generate_corpus(cfg, corpus)
    sizes = [term_size(t) for t in corpus_result.terms]
    outcome_counts: Counter = Counter()
    violation_counts: Counter = Counter()
    for program in corpus_result.terms:
        elab = check_program(program, mode)
        result = monitored_eval(elab, fuel=fuel, check_calls=True)
        outcome_counts[type(result.outcome).__name__] += 1
        for violation in result.violations:
            violation_counts[violation.kind] += 1

    reorder_counts: Counter = Counter()
    for i in range(pairs):
        sample = sample_reorder(GenConfig(seed=seed + i, max_depth=depth, mode=mode))
        accepted = sample.full_ok if mode is CheckMode.FULL else sample.base_ok
        if sample.full_ok and not sample.base_ok:
            reorder_counts["full-only"] += 1
        if not accepted:
            reorder_counts["refused"] += 1
            continue
        reorder_counts["accepted"] += 1
        verdict = difftest(sample.program, sample.swapped, fuel=fuel)
        reorder_counts[f"reorder-{verdict.kind}"] += 1
        verdict_rows.append({"rewrite": "reorder", "seed": seed + i, **verdict.to_dict()})

    beta_counts: Counter = Counter()
    for i in range(betas):
        sample = sample_beta(GenConfig(seed=seed + i, max_depth=depth, mode=mode))
        verdict = difftest(sample.redex, sample.inlined, fuel=fuel)
        beta_counts[f"beta-{verdict.kind}"] += 1
        verdict_rows.append({"rewrite": "beta", "seed": seed + i, **verdict.to_dict()})

    summary = {
        "mode": mode.value,
        "seed": seed,
        "corpus": corpus,
        "max_depth": depth,
        "fallbacks": corpus_result.fallbacks,
        "mean_size": round(sum(sizes) / len(sizes), 2) if sizes else 0.0,
        "violations": sum(violation_counts.values()),
        **{f"outcome_{k}": v for k, v in sorted(outcome_counts.items())},
        **{f"reorder_{k}": v for k, v in sorted(reorder_counts.items())},
        **{f"{k}": v for k, v in sorted(beta_counts.items())},
    }

    _write_tsv(out / "summary.tsv", [(k, str(v)) for k, v in summary.items()])
    _write_tsv(
        out / "rule_hits.tsv",
        [(rule, str(corpus_result.rule_hits.get(rule, 0))) for rule in RULE_NAMES],
    )
    _write_tsv(
        out / "outcomes.tsv",
        [(k, str(v)) for k, v in sorted(outcome_counts.items())]
        + [(f"violation:{k}", str(v)) for k, v in sorted(violation_counts.items())],
    )
    with (out / "verdicts.jsonl").open("w", encoding="utf-8") as fh:
        for row in verdict_rows:
            fh.write(json.dumps(row) + "\n")

    _bar_figure(
        out / "rule_hits.png",
        "Typing-rule census",
        [(rule, corpus_result.rule_hits.get(rule, 0)) for rule in RULE_NAMES],
    )
    _bar_figure(
        out / "outcomes.png",
        "Evaluation and monitor outcomes",
        sorted(outcome_counts.items()) + [(f"viol:{k}", v) for k, v in sorted(violation_counts.items())],
    )
    _bar_figure(
        out / "rewrites.png",
        "Rewrite verdicts",
        sorted(reorder_counts.items()) + sorted(beta_counts.items()),
    )
    _hist_figure(out / "sizes.png", "Corpus term sizes", sizes)

    summary["out_dir"] = str(out)
    return summary


def _write_tsv(path: Path, rows: list[tuple[str, str]]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for key, value in rows:
            fh.write(f"{key}\t{value}\n")


def _bar_figure(path: Path, title: str, items: list[tuple[str, int]]) -> None:
    fig, ax = plt.subplots(figsize=(max(6, len(items) * 0.9), 4))
    labels = [k for k, _ in items]
    values = [v for _, v in items]
    ax.bar(range(len(items)), values, color="#4878a8")
    ax.set_xticks(range(len(items)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_title(title)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _hist_figure(path: Path, title: str, values: list[int]) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if values:
        ax.hist(values, bins=min(30, max(5, len(set(values)))), color="#4878a8")
    ax.set_title(title)
    ax.set_xlabel("term size (nodes)")
    ax.set_ylabel("programs")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
