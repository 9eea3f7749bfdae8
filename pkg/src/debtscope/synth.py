"""Deterministic synthetic issue corpus with planted class vocabulary.

Two classes of issues are generated from disjoint "strong" vocabularies
plus shared filler words. Most documents are easy (several strong tokens
of one class); a minority are hard (mixed strong tokens, still decidable
by majority). Hard debt-like documents carry the WeakATD gold label so
label-merge configurations have something to merge. The generator is a
pure function of its arguments, which makes simulation experiments and
CLI runs reproducible.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .corpus import (
    LABEL_ATD,
    LABEL_NON_ATD,
    LABEL_WEAK_ATD,
    STATUS_RESOLVED,
    Corpus,
    Document,
)

ATD_STRONG = (
    "refactor", "dependency", "cyclic", "decouple", "architecture",
    "coupling", "modular", "layering",
)
ATD_RARE = ("monolith", "entangle")
NON_STRONG = (
    "typo", "button", "tooltip", "crash", "login", "timeout",
    "tutorial", "screenshot",
)
NON_RARE = ("misprint", "overflow")
NEUTRAL = (
    "fix", "issue", "code", "error", "user", "file", "need", "change",
    "support", "version", "build", "test", "update", "release",
    "server", "client", "config", "log",
)


def _draw(rng: np.random.Generator, pool, count: int) -> List[str]:
    return [pool[int(i)] for i in rng.integers(0, len(pool), size=count)]


def _compose(tokens: List[str], rng: np.random.Generator) -> Tuple[str, str]:
    shuffled = list(tokens)
    rng.shuffle(shuffled)
    summary = " ".join(shuffled[:3]).capitalize()
    description = " ".join(shuffled[3:])
    return summary, description


def make_synthetic_corpus(
    n_docs: int = 3000,
    seed: int = 7,
    positive_rate: float = 0.15,
    hard_fraction: float = 0.2,
    rare_rate: float = 0.05,
) -> Tuple[Corpus, Dict[str, str]]:
    """Generate (corpus, gold-labels) with planted keyword distributions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    documents = []
    gold: Dict[str, str] = {}
    for i in range(n_docs):
        positive = rng.random() < positive_rate
        hard = rng.random() < hard_fraction
        rare = rng.random() < rare_rate
        own_strong = list(ATD_STRONG if positive else NON_STRONG)
        other_strong = list(NON_STRONG if positive else ATD_STRONG)
        if rare:
            own_strong += list(ATD_RARE if positive else NON_RARE)
        if hard:
            tokens = (
                _draw(rng, own_strong, 2)
                + _draw(rng, other_strong, 1)
                + _draw(rng, NEUTRAL, int(rng.integers(7, 11)))
            )
            label = LABEL_WEAK_ATD if positive else LABEL_NON_ATD
        else:
            tokens = (
                _draw(rng, own_strong, int(rng.integers(3, 6)))
                + _draw(rng, NEUTRAL, int(rng.integers(5, 9)))
            )
            label = LABEL_ATD if positive else LABEL_NON_ATD
        summary, description = _compose(tokens, rng)
        doc_id = f"SYN-{i + 1}"
        documents.append(
            Document.build(
                id=doc_id,
                project="SYN",
                summary=summary,
                description=description,
                status=STATUS_RESOLVED,
            )
        )
        gold[doc_id] = label
    corpus = Corpus(
        documents=documents,
        manifest={
            "source_path": f"synthetic(n={n_docs},seed={seed})",
            "ingest_time": "",
            "counts": {"resolved": n_docs, "unresolved": 0, "rejected": 0},
        },
    )
    return corpus, gold
