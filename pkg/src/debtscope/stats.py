"""Statistical utilities: sample sizing, agreement, adjudication, metrics.

The sample-size calculator is the Cochran formula with finite-population
correction and a ceiling, which reproduces the annotation sample sizes
used to validate keyword filtering (379 for a population of 24,823, 12
for 12, and so on). The uncorrected value is also exposed because its
rounded-down figure (384 at 95%/5%) is the one usually quoted in prose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .corpus import LABEL_ATD, LABEL_NON_ATD, LABEL_WEAK_ATD, LabelRecord

Z_TABLE = {0.90: 1.645, 0.95: 1.96, 0.99: 2.576}


class NeedsAdjudication(ValueError):
    """Hard annotator disagreement that requires a tiebreaker."""


@dataclass
class SampleSpec:
    population: int
    confidence: float = 0.95
    margin: float = 0.05
    proportion: float = 0.5

    def z(self) -> float:
        try:
            return Z_TABLE[self.confidence]
        except KeyError:
            raise ValueError(
                f"unsupported confidence {self.confidence}; known: {sorted(Z_TABLE)}"
            ) from None


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    confusion: Dict[str, int]

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": dict(self.confusion),
        }


def sample_size_uncorrected(spec: SampleSpec) -> float:
    """Cochran n0 = z^2 p (1-p) / e^2, without finite-population correction."""
    if not 0 < spec.margin < 1:
        raise ValueError("margin must be in (0, 1)")
    if not 0 < spec.proportion < 1:
        raise ValueError("proportion must be in (0, 1)")
    z = spec.z()
    return z * z * spec.proportion * (1 - spec.proportion) / (spec.margin * spec.margin)


def sample_size(spec: SampleSpec) -> int:
    """Finite-population corrected sample size, ceiled and capped at N."""
    if spec.population < 1:
        raise ValueError("population must be >= 1")
    n0 = sample_size_uncorrected(spec)
    n = n0 / (1 + (n0 - 1) / spec.population)
    return min(spec.population, math.ceil(n))


def cohens_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement between two equal-length label vectors."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    if not a:
        raise ValueError("empty label vectors")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a: Dict = {}
    counts_b: Dict = {}
    for x in a:
        counts_a[x] = counts_a.get(x, 0) + 1
    for y in b:
        counts_b[y] = counts_b.get(y, 0) + 1
    expected = sum(
        (counts_a.get(label, 0) / n) * (counts_b.get(label, 0) / n)
        for label in set(counts_a) | set(counts_b)
    )
    if expected == 1.0:
        # both raters constant on the same label: full agreement
        return 1.0
    return (observed - expected) / (1 - expected)


def adjudicate(records: Sequence[LabelRecord], tiebreaker: Optional[str] = None) -> str:
    """Resolve per-document annotator labels into a final label.

    Rules, in order: any Maybe|Non-ATD vote demotes the issue to NonATD;
    a Maybe|ATD vote makes it WeakATD; unanimous votes stand; a hard
    ATD-vs-NonATD split is resolved by majority with the tiebreaker, and
    raises NeedsAdjudication when no tiebreaker is available.
    """
    if len(records) < 2:
        raise ValueError("adjudication needs at least two annotator records")
    doc_ids = {rec.doc_id for rec in records}
    if len(doc_ids) > 1:
        raise ValueError(f"records span multiple documents: {sorted(doc_ids)}")
    if any(rec.label == LABEL_NON_ATD and rec.maybe_flag for rec in records):
        return LABEL_NON_ATD
    if any(rec.label == LABEL_ATD and rec.maybe_flag for rec in records):
        return LABEL_WEAK_ATD
    labels = [rec.label for rec in records]
    if len(set(labels)) == 1:
        return labels[0]
    votes = list(labels)
    if tiebreaker is not None:
        votes.append(tiebreaker)
    tally: Dict[str, int] = {}
    for vote in votes:
        tally[vote] = tally.get(vote, 0) + 1
    ranked = sorted(tally.items(), key=lambda kv: -kv[1])
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        raise NeedsAdjudication(
            f"no majority for {records[0].doc_id}: {dict(tally)}"
        )
    if tiebreaker is None:
        raise NeedsAdjudication(
            f"hard disagreement for {records[0].doc_id} and no tiebreaker"
        )
    return ranked[0][0]


def compute_metrics(predicted: Sequence, gold: Sequence, positive) -> Metrics:
    """Precision/recall/F1 of `predicted` against `gold` for one positive class."""
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} != {len(gold)}")
    tp = fp = fn = tn = 0
    for p, g in zip(predicted, gold):
        if p == positive and g == positive:
            tp += 1
        elif p == positive:
            fp += 1
        elif g == positive:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    )


def adjudicate_all(
    records: Sequence[LabelRecord], tiebreakers: Optional[Dict[str, str]] = None
) -> List[LabelRecord]:
    """Group records by doc and fill the final label on each record.

    Documents whose disagreement cannot be resolved are left with
    final=None and reported by the caller.
    """
    tiebreakers = tiebreakers or {}
    by_doc: Dict[str, List[LabelRecord]] = {}
    for rec in records:
        by_doc.setdefault(rec.doc_id, []).append(rec)
    out: List[LabelRecord] = []
    for doc_id, group in by_doc.items():
        try:
            final = adjudicate(group, tiebreakers.get(doc_id))
        except NeedsAdjudication:
            final = None
        for rec in group:
            out.append(
                LabelRecord(
                    doc_id=rec.doc_id,
                    annotator=rec.annotator,
                    label=rec.label,
                    maybe_flag=rec.maybe_flag,
                    final=final,
                )
            )
    return out
