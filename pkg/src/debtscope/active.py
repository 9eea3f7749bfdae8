"""Pool-based active learning: query strategies and the simulation loop.

Each round retrains the classifier from scratch on the labeled set,
evaluates on a stratified holdout, then asks the query strategy for the
next batch. Uncertainty strategies rank by the model's predicted
distribution; diversity strategies work in embedding space. Ties always
break toward the smaller corpus index so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import classify
from .classify import ClassifierSpec, TrainingError
from .corpus import LABEL_ATD, LABEL_NON_ATD, LABEL_WEAK_ATD, Corpus
from .stats import Metrics, compute_metrics
from .textprep import PrepConfig, TokenizedDoc, preprocess

STRATEGIES = (
    "random",
    "least-confidence",
    "prediction-entropy",
    "breaking-ties",
    "embedding-kmeans",
    "contrastive",
)

MERGE_TRUE_ONLY = "true-only"
MERGE_TRUE_PLUS_WEAK = "true-plus-weak"

_KMEANS_ITERATIONS = 50
_CONTRASTIVE_NEIGHBORS = 10


@dataclass
class QueryScore:
    doc_id: str
    score: float


@dataclass
class ActiveRun:
    strategy: str
    classifier_spec: ClassifierSpec = field(default_factory=ClassifierSpec)
    seed_size: int = 100
    batch_size: int = 100
    iterations: int = 16
    rng_seed: int = 0
    merge_mode: str = MERGE_TRUE_PLUS_WEAK
    holdout_fraction: float = 0.2
    warm_start: bool = False  # retrain-from-scratch is the default
    labeled: List[str] = field(default_factory=list)
    pool: List[str] = field(default_factory=list)
    curve: List[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; valid: {', '.join(STRATEGIES)}"
            )


def label_merge_config(mode: str) -> Dict[str, str]:
    """Map raw labels to the binary training alphabet."""
    if mode == MERGE_TRUE_ONLY:
        weak_target = LABEL_NON_ATD
    elif mode == MERGE_TRUE_PLUS_WEAK:
        weak_target = LABEL_ATD
    else:
        raise ValueError(f"unknown merge mode {mode!r}")
    return {
        LABEL_ATD: LABEL_ATD,
        LABEL_WEAK_ATD: weak_target,
        LABEL_NON_ATD: LABEL_NON_ATD,
    }


def _top_by_score(scores: np.ndarray, batch_size: int) -> List[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:batch_size]


def _entropy(probs: np.ndarray) -> float:
    nonzero = probs[probs > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


def _margin(probs: np.ndarray) -> float:
    if probs.shape[0] < 2:
        return 1.0
    top = np.sort(probs)[::-1]
    return float(top[0] - top[1])


def _kl(p: np.ndarray, q: np.ndarray, eps: float = 1e-12) -> float:
    p = np.clip(p, eps, None)
    q = np.clip(q, eps, None)
    return float((p * np.log(p / q)).sum())


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = X[first]
    dist_sq = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=dist_sq / total))
        centroids[i] = X[idx]
        dist_sq = np.minimum(dist_sq, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _kmeans(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = _kmeans_plus_plus(X, k, rng)
    for _ in range(_KMEANS_ITERATIONS):
        dists = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = dists.argmin(axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = X[assign == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
        if np.allclose(new_centroids, centroids):
            break
        centroids = new_centroids
    return centroids


def select_batch(
    strategy: str,
    model,
    pool: Sequence[TokenizedDoc],
    labeled: Sequence[TokenizedDoc],
    provider,
    batch_size: int,
    rng: np.random.Generator,
) -> List[str]:
    """Pick up to batch_size distinct documents from the pool.

    `pool` and `labeled` must be in corpus order; index ties break low.
    """
    if not pool:
        return []
    n = len(pool)
    take = min(batch_size, n)

    if strategy == "random":
        picks = rng.choice(n, size=take, replace=False)
        return [pool[int(i)].doc_id for i in picks]

    if strategy == "embedding-kmeans":
        if n <= batch_size:
            return [doc.doc_id for doc in pool]
        X = np.stack([provider.embed_tokens(doc.tokens).values for doc in pool])
        centroids = _kmeans(X, take, rng)
        chosen: List[int] = []
        chosen_set = set()
        for c in range(take):
            dists = ((X - centroids[c]) ** 2).sum(axis=1)
            order = sorted(range(n), key=lambda i: (dists[i], i))
            for idx in order:
                if idx not in chosen_set:
                    chosen.append(idx)
                    chosen_set.add(idx)
                    break
        return [pool[i].doc_id for i in chosen]

    if model is None:
        raise ValueError(f"strategy {strategy!r} needs a fitted model")
    pool_probs = [classify.predict_proba(model, doc).probs for doc in pool]

    if strategy == "least-confidence":
        scores = np.array([1.0 - float(p.max()) for p in pool_probs])
    elif strategy == "prediction-entropy":
        scores = np.array([_entropy(p) for p in pool_probs])
    elif strategy == "breaking-ties":
        scores = np.array([-_margin(p) for p in pool_probs])
    elif strategy == "contrastive":
        if not labeled:
            raise ValueError("contrastive strategy needs labeled documents")
        labeled_probs = [classify.predict_proba(model, doc).probs for doc in labeled]
        L = np.stack([provider.embed_tokens(doc.tokens).values for doc in labeled])
        P = np.stack([provider.embed_tokens(doc.tokens).values for doc in pool])
        k = min(_CONTRASTIVE_NEIGHBORS, len(labeled))
        scores = np.empty(n)
        for i in range(n):
            dists = ((L - P[i]) ** 2).sum(axis=1)
            neighbors = sorted(range(len(labeled)), key=lambda j: (dists[j], j))[:k]
            scores[i] = float(
                np.mean([_kl(pool_probs[i], labeled_probs[j]) for j in neighbors])
            )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    return [pool[i].doc_id for i in _top_by_score(scores, take)]


def stratified_holdout(
    doc_ids: Sequence[str],
    gold: Dict[str, str],
    fraction: float,
    rng: np.random.Generator,
) -> Tuple[List[str], List[str]]:
    """Split ids into (holdout, rest), stratified by gold label.

    Both halves preserve the input (corpus) order.
    """
    by_label: Dict[str, List[str]] = {}
    for doc_id in doc_ids:
        by_label.setdefault(gold[doc_id], []).append(doc_id)
    holdout = set()
    for label in sorted(by_label):
        ids = by_label[label]
        k = int(round(fraction * len(ids)))
        picks = rng.choice(len(ids), size=k, replace=False)
        holdout.update(ids[int(i)] for i in picks)
    return (
        [d for d in doc_ids if d in holdout],
        [d for d in doc_ids if d not in holdout],
    )


def run_simulation(
    run: ActiveRun,
    corpus: Corpus,
    gold: Dict[str, str],
    prep: Optional[PrepConfig] = None,
    provider=None,
) -> ActiveRun:
    """Simulate the label-query-retrain loop against gold labels.

    The curve gets one row per model: index 0 is the seed model, row i the
    model trained after the i-th acquired batch.
    """
    missing = [doc.id for doc in corpus if doc.id not in gold]
    if missing:
        raise ValueError(f"gold labels missing for {len(missing)} documents, e.g. {missing[:3]}")
    prep = prep or PrepConfig()
    merge = label_merge_config(run.merge_mode)
    labels = {doc_id: merge[lbl] for doc_id, lbl in gold.items()}
    tokenized = {doc.id: preprocess(doc, prep) for doc in corpus}
    all_ids = [doc.id for doc in corpus]

    seed_seq = np.random.SeedSequence(run.rng_seed)
    rng = np.random.Generator(np.random.PCG64(seed_seq))

    holdout_ids, pool_ids = stratified_holdout(all_ids, labels, run.holdout_fraction, rng)
    if run.seed_size > len(pool_ids):
        raise ValueError("seed_size exceeds pool size")

    def sample_seed(generator: np.random.Generator) -> List[str]:
        picks = generator.choice(len(pool_ids), size=run.seed_size, replace=False)
        chosen = {pool_ids[int(i)] for i in picks}
        return [d for d in pool_ids if d in chosen]

    labeled_ids = sample_seed(rng)
    if len({labels[d] for d in labeled_ids}) < 2:
        retry_rng = np.random.Generator(np.random.PCG64(seed_seq.spawn(1)[0]))
        labeled_ids = sample_seed(retry_rng)
        if len({labels[d] for d in labeled_ids}) < 2:
            raise TrainingError("seed sample is single-class even after one resample")
    labeled_set = set(labeled_ids)
    pool = [d for d in pool_ids if d not in labeled_set]

    holdout_docs = [tokenized[d] for d in holdout_ids]
    holdout_gold = [labels[d] for d in holdout_ids]

    run.curve = []
    model = None
    for iteration in range(run.iterations + 1):
        training = [(tokenized[d], labels[d]) for d in labeled_ids]
        model = classify.fit(
            run.classifier_spec,
            training,
            provider=provider,
            init_model=model if run.warm_start else None,
        )
        predicted = [classify.predict_proba(model, doc).argmax_label() for doc in holdout_docs]
        metrics = compute_metrics(predicted, holdout_gold, LABEL_ATD)
        run.curve.append(
            {
                "iteration": iteration,
                "labeled_count": len(labeled_ids),
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
            }
        )
        if iteration == run.iterations or not pool:
            break
        batch = select_batch(
            run.strategy,
            model,
            [tokenized[d] for d in pool],
            [tokenized[d] for d in labeled_ids],
            provider,
            run.batch_size,
            rng,
        )
        batch_set = set(batch)
        labeled_ids = labeled_ids + [d for d in pool if d in batch_set]
        pool = [d for d in pool if d not in batch_set]

    run.labeled = list(labeled_ids)
    run.pool = list(pool)
    return run


def area_under_curve(curve: Sequence[dict], metric: str = "f1") -> float:
    """Trapezoidal area of metric over labeled_count, normalized to [0,1]."""
    if len(curve) == 1:
        return float(curve[0][metric])
    xs = np.array([row["labeled_count"] for row in curve], dtype=np.float64)
    ys = np.array([row[metric] for row in curve], dtype=np.float64)
    span = xs[-1] - xs[0]
    if span <= 0:
        return float(ys.mean())
    return float(np.trapezoid(ys, xs) / span)


def labels_to_reach(curve: Sequence[dict], target_f1: float) -> Optional[int]:
    """Smallest labeled_count at which the curve attains target_f1."""
    for row in curve:
        if row["f1"] >= target_f1:
            return int(row["labeled_count"])
    return None


def curve_to_csv(curve: Sequence[dict]) -> str:
    lines = ["iteration,labeled_count,precision,recall,f1"]
    for row in curve:
        lines.append(
            f"{row['iteration']},{row['labeled_count']},"
            f"{row['precision']:.6f},{row['recall']:.6f},{row['f1']:.6f}"
        )
    return "\n".join(lines) + "\n"
