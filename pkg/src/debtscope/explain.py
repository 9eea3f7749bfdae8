"""Local explanations: perturbation surrogate (lime) and Shapley values (shap).

Both methods treat the unique tokens of a document as players and probe
the classifier on perturbed copies where some players are deleted (all
occurrences at once). The empty coalition is the empty document. Shapley
attributions are exact for small player counts and antithetic
permutation-sampled otherwise; the efficiency identity
base + sum(weights) = p(target | full doc) is enforced on every result.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import classify
from .textprep import TokenizedDoc

EXACT_TOLERANCE = 1e-6
SAMPLED_TOLERANCE = 0.02


class ExplainError(RuntimeError):
    pass


@dataclass
class ExplainConfig:
    lime_num_samples: int = 1000
    lime_kernel_width: float = 0.25
    lime_ridge: float = 1.0
    lime_top_k: int = 10
    shap_exact_max_tokens: int = 12
    shap_num_permutations: int = 2048
    rng_seed: int = 0

    def __post_init__(self):
        if self.lime_num_samples < 10:
            raise ValueError("lime_num_samples must be >= 10")
        if self.shap_exact_max_tokens > 20:
            raise ValueError("shap_exact_max_tokens must be <= 20")

    def to_dict(self) -> dict:
        return {
            "lime": {
                "num_samples": self.lime_num_samples,
                "kernel_width": self.lime_kernel_width,
                "ridge": self.lime_ridge,
                "top_k": self.lime_top_k,
            },
            "shap": {
                "exact_max_tokens": self.shap_exact_max_tokens,
                "num_permutations": self.shap_num_permutations,
            },
            "rng_seed": self.rng_seed,
        }

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]


@dataclass
class WeightEntry:
    token: str
    index: int  # token position of the first occurrence
    weight: float
    occurrences: List[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "token": self.token,
            "index": self.index,
            "weight": self.weight,
            "occurrences": list(self.occurrences),
        }


@dataclass
class Explanation:
    doc_id: str
    method: str
    predicted: Dict[str, float]
    weights: List[WeightEntry]
    base_value: Optional[float] = None
    config_hash: str = ""

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "method": self.method,
            "predicted": self.predicted,
            "base_value": self.base_value,
            "weights": [w.to_record() for w in self.weights],
            "config_hash": self.config_hash,
        }


def _players(doc: TokenizedDoc) -> Tuple[List[str], List[List[int]]]:
    """Unique tokens in first-occurrence order with their position lists."""
    order: List[str] = []
    occurrences: Dict[str, List[int]] = {}
    for i, token in enumerate(doc.tokens):
        if token not in occurrences:
            order.append(token)
            occurrences[token] = []
        occurrences[token].append(i)
    return order, [occurrences[t] for t in order]


def _prob_fn(model, doc: TokenizedDoc, target: str) -> Callable[[Sequence[int]], float]:
    """p(target | doc restricted to the given kept player indices)."""
    players, _ = _players(doc)

    def prob(kept: Sequence[int]) -> float:
        kept_tokens = {players[i] for i in kept}
        tokens = [t for t in doc.tokens if t in kept_tokens]
        sub = TokenizedDoc(doc_id=doc.doc_id, tokens=tokens)
        return classify.predict_proba(model, sub).prob_of(target)

    return prob


def explain_lime(
    model,
    doc: TokenizedDoc,
    target: str,
    config: Optional[ExplainConfig] = None,
) -> Explanation:
    """Weighted ridge surrogate over random token-presence masks.

    Masks are i.i.d. fair coin flips per unique token; each sample is
    weighted by exp(-D^2 / sigma^2) where D is the cosine distance between
    the mask and the all-ones mask. Reports the top_k coefficients by
    absolute value.
    """
    config = config or ExplainConfig()
    if not doc.tokens:
        raise ValueError("cannot explain an empty document")
    players, occurrences = _players(doc)
    u = len(players)
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    prob = _prob_fn(model, doc, target)

    masks = rng.integers(0, 2, size=(config.lime_num_samples, u)).astype(np.float64)
    y = np.empty(config.lime_num_samples)
    for s in range(config.lime_num_samples):
        kept = [i for i in range(u) if masks[s, i] > 0]
        y[s] = prob(kept)
    k = masks.sum(axis=1)
    distance = 1.0 - np.sqrt(k / u)
    sample_w = np.exp(-(distance**2) / (config.lime_kernel_width**2))

    # weighted ridge with an unpenalized intercept (via weighted centering)
    w_sum = sample_w.sum()
    x_mean = (sample_w[:, None] * masks).sum(axis=0) / w_sum
    y_mean = float((sample_w * y).sum() / w_sum)
    Xc = masks - x_mean
    yc = y - y_mean
    A = Xc.T @ (sample_w[:, None] * Xc) + config.lime_ridge * np.eye(u)
    beta = np.linalg.solve(A, Xc.T @ (sample_w * yc))

    ranked = sorted(range(u), key=lambda i: (-abs(beta[i]), i))[: config.lime_top_k]
    weights = [
        WeightEntry(
            token=players[i],
            index=occurrences[i][0],
            weight=float(beta[i]),
            occurrences=occurrences[i],
        )
        for i in ranked
    ]
    predicted = classify.predict_proba(model, doc).as_dict()
    return Explanation(
        doc_id=doc.doc_id,
        method="lime",
        predicted=predicted,
        weights=weights,
        base_value=None,
        config_hash=config.hash(),
    )


def _exact_shapley(prob: Callable[[Sequence[int]], float], u: int) -> Tuple[np.ndarray, float, float]:
    values: Dict[int, float] = {}
    for size in range(u + 1):
        for subset in itertools.combinations(range(u), size):
            mask = 0
            for i in subset:
                mask |= 1 << i
            values[mask] = prob(subset)
    fact = [math.factorial(i) for i in range(u + 1)]
    phi = np.zeros(u)
    for mask, value in values.items():
        size = bin(mask).count("1")
        for i in range(u):
            if mask & (1 << i):
                continue
            with_i = values[mask | (1 << i)]
            weight = fact[size] * fact[u - size - 1] / fact[u]
            phi[i] += weight * (with_i - value)
    return phi, values[0], values[(1 << u) - 1]


def _sampled_shapley(
    prob: Callable[[Sequence[int]], float],
    u: int,
    num_permutations: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, float, float]:
    base = prob(())
    full = prob(tuple(range(u)))
    phi = np.zeros(u)
    pairs = max(1, num_permutations // 2)
    count = 0
    for _ in range(pairs):
        forward = rng.permutation(u)
        for perm in (forward, forward[::-1]):
            prev = base
            kept: List[int] = []
            for player in perm:
                kept.append(int(player))
                current = prob(kept)
                phi[player] += current - prev
                prev = current
            count += 1
    phi /= count
    return phi, base, full


def explain_shap(
    model,
    doc: TokenizedDoc,
    target: str,
    config: Optional[ExplainConfig] = None,
) -> Explanation:
    """Shapley attribution of p(target) across unique tokens.

    Exact coalition enumeration when the player count is small enough,
    antithetic permutation sampling otherwise. The efficiency identity is
    checked and a violation raises ExplainError.
    """
    config = config or ExplainConfig()
    if not doc.tokens:
        raise ValueError("cannot explain an empty document")
    players, occurrences = _players(doc)
    u = len(players)
    prob = _prob_fn(model, doc, target)

    exact = u <= config.shap_exact_max_tokens
    if exact:
        phi, base, full = _exact_shapley(prob, u)
        tolerance = EXACT_TOLERANCE
    else:
        rng = np.random.Generator(np.random.PCG64(config.rng_seed))
        phi, base, full = _sampled_shapley(prob, u, config.shap_num_permutations, rng)
        tolerance = SAMPLED_TOLERANCE
    gap = abs(base + float(phi.sum()) - full)
    if gap > tolerance:
        raise ExplainError(
            f"efficiency violated: base {base:.6f} + sum(phi) {float(phi.sum()):.6f} "
            f"!= prediction {full:.6f} (gap {gap:.2e})"
        )

    weights = [
        WeightEntry(
            token=players[i],
            index=occurrences[i][0],
            weight=float(phi[i]),
            occurrences=occurrences[i],
        )
        for i in range(u)
    ]
    predicted = classify.predict_proba(model, doc).as_dict()
    return Explanation(
        doc_id=doc.doc_id,
        method="shap",
        predicted=predicted,
        weights=weights,
        base_value=base,
        config_hash=config.hash(),
    )
