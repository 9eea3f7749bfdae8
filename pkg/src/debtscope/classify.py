"""Text classifiers behind one fit/predict-probabilities surface.

Two deterministic built-ins keep the whole pipeline hermetic at desk
scale: multinomial naive Bayes over token counts and softmax regression
trained by full-batch gradient descent for a fixed epoch count. Heavier
models plug in through the external HTTP adapter without changing
callers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .embed import TfidfVectorProvider
from .textprep import TokenizedDoc


class TrainingError(ValueError):
    """Training set violates a precondition (e.g. a class has no examples)."""


@dataclass
class ClassifierSpec:
    kind: str = "logistic"  # naive-bayes | logistic | external
    features: str = "tfidf-vector"  # tfidf-vector | embedding
    l2: float = 1.0
    epochs: int = 100
    lr: float = 0.1
    nb_alpha: float = 1.0
    balanced: bool = False
    rng_seed: int = 0
    external_url: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": self.features,
            "l2": self.l2,
            "epochs": self.epochs,
            "lr": self.lr,
            "nb_alpha": self.nb_alpha,
            "balanced": self.balanced,
            "rng_seed": self.rng_seed,
            "external_url": self.external_url,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


@dataclass
class ProbVector:
    classes: Tuple[str, ...]
    probs: np.ndarray

    def prob_of(self, label: str) -> float:
        return float(self.probs[self.classes.index(label)])

    def argmax_label(self) -> str:
        return self.classes[int(np.argmax(self.probs))]

    def as_dict(self) -> Dict[str, float]:
        return {c: float(p) for c, p in zip(self.classes, self.probs)}


def _check_training(training: Sequence[Tuple[TokenizedDoc, str]]) -> List[str]:
    if not training:
        raise TrainingError("empty training set")
    classes = sorted({label for _, label in training})
    if len(classes) < 2:
        raise TrainingError(
            f"training set has a single class {classes}; label a larger seed set"
        )
    counts = {c: 0 for c in classes}
    for _, label in training:
        counts[label] += 1
    missing = [c for c, n in counts.items() if n == 0]
    if missing:
        raise TrainingError(f"classes without examples: {missing}")
    return classes


class NaiveBayesModel:
    """Multinomial naive Bayes on token counts with additive smoothing."""

    kind = "naive-bayes"

    def __init__(self, classes, vocabulary, log_priors, log_likelihoods, alpha):
        self.classes: Tuple[str, ...] = tuple(classes)
        self.vocabulary: Dict[str, int] = vocabulary
        self.log_priors = np.asarray(log_priors, dtype=np.float64)
        self.log_likelihoods = np.asarray(log_likelihoods, dtype=np.float64)
        self.alpha = alpha

    def predict_proba(self, doc: TokenizedDoc) -> ProbVector:
        scores = self.log_priors.copy()
        for token in doc.tokens:
            idx = self.vocabulary.get(token)
            if idx is not None:
                scores += self.log_likelihoods[:, idx]
        scores -= scores.max()
        probs = np.exp(scores)
        probs /= probs.sum()
        return ProbVector(classes=self.classes, probs=probs)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "classes": list(self.classes),
                "vocabulary": self.vocabulary,
                "log_priors": self.log_priors.tolist(),
                "log_likelihoods": self.log_likelihoods.tolist(),
                "alpha": self.alpha,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str) -> "NaiveBayesModel":
        d = json.loads(payload)
        return cls(d["classes"], d["vocabulary"], d["log_priors"], d["log_likelihoods"], d["alpha"])


def _fit_naive_bayes(spec: ClassifierSpec, training) -> NaiveBayesModel:
    if spec.features == "embedding":
        raise TrainingError("naive-bayes requires count features, not embeddings")
    classes = _check_training(training)
    vocab = sorted({tok for doc, _ in training for tok in doc.tokens})
    vocabulary = {tok: i for i, tok in enumerate(vocab)}
    counts = np.zeros((len(classes), len(vocab)), dtype=np.float64)
    class_counts = np.zeros(len(classes), dtype=np.float64)
    class_index = {c: i for i, c in enumerate(classes)}
    for doc, label in training:
        ci = class_index[label]
        class_counts[ci] += 1
        for token in doc.tokens:
            counts[ci, vocabulary[token]] += 1
    alpha = spec.nb_alpha
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):  # alpha=0 legitimately yields -inf
        log_likelihoods = np.log(counts + alpha) - np.log(totals + alpha * len(vocab))
    log_priors = np.log(class_counts / class_counts.sum())
    return NaiveBayesModel(classes, vocabulary, log_priors, log_likelihoods, alpha)


class LogisticModel:
    """Softmax regression over tf-idf or embedding features."""

    kind = "logistic"

    def __init__(self, classes, weights, bias, feature_kind, tfidf: Optional[TfidfVectorProvider], provider=None):
        self.classes: Tuple[str, ...] = tuple(classes)
        self.weights = np.asarray(weights, dtype=np.float64)  # (d, C)
        self.bias = np.asarray(bias, dtype=np.float64)  # (C,)
        self.feature_kind = feature_kind
        self.tfidf = tfidf
        self.provider = provider

    def _featurize(self, doc: TokenizedDoc) -> np.ndarray:
        if self.feature_kind == "tfidf-vector":
            return self.tfidf.embed_tokens(doc.tokens).values
        return self.provider.embed_tokens(doc.tokens).values

    def predict_proba(self, doc: TokenizedDoc) -> ProbVector:
        logits = self._featurize(doc) @ self.weights + self.bias
        logits -= logits.max()
        probs = np.exp(logits)
        probs /= probs.sum()
        return ProbVector(classes=self.classes, probs=probs)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "classes": list(self.classes),
                "weights": self.weights.tolist(),
                "bias": self.bias.tolist(),
                "feature_kind": self.feature_kind,
                "vocabulary": self.tfidf.vocabulary if self.tfidf else None,
                "idf": self.tfidf.idf.tolist() if self.tfidf else None,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str, provider=None) -> "LogisticModel":
        d = json.loads(payload)
        tfidf = None
        if d.get("vocabulary") is not None:
            tfidf = TfidfVectorProvider()
            tfidf.vocabulary = d["vocabulary"]
            tfidf.idf = np.asarray(d["idf"], dtype=np.float64)
        return cls(d["classes"], d["weights"], d["bias"], d["feature_kind"], tfidf, provider)


def softmax_loss_grad(
    X: np.ndarray,
    Y: np.ndarray,
    W: np.ndarray,
    b: np.ndarray,
    l2: float,
    sample_weights: Optional[np.ndarray] = None,
):
    """Weighted mean NLL with a per-sample-scaled L2 penalty, plus gradients.

    loss = mean_i w_i * nll_i + 0.5 * (l2 / n) * ||W||^2
    The 1/n scaling keeps the default penalty comparable to the data term
    regardless of training-set size (sklearn's C=1 convention).
    """
    n = X.shape[0]
    if sample_weights is None:
        sample_weights = np.ones(n)
    logits = X @ W + b
    logits = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    eps = 1e-300
    nll = -np.log(np.clip((probs * Y).sum(axis=1), eps, None))
    loss = float(np.mean(sample_weights * nll) + 0.5 * (l2 / n) * np.sum(W * W))
    delta = (probs - Y) * sample_weights[:, None] / n
    grad_w = X.T @ delta + (l2 / n) * W
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def _warm_start_weights(
    init: "LogisticModel", classes, dimension: int, tfidf: Optional[TfidfVectorProvider]
):
    """Carry weights over from a previous model where the feature spaces align."""
    if tuple(init.classes) != tuple(classes):
        return None
    W = np.zeros((dimension, len(classes)))
    if tfidf is not None and init.tfidf is not None:
        for token, new_idx in tfidf.vocabulary.items():
            old_idx = init.tfidf.vocabulary.get(token)
            if old_idx is not None:
                W[new_idx] = init.weights[old_idx]
    elif tfidf is None and init.tfidf is None and init.weights.shape[0] == dimension:
        W = init.weights.copy()
    else:
        return None
    return W, init.bias.copy()


def _fit_logistic(spec: ClassifierSpec, training, provider=None, init_model=None) -> LogisticModel:
    classes = _check_training(training)
    class_index = {c: i for i, c in enumerate(classes)}
    tfidf = None
    if spec.features == "tfidf-vector":
        tfidf = TfidfVectorProvider().fit([doc for doc, _ in training])
        featurize = lambda doc: tfidf.embed_tokens(doc.tokens).values
    else:
        if provider is None:
            raise TrainingError("embedding features need an embedding provider")
        featurize = lambda doc: provider.embed_tokens(doc.tokens).values
    X = np.stack([featurize(doc) for doc, _ in training])
    Y = np.zeros((len(training), len(classes)))
    for i, (_, label) in enumerate(training):
        Y[i, class_index[label]] = 1.0
    sample_weights = None
    if spec.balanced:
        class_totals = Y.sum(axis=0)
        per_class = len(training) / (len(classes) * class_totals)
        sample_weights = Y @ per_class
    W = np.zeros((X.shape[1], len(classes)))
    b = np.zeros(len(classes))
    if init_model is not None and isinstance(init_model, LogisticModel):
        carried = _warm_start_weights(init_model, classes, X.shape[1], tfidf)
        if carried is not None:
            W, b = carried
    for _ in range(spec.epochs):
        _, grad_w, grad_b = softmax_loss_grad(X, Y, W, b, spec.l2, sample_weights)
        W -= spec.lr * grad_w
        b -= spec.lr * grad_b
    return LogisticModel(classes, W, b, spec.features, tfidf, provider)


class ExternalClassifier:
    """Adapter for remote models speaking the fit/predict JSON protocol.

    POST /fit {"examples": [{"tokens": [...], "label": "..."}]}
        -> {"model_id": "...", "classes": [...]}
    POST /predict_proba {"model_id": "...", "tokens": [...]}
        -> {"probs": [...]}
    """

    kind = "external"

    def __init__(self, base_url: str, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client()
        self.model_id: Optional[str] = None
        self.classes: Tuple[str, ...] = ()

    def fit(self, training) -> "ExternalClassifier":
        _check_training(training)
        payload = {
            "examples": [{"tokens": doc.tokens, "label": label} for doc, label in training]
        }
        resp = self._client.post(f"{self.base_url}/fit", json=payload)
        resp.raise_for_status()
        data = resp.json()
        self.model_id = data["model_id"]
        self.classes = tuple(data["classes"])
        return self

    def predict_proba(self, doc: TokenizedDoc) -> ProbVector:
        resp = self._client.post(
            f"{self.base_url}/predict_proba",
            json={"model_id": self.model_id, "tokens": doc.tokens},
        )
        resp.raise_for_status()
        probs = np.asarray(resp.json()["probs"], dtype=np.float64)
        return ProbVector(classes=self.classes, probs=probs)


def fit(spec: ClassifierSpec, training: Sequence[Tuple[TokenizedDoc, str]], provider=None,
        init_model=None):
    """Train a model; deterministic for a fixed spec and data.

    `init_model` warm-starts logistic training from a previous model's
    weights (aligned by vocabulary); by default training starts from zeros.
    """
    if spec.kind == "naive-bayes":
        return _fit_naive_bayes(spec, training)
    if spec.kind == "logistic":
        return _fit_logistic(spec, training, provider, init_model)
    if spec.kind == "external":
        if not spec.external_url:
            raise TrainingError("external classifier needs external_url")
        return ExternalClassifier(spec.external_url).fit(training)
    raise ValueError(f"unknown classifier kind {spec.kind!r}")


def predict_proba(model, doc: TokenizedDoc) -> ProbVector:
    return model.predict_proba(doc)
