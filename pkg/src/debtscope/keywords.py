"""Ranked keyword extraction over a corpus of debt-positive documents.

Three methods with distinct philosophies: plain corpus TF-IDF, embedding
similarity between candidate phrases and their source document, and a
seed-guided blend that pulls candidates toward a fixed set of
debt-indicative seed terms. All methods share one post-filter that drops
short tokens, blacklisted phrases and identifier-like noise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .embed import cosine
from .textprep import TokenizedDoc, ngrams

DEFAULT_SEEDS = ("move", "refactor", "remove", "dependency", "couple", "update")
DEFAULT_TOP_K = 15

_VOWELS = set("aeiou")


@dataclass(frozen=True)
class KeywordEntry:
    ngram: str
    n: int
    score: float


@dataclass
class KeywordSet:
    method: str
    entries: List[KeywordEntry]
    top_k: int
    source_corpus_hash: str = ""

    @property
    def texts(self) -> List[str]:
        return [e.ngram for e in self.entries]

    def to_json(self, blacklist_hash: str = "") -> dict:
        n = self.entries[0].n if self.entries else 0
        return {
            "method": self.method,
            "n": n,
            "entries": [{"ngram": e.ngram, "score": e.score} for e in self.entries],
            "blacklist_hash": blacklist_hash,
        }


@dataclass
class SeedKeywordSet:
    seeds: List[str] = field(default_factory=lambda: list(DEFAULT_SEEDS))

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seed keyword set must be non-empty")


def corpus_hash(docs: Sequence[TokenizedDoc]) -> str:
    h = hashlib.sha256()
    for doc in docs:
        h.update(doc.doc_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(" ".join(doc.tokens).encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()


def _looks_like_identifier(token: str) -> bool:
    return len(token) > 25 or not any(ch in _VOWELS for ch in token)


def postfilter(
    entries: Iterable[KeywordEntry], blacklist: Sequence[str] = ()
) -> List[KeywordEntry]:
    """Drop entries with tokens shorter than 3 chars, blacklisted phrases
    and identifier-like tokens (vowel-free or longer than 25 chars)."""
    banned = {b.lower() for b in blacklist}
    kept = []
    for entry in entries:
        if entry.ngram.lower() in banned:
            continue
        tokens = entry.ngram.split()
        if any(len(tok) < 3 for tok in tokens):
            continue
        if any(_looks_like_identifier(tok) for tok in tokens):
            continue
        kept.append(entry)
    return kept


def _ranked(entries: List[KeywordEntry], top_k: int) -> List[KeywordEntry]:
    entries.sort(key=lambda e: (-e.score, e.ngram))
    return entries[:top_k]


def extract_tfidf(
    docs: Sequence[TokenizedDoc],
    n: int,
    top_k: int = DEFAULT_TOP_K,
    blacklist: Sequence[str] = (),
) -> KeywordSet:
    """Corpus-level TF-IDF ranking of n-grams.

    score(g) = sum over documents of tf(g, doc) * idf(g), with
    idf = ln((1+N)/(1+df)) + 1.
    """
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    if not docs:
        raise ValueError("corpus is empty")
    n_docs = len(docs)
    tf_total: Dict[str, int] = {}
    df: Dict[str, int] = {}
    for doc in docs:
        counts: Dict[str, int] = {}
        for gram in ngrams(doc, n):
            counts[gram.text] = counts.get(gram.text, 0) + 1
        for text, count in counts.items():
            tf_total[text] = tf_total.get(text, 0) + count
            df[text] = df.get(text, 0) + 1
    entries = []
    for text, total in tf_total.items():
        idf = math.log((1 + n_docs) / (1 + df[text])) + 1.0
        entries.append(KeywordEntry(ngram=text, n=n, score=total * idf))
    entries = postfilter(entries, blacklist)
    return KeywordSet(
        method="tfidf",
        entries=_ranked(entries, top_k),
        top_k=top_k,
        source_corpus_hash=corpus_hash(docs),
    )


def _embedsim_scores(
    docs: Sequence[TokenizedDoc], provider, n: int
) -> Dict[str, float]:
    """Max over documents of cosine(candidate n-gram, its document)."""
    scores: Dict[str, float] = {}
    for doc in docs:
        if not doc.tokens:
            continue
        doc_vec = provider.embed_tokens(doc.tokens)
        for gram in ngrams(doc, n):
            sim = cosine(provider.embed_tokens(gram.text.split()), doc_vec)
            prev = scores.get(gram.text)
            if prev is None or sim > prev:
                scores[gram.text] = sim
    return scores


def extract_embedsim(
    docs: Sequence[TokenizedDoc],
    provider,
    n: int,
    top_k: int = DEFAULT_TOP_K,
    blacklist: Sequence[str] = (),
) -> KeywordSet:
    """Rank candidate n-grams by semantic similarity to their document."""
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    scores = _embedsim_scores(docs, provider, n)
    entries = [KeywordEntry(ngram=t, n=n, score=s) for t, s in scores.items()]
    entries = postfilter(entries, blacklist)
    return KeywordSet(
        method="embedsim",
        entries=_ranked(entries, top_k),
        top_k=top_k,
        source_corpus_hash=corpus_hash(docs),
    )


def extract_seeded(
    docs: Sequence[TokenizedDoc],
    provider,
    seeds: SeedKeywordSet,
    n: int,
    top_k: int = DEFAULT_TOP_K,
    blend: float = 0.5,
    blacklist: Sequence[str] = (),
) -> KeywordSet:
    """Blend of document similarity and best-seed similarity per candidate.

    score = (1-blend) * embedsim + blend * max over seeds of
    cosine(candidate, seed). blend=0 degenerates to extract_embedsim.
    """
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must be in [0, 1], got {blend}")
    doc_scores = _embedsim_scores(docs, provider, n)
    seed_vecs = [provider.embed_text(seed) for seed in seeds.seeds]
    entries = []
    for text, doc_sim in doc_scores.items():
        cand_vec = provider.embed_tokens(text.split())
        seed_sim = max(cosine(cand_vec, sv) for sv in seed_vecs)
        entries.append(
            KeywordEntry(
                ngram=text, n=n, score=(1.0 - blend) * doc_sim + blend * seed_sim
            )
        )
    entries = postfilter(entries, blacklist)
    return KeywordSet(
        method="seeded",
        entries=_ranked(entries, top_k),
        top_k=top_k,
        source_corpus_hash=corpus_hash(docs),
    )


def save_keyword_sets(sets: Sequence[KeywordSet], path, blacklist: Sequence[str] = ()):
    blacklist_hash = hashlib.sha256(
        "\n".join(sorted(b.lower() for b in blacklist)).encode("utf-8")
    ).hexdigest()
    payload = [ks.to_json(blacklist_hash) for ks in sets]
    from pathlib import Path

    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_keyword_sets(path) -> List[KeywordSet]:
    from pathlib import Path

    payload = json.loads(Path(path).read_text("utf-8"))
    if isinstance(payload, dict):
        payload = [payload]
    sets = []
    for obj in payload:
        entries = [
            KeywordEntry(ngram=e["ngram"], n=len(e["ngram"].split()), score=float(e["score"]))
            for e in obj.get("entries", [])
        ]
        sets.append(
            KeywordSet(method=obj.get("method", "tfidf"), entries=entries, top_k=len(entries))
        )
    return sets
