"""Sliding-window semantic matching of keywords against corpus documents.

Every n-gram window of a document is compared to every keyword by cosine
similarity of their embeddings; a document is flagged as a debt candidate
when its best pair scores strictly above the threshold. The argmax pair is
reported so reviewers can see which chunk triggered the match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .embed import EmbeddingVector, cosine
from .keywords import KeywordSet
from .textprep import NGram, TokenizedDoc, iter_windows


@dataclass
class FilterConfig:
    keyword_set: KeywordSet
    provider: object
    threshold: float = 0.9
    ngram_sizes: Tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if not self.ngram_sizes or not set(self.ngram_sizes) <= {1, 2, 3}:
            raise ValueError(f"ngram_sizes must be a non-empty subset of {{1,2,3}}")


@dataclass
class FilterResult:
    doc_id: str
    matched: bool
    best_ngram: Optional[NGram]
    best_keyword: Optional[str]
    best_score: float

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "matched": self.matched,
            "best_ngram": self.best_ngram.text if self.best_ngram else None,
            "best_keyword": self.best_keyword,
            "best_score": self.best_score,
        }


def _keyword_vectors(config: FilterConfig) -> List[Tuple[str, EmbeddingVector]]:
    # lexicographic keyword order fixes the tie-break
    texts = sorted(set(config.keyword_set.texts))
    return [(text, config.provider.embed_tokens(text.split())) for text in texts]


def filter_doc(
    doc: TokenizedDoc,
    config: FilterConfig,
    _keywords: Optional[List[Tuple[str, EmbeddingVector]]] = None,
) -> FilterResult:
    """Score every window x keyword pair; return the argmax and match flag.

    Ties resolve to the earlier window start, then the smaller window
    size, then the lexicographically smaller keyword.
    """
    if not config.keyword_set.entries:
        raise ValueError("keyword set is empty")
    keywords = _keywords if _keywords is not None else _keyword_vectors(config)
    best_score = 0.0
    best_window: Optional[Tuple[int, int, str]] = None
    best_keyword: Optional[str] = None
    for start, n, text in iter_windows(doc.tokens, config.ngram_sizes):
        window_vec = config.provider.embed_tokens(text.split())
        for keyword_text, keyword_vec in keywords:
            score = cosine(window_vec, keyword_vec)
            if best_window is None or score > best_score:
                best_score = score
                best_window = (start, n, text)
                best_keyword = keyword_text
    if best_window is None:
        return FilterResult(
            doc_id=doc.doc_id, matched=False, best_ngram=None, best_keyword=None, best_score=0.0
        )
    start, n, text = best_window
    return FilterResult(
        doc_id=doc.doc_id,
        matched=best_score > config.threshold,
        best_ngram=NGram(text=text, n=n, doc_id=doc.doc_id, start_index=start),
        best_keyword=best_keyword,
        best_score=best_score,
    )


def filter_corpus(
    docs: Sequence[TokenizedDoc], config: FilterConfig
) -> Tuple[List[FilterResult], Dict[str, int]]:
    """Filter every document, preserving corpus order."""
    keywords = _keyword_vectors(config)
    results = [filter_doc(doc, config, _keywords=keywords) for doc in docs]
    matched = sum(1 for r in results if r.matched)
    return results, {"matched": matched, "unmatched": len(results) - matched}
