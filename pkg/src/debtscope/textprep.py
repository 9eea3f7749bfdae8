"""Deterministic normalization, tokenization and n-gram chunking.

Every downstream stage (keyword extraction, semantic filtering, classifier
features, explanations) consumes tokens produced here, so the pipeline has
exactly one tokenizer. Tokens are lowercased, optionally stop-word filtered
and stemmed; each token keeps a byte span into the source text so UIs can
highlight the original surface form without re-tokenizing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, List, Tuple

from . import porter

_CODE_MACRO_RE = re.compile(r"\{code(?::[^}]*)?\}.*?\{code\}", re.DOTALL | re.IGNORECASE)
_NOFORMAT_RE = re.compile(r"\{noformat\}.*?\{noformat\}", re.DOTALL | re.IGNORECASE)
_LONE_MACRO_RE = re.compile(r"\{(?:code(?::[^}]*)?|noformat)\}", re.IGNORECASE)
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")

# Applying the stemmer to its own output can strip further (e.g. early ->
# earli -> ear), which would break preprocess idempotence, so stems are
# iterated to a fixpoint.
_MAX_STEM_PASSES = 8


def _load_stopwords() -> frozenset:
    text = resources.files("debtscope").joinpath("data/stopwords.txt").read_text("utf-8")
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


STOPWORDS = _load_stopwords()


@dataclass(frozen=True)
class PrepConfig:
    """Tokenizer settings; serialized into run manifests."""

    stem: bool = True
    remove_stopwords: bool = True
    min_token_len: int = 1

    def to_dict(self) -> dict:
        return {
            "stem": self.stem,
            "remove_stopwords": self.remove_stopwords,
            "min_token_len": self.min_token_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrepConfig":
        return cls(
            stem=bool(d.get("stem", True)),
            remove_stopwords=bool(d.get("remove_stopwords", True)),
            min_token_len=int(d.get("min_token_len", 1)),
        )


@dataclass
class TokenizedDoc:
    doc_id: str
    tokens: List[str]
    raw_spans: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.raw_spans and len(self.raw_spans) != len(self.tokens):
            raise ValueError("tokens and raw_spans must have equal length")


@dataclass(frozen=True)
class NGram:
    text: str
    n: int
    doc_id: str
    start_index: int


def stem_token(token: str) -> str:
    """Porter stem iterated to a fixpoint (idempotent by construction)."""
    current = token
    for _ in range(_MAX_STEM_PASSES):
        nxt = porter.stem(current)
        if nxt == current:
            break
        current = nxt
    return current


def _mask_regions(text: str) -> str:
    """Blank out code macros, noformat blocks and URLs, preserving offsets."""

    def blank(match: "re.Match") -> str:
        return " " * (match.end() - match.start())

    masked = _CODE_MACRO_RE.sub(blank, text)
    masked = _NOFORMAT_RE.sub(blank, masked)
    masked = _LONE_MACRO_RE.sub(blank, masked)
    masked = _URL_RE.sub(blank, masked)
    return masked


def _char_to_byte_offsets(text: str) -> List[int]:
    offsets = [0]
    total = 0
    for ch in text:
        total += len(ch.encode("utf-8"))
        offsets.append(total)
    return offsets


def preprocess_text(text: str, config: PrepConfig = PrepConfig(), doc_id: str = "") -> TokenizedDoc:
    """Tokenize raw text into a TokenizedDoc.

    Lowercases, strips Jira code/noformat macros and URLs, splits on
    non-alphanumeric characters, then applies stop-word removal and
    stemming per config. Byte spans index the UTF-8 encoding of `text`.
    """
    masked = _mask_regions(text)
    byte_at = _char_to_byte_offsets(text)
    tokens: List[str] = []
    spans: List[Tuple[int, int]] = []
    for match in _TOKEN_RE.finditer(masked):
        token = match.group().lower()
        if config.remove_stopwords and token in STOPWORDS:
            continue
        if config.stem:
            token = stem_token(token)
        if config.remove_stopwords and token in STOPWORDS:
            continue
        if len(token) < config.min_token_len:
            continue
        tokens.append(token)
        spans.append((byte_at[match.start()], byte_at[match.end()]))
    return TokenizedDoc(doc_id=doc_id, tokens=tokens, raw_spans=spans)


def preprocess(doc, config: PrepConfig = PrepConfig()) -> TokenizedDoc:
    """Tokenize a Document's unified text."""
    return preprocess_text(doc.unified_text, config, doc_id=doc.id)


def ngrams(tdoc: TokenizedDoc, n: int) -> List[NGram]:
    """All consecutive n-token windows, in order of start index."""
    if not 1 <= n <= 3:
        raise ValueError(f"n must be in 1..3, got {n}")
    out = []
    for start in range(len(tdoc.tokens) - n + 1):
        out.append(
            NGram(
                text=" ".join(tdoc.tokens[start : start + n]),
                n=n,
                doc_id=tdoc.doc_id,
                start_index=start,
            )
        )
    return out


def iter_windows(tokens: List[str], sizes: Iterable[int]) -> List[Tuple[int, int, str]]:
    """(start, n, text) for every window of each size, ordered by (start, n)."""
    windows = []
    for n in sorted(set(sizes)):
        if not 1 <= n <= 3:
            raise ValueError(f"n-gram size must be in 1..3, got {n}")
        for start in range(len(tokens) - n + 1):
            windows.append((start, n, " ".join(tokens[start : start + n])))
    windows.sort(key=lambda w: (w[0], w[1]))
    return windows
