import numpy as np
import pytest

from debtscope.corpus import Corpus, Document, STATUS_RESOLVED
from debtscope.embed import HashedBowProvider
from debtscope.textprep import PrepConfig, preprocess


def make_doc(doc_id, summary, description="", status=STATUS_RESOLVED):
    return Document.build(
        id=doc_id, project=doc_id.split("-")[0], summary=summary,
        description=description, status=status,
    )


@pytest.fixture
def small_corpus():
    return Corpus(
        documents=[
            make_doc("CAMEL-1", "Refactor dependency handling", "Remove the cyclic dependency between core and client"),
            make_doc("CAMEL-2", "Fix typo in tutorial", "The login page tutorial has a misprint"),
            make_doc("KAFKA-3", "Decouple consumer from broker internals", "Move client class to new package"),
        ],
        manifest={"source_path": "fixture", "ingest_time": "", "counts": {"resolved": 3, "unresolved": 0, "rejected": 0}},
    )


@pytest.fixture
def provider():
    return HashedBowProvider(dimension=4096, seed=1)


@pytest.fixture
def tokenized(small_corpus):
    prep = PrepConfig()
    return [preprocess(doc, prep) for doc in small_corpus]


def random_tokens(rng, vocab, low=1, high=12):
    count = int(rng.integers(low, high))
    return [vocab[int(i)] for i in rng.integers(0, len(vocab), size=count)]
