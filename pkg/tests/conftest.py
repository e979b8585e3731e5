# -*- coding: utf-8 -*-
import pytest

from src.data.synthetic import topic_collection
from src.index.corpus import build_index

TINY_DOCS = [
    ("d1", "apple banana apple"),
    ("d2", "banana cherry"),
    ("d3", "cherry cherry date apple"),
    ("d4", "date elder"),
]


@pytest.fixture
def tiny_docs():
    return list(TINY_DOCS)


@pytest.fixture
def tiny_index():
    return build_index(TINY_DOCS)


@pytest.fixture(scope="session")
def toy():
    return topic_collection(
        num_topics=2,
        docs_per_topic=60,
        words_per_topic=20,
        background_words=10,
        log_queries=80,
        test_queries=20,
        labeled_per_topic=10,
        seed=7,
    )


@pytest.fixture(scope="session")
def toy_index(toy):
    return build_index(toy.documents)
