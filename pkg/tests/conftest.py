import pytest

from keytext.corpus import Instance
from keytext.synthetic import (  # noqa: F401 - re-exported for test modules
    make_identity_instance,
    make_redundancy_corpus,
    make_topic_corpus,
    word,
)


@pytest.fixture
def identity_instance() -> Instance:
    return make_identity_instance(seed=5)


@pytest.fixture(scope="session")
def topic_corpus() -> list[Instance]:
    return make_topic_corpus()


@pytest.fixture(scope="session")
def redundancy_corpus() -> list[Instance]:
    return make_redundancy_corpus()
