"""Shared fixtures: the committed vocabulary and corpora, plus a micro vocab."""

from pathlib import Path

import pytest

from fqninfer.corpus import load_corpus
from fqninfer.tokenizer import Vocab

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def vocab() -> Vocab:
    return Vocab.from_file(FIXTURES / "vocab.txt")


@pytest.fixture(scope="session")
def corpus_units(vocab):
    return load_corpus(FIXTURES / "corpus.jsonl")


@pytest.fixture(scope="session")
def memorization_units(vocab):
    return load_corpus(FIXTURES / "memorization.jsonl")


@pytest.fixture(scope="session")
def fig1_text() -> str:
    return (FIXTURES / "fig1.java").read_text(encoding="utf-8")


def _micro_tokens() -> tuple[str, ...]:
    specials = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
    punct = tuple(".,;(){}[]<>=+-*/:@\"'")
    words = (
        "org", "jo", "##da", "time", "java", "util", "io", "lang", "net",
        "List", "String", "Foo", "Bar", "Local", "##Time", "x", "y", "z",
        "a", "b", "c", "f", "g", "new", "int", "var", "final", "bar",
        "alpha", "beta", "gamma", "delta", "q",
    )
    return specials + punct + words


@pytest.fixture(scope="session")
def micro_vocab() -> Vocab:
    """A hand-enumerable vocabulary for oracle tests."""
    return Vocab(tokens=_micro_tokens())
