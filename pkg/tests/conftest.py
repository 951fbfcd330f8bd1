import numpy as np
import pytest

from urgencykit import synth
from urgencykit.embedding import (
    SubwordHyperparams,
    load_pretrained_vectors,
    train_subword_skipgram,
)
from urgencykit.ensemble import Featurizer, LabeledDataset
from urgencykit.preprocess import Message, TokenizedMessage, tokenize_all

TINY_HP = SubwordHyperparams(dim=8, epochs=2, buckets=5000, negatives=3)


def tm(*tokens, mid="m1"):
    return TokenizedMessage(id=mid, tokens=tuple(tokens))


@pytest.fixture(scope="session")
def tiny_background():
    background, _ = synth.generate_corpus(300, 0, seed=5)
    return background


@pytest.fixture(scope="session")
def tiny_labeled_messages():
    _, labeled = synth.generate_corpus(0, 80, seed=9)
    return labeled


@pytest.fixture(scope="session")
def tiny_local_model(tiny_background):
    return train_subword_skipgram(tokenize_all(tiny_background), TINY_HP, seed=3)


@pytest.fixture(scope="session")
def tiny_wiki_model(tmp_path_factory):
    path = tmp_path_factory.mktemp("wiki") / "wiki.txt"
    synth.write_wiki_vectors(str(path), dim=12, seed=4)
    return load_pretrained_vectors(str(path))


@pytest.fixture(scope="session")
def featurizer_full(tiny_local_model, tiny_wiki_model):
    return Featurizer(local_model=tiny_local_model, wiki_model=tiny_wiki_model)


@pytest.fixture(scope="session")
def tiny_labeled(tiny_labeled_messages):
    return LabeledDataset.from_messages(tiny_labeled_messages)
