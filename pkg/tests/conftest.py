import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ontospace.data import Dataset, SplitTriples, Vocabulary


def make_split(rows, labels=None, width=3):
    if len(rows) == 0:
        return SplitTriples(ids=np.zeros((0, width), dtype=np.int64),
                            labels=np.zeros((0,), dtype=bool))
    ids = np.array(rows, dtype=np.int64)
    if labels is None:
        labels = [True] * len(rows)
    return SplitTriples(ids=ids, labels=np.array(labels, dtype=bool))


def toy_dataset():
    """3 instances, 2 concepts, 1 relation; a handful of triples per kind."""
    vocab = Vocabulary(
        instances=["anna", "berlin", "carl"],
        concepts=["<Person>", "<wikicat_Cities>"],
        relations=["livesIn"],
    )
    return Dataset(
        vocabulary=vocab,
        relational={
            "train": make_split([(0, 0, 1), (2, 0, 1)]),
            "valid": make_split([(0, 0, 2), (2, 0, 0)], labels=[True, False]),
            "test": make_split([(2, 0, 2), (0, 0, 0)], labels=[True, False]),
        },
        instance_of={
            "train": make_split([(0, 0), (2, 0)], width=2),
            "valid": make_split([(1, 1), (1, 0)], labels=[True, False], width=2),
            "test": make_split([(0, 1)], labels=[False], width=2),
        },
        sub_class_of={
            "train": make_split([(1, 0)], width=2),
            "valid": make_split([(0, 1)], labels=[False], width=2),
            "test": make_split([], width=2),
        },
    )


@pytest.fixture
def toy_ds():
    return toy_dataset()
