import numpy as np
import pytest

from scorerec.corpus import InteractionRecord, ItemMeta, build_corpus


def unit_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


@pytest.fixture
def tiny_items():
    return [
        ItemMeta("m1", "Alpha (1990)", ("drama",)),
        ItemMeta("m2", "Beta (1991)", ("comedy",)),
        ItemMeta("m3", "Gamma (1992)", ("drama", "war")),
        ItemMeta("m4", "Delta (1993)", ("horror",)),
    ]


@pytest.fixture
def tiny_corpus(tiny_items):
    recs = [
        InteractionRecord("u2", "m1", 5, 30),
        InteractionRecord("u1", "m2", 4, 20),
        InteractionRecord("u1", "m1", 3, 10),
        InteractionRecord("u1", "m3", 5, 5),
        InteractionRecord("u2", "m4", 2, 40),
        InteractionRecord("u3", "m4", 1, 50),
    ]
    return build_corpus(recs, tiny_items, threshold=4)


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
