"""AUC and per-user averaged AUC."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    pass


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC from average ranks; tied pairs count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both a positive and a negative label")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pairwise_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """O(n^2) reference: compare every positive/negative pair directly."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos, neg = s[y == 1], s[y != 1]
    if not len(pos) or not len(neg):
        raise UndefinedMetricError("AUC needs both a positive and a negative label")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (len(pos) * len(neg)))


def uauc(records: Iterable) -> tuple[float, int, int]:
    """Mean per-user AUC over users with both label classes.

    `records` carry `.user`, `.prob` and `.label`. Returns (uauc, evaluated, skipped).
    """
    by_user: dict[str, tuple[list[float], list[int]]] = defaultdict(lambda: ([], []))
    n = 0
    for r in records:
        s, y = by_user[r.user]
        s.append(r.prob)
        y.append(int(r.label))
        n += 1
    if n == 0:
        raise ValueError("no records")
    values, skipped = [], 0
    for user in sorted(by_user):
        s, y = by_user[user]
        if 0 < sum(y) < len(y):
            values.append(auc(s, y))
        else:
            skipped += 1
    if not values:
        raise UndefinedMetricError("no user has both label classes")
    return float(np.mean(values)), len(values), skipped
