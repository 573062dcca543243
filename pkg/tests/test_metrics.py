from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scorerec.metrics import UndefinedMetricError, auc, pairwise_auc, uauc


def test_auc_examples():
    assert auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    assert pairwise_auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    assert auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_auc_single_tie_counts_half():
    # one positive, one negative, identical score
    assert auc([0.4, 0.4, 0.9], [1, 0, 1]) == pytest.approx(0.75, abs=1e-15)


def test_auc_single_class():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


def _rec(user, prob, label):
    return SimpleNamespace(user=user, prob=prob, label=label)


def test_uauc_examples():
    recs = [_rec("a", 0.9, 1), _rec("a", 0.1, 0), _rec("b", 0.5, 1), _rec("b", 0.5, 0), _rec("c", 0.2, 1)]
    assert uauc(recs) == (0.75, 2, 1)
    assert uauc(recs[:2]) == (1.0, 1, 0)
    with pytest.raises(UndefinedMetricError):
        uauc([_rec("c", 0.2, 1)])


# a coarse grid keeps ties common
scores_labels = st.integers(2, 200).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 40).map(lambda k: k / 40), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=200, deadline=None)
@given(scores_labels)
def test_auc_equals_pairwise_oracle(sl):
    s, y = sl
    assert abs(auc(s, y) - pairwise_auc(s, y)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(scores_labels)
def test_auc_monotone_invariance(sl):
    s, y = sl
    t = [3 * x**3 + 1 for x in s]
    assert abs(auc(s, y) - auc(t, y)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 100), st.integers(0, 2**31))
def test_auc_complement_without_ties(n, seed):
    rng = np.random.default_rng(seed)
    s = rng.permutation(n) / n
    y = rng.integers(0, 2, n)
    if not 0 < y.sum() < n:
        return
    assert abs(auc(s, y) + auc(s, 1 - y) - 1.0) < 1e-12
