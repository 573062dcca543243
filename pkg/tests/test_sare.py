import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import central_fd, rel_err, sare_loss_ld
from conftest import unit_rows
from scorerec import sare
from scorerec.adapter import Adapter
from scorerec.corpus import build_corpus
from scorerec.errors import ConfigError
from scorerec.providers import HashEmbedder, StubLLM, cosine, hash_embed
from scorerec.synthetic import planted_signal


class TableEmbedder:
    """Maps known strings to fixed vectors."""

    def __init__(self, table):
        self.table = table
        self.dim = len(next(iter(table.values())))

    def embed(self, texts):
        return np.array([self.table[t] for t in texts], dtype=float)


def _assessment(vec):
    return sare.AssessmentRecord("u", "i", "text", np.asarray(vec, dtype=float))


def test_ranking_three_candidates_oracle():
    # unit vectors with cosines 0.9, 0.5, 0.7 against e0
    def at(c):
        return [c, math.sqrt(1 - c * c)]
    emb = TableEmbedder({"a": at(0.9), "b": at(0.5), "c": at(0.7)})
    r = sare.ranking_from_assessment(_assessment([1, 0]), [("x", "a"), ("y", "b"), ("z", "c")], emb)
    assert r.users == ["x", "z", "y"]
    assert [s for _, s in r.ranked] == pytest.approx([0.9, 0.7, 0.5], abs=1e-12)


def test_ranking_equal_text_first_with_score_one():
    emb = HashEmbedder(64)
    a = sare.AssessmentRecord("u", "i", "war drama", emb.embed(["war drama"])[0])
    r = sare.ranking_from_assessment(a, [("b", "comedy"), ("a", "war drama"), ("c", "war")], emb)
    assert r.users[0] == "a"
    assert r.ranked[0][1] == pytest.approx(1.0, abs=1e-12)


def test_ranking_degenerate_candidate():
    emb = HashEmbedder(16)
    with pytest.raises(sare.DegenerateCandidateError) as e:
        sare.ranking_from_assessment(_assessment(hash_embed("x", 16)), [("ok", "x"), ("bad", "!!!")], emb)
    assert e.value.user_id == "bad"


def brute_ranking(query, cands):
    scored = [(-cosine(query, v), u) for u, v in cands]
    return [u for _, u in sorted(scored)]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_ranking_is_cosine_sort_and_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    vecs = rng.integers(-1, 2, size=(n, 3)).astype(float)
    vecs[~vecs.any(axis=1)] = [0, 0, 1.0]
    table = {f"t{k}": vecs[k] for k in range(n)}
    cands = [(f"u{k:02d}", f"t{k}") for k in range(n)]
    q = rng.normal(size=3)
    r = sare.ranking_from_assessment(_assessment(q), cands, TableEmbedder(table))
    assert r.users == brute_ranking(q, [(u, table[t]) for u, t in cands])
    perm = [cands[k] for k in rng.permutation(n)]
    assert sare.ranking_from_assessment(_assessment(q), perm, TableEmbedder(table)).users == r.users


def _ranking(n):
    return sare.OrderedCandidateSet("t", "i", [(f"r{k}", 1.0 - k / 100) for k in range(1, n + 1)])


def test_sample_negatives_examples():
    negs = sare.sample_negatives(_ranking(10), 5, 3, seed=0)
    assert len(set(negs)) == 3
    assert set(negs) <= {"r6", "r7", "r8", "r9", "r10"}
    assert negs == sare.sample_negatives(_ranking(10), 5, 3, seed=0)
    with pytest.warns(UserWarning):
        assert sare.sample_negatives(_ranking(6), 5, 3) == ["r6"]
    with pytest.raises(sare.EmptyTailError):
        sare.sample_negatives(_ranking(5), 5, 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(1, 10), st.integers(1, 6), st.integers(0, 2**31))
def test_sample_negatives_properties(n, thr, count, seed):
    r = _ranking(n)
    if n <= thr:
        with pytest.raises(sare.EmptyTailError):
            sare.sample_negatives(r, thr, count, seed)
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        negs = sare.sample_negatives(r, thr, count, seed)
    assert r.users[0] not in negs
    assert set(negs) <= set(r.users[thr:])
    assert len(negs) == len(set(negs)) == min(count, n - thr)


def test_sare_loss_closed_forms():
    rng = np.random.default_rng(0)
    q, p = unit_rows(rng, 2, 4)
    assert sare.sare_loss(q, p, np.zeros((0, 4)), 0.02) == 0.0
    assert abs(sare.sare_loss(q, p, [p], 0.02) - math.log(2)) < 1e-12
    with pytest.raises(ConfigError):
        sare.sare_loss(q, p, [p], 0.0)


def test_sare_loss_matches_mpmath_d4():
    mpmath.mp.dps = 40
    rng = np.random.default_rng(5)
    for _ in range(10):
        q, p, *negs = unit_rows(rng, 5, 4)
        tau = mpmath.mpf("0.02")
        g = [mpmath.exp(mpmath.fsum(mpmath.mpf(a) * mpmath.mpf(b) for a, b in zip(q, v)) / tau) for v in [p] + negs]
        ref = -mpmath.log(g[0] / mpmath.fsum(g))
        assert abs(sare.sare_loss(q, p, negs, 0.02) - float(ref)) < 1e-9 * max(1.0, float(ref))


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.01, 0.09), st.integers(0, 2**31))
def test_sare_loss_decreases_in_positive_cosine(c, delta, seed):
    rng = np.random.default_rng(seed)
    negs = unit_rows(rng, 3, 4)
    q = np.array([1.0, 0, 0, 0])

    def pos(cos):
        return np.array([cos, math.sqrt(1 - cos * cos), 0, 0])

    assert sare.sare_loss(q, pos(c + delta), negs, 0.1) < sare.sare_loss(q, pos(c), negs, 0.1)


def test_sare_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(5):
        D, n = 8, int(rng.integers(1, 5))
        Q, P = unit_rows(rng, n, D), unit_rows(rng, n, D)
        N = [unit_rows(rng, int(rng.integers(0, 4)), D) for _ in range(n)]
        M = np.eye(D) + rng.normal(0, 0.3, (D, D))
        loss, grad = sare.sare_objective(M, Q, P, N, 0.02)
        assert abs(loss - float(sare_loss_ld(M, Q, P, N, 0.02))) < 1e-9
        fd = central_fd(lambda W: sare_loss_ld(W, Q, P, N, 0.02), M)
        assert rel_err(grad, fd) < 1e-3


def test_rerank_identity_is_cosine_sort_and_scale_invariant():
    rng = np.random.default_rng(7)
    table = {f"t{k}": v for k, v in enumerate(unit_rows(rng, 7, 5))}
    emb = TableEmbedder(table)
    cands = [(f"u{k}", f"t{k}") for k in range(1, 7)]
    order = brute_ranking(table["t0"], [(u, table[t]) for u, t in cands])
    assert sare.rerank(Adapter(np.eye(5), 0.02), "t0", cands, 6, emb) == order
    assert sare.rerank(Adapter(np.eye(5), 0.02), "t0", cands, 1, emb) == order[:1]
    assert sare.rerank(Adapter(np.eye(5), 0.02), "t0", cands, 50, emb) == order
    W = rng.normal(size=(5, 5))
    assert sare.rerank(Adapter(W, 0.02), "t0", cands, 6, emb) == sare.rerank(Adapter(4 * W, 0.02), "t0", cands, 6, emb)


def test_assessments_round_trip_and_stub_text(tmp_path):
    data = planted_signal(seed=0, n_groups=3)
    c = build_corpus(data.records, data.items)
    llm = StubLLM.from_items(c.items)
    u = c.user_index["g00h0"]
    i = c.history(u)[0]
    recs, skipped = sare.generate_assessments(llm, c, [(u, i)], HashEmbedder(32))
    assert skipped == 0
    assert recs[0].text.startswith("Helpful signals include: ")
    assert np.linalg.norm(recs[0].embedding) == pytest.approx(1.0)
    sare.write_assessments(tmp_path / "a.jsonl", recs)
    back = sare.read_assessments(tmp_path / "a.jsonl")
    assert back[0].text == recs[0].text
    assert np.array_equal(back[0].embedding, recs[0].embedding)
    again, _ = sare.generate_assessments(llm, c, [(u, i)], HashEmbedder(32))
    assert again[0].to_json() == recs[0].to_json()


def planted_rankings(seed=0):
    """Each seeker's rank-1 user is a helper of its own group; the tail holds other groups."""
    data = planted_signal(seed=seed)
    hist = build_corpus(data.records, data.items).restrict([r for r in data.records if r.timestamp <= 1000])
    rng = np.random.default_rng(seed)
    rankings = []
    for uid, g in sorted(data.groups.items()):
        if "s" not in uid[3:]:
            continue
        own = sorted(v for v, h in data.groups.items() if h == g and "h" in v[3:])
        others = sorted(v for v, h in data.groups.items() if h != g)
        cands = [own[0]] + list(rng.choice(others, 9, replace=False))
        item = next(r.item_id for r in data.records if r.user_id == uid and r.timestamp > 1000 and r.rating == 5)
        rankings.append(sare.OrderedCandidateSet(uid, item, [(v, 1.0 - k / 10) for k, v in enumerate(cands)]))
    return hist, rankings


def test_planted_rankings_halve_loss():
    hist, rankings = planted_rankings()
    a = sare.train_sare_adapter(rankings, hist, HashEmbedder(128), sare.SareConfig(epochs=50))
    assert a.history[-1] < 0.5 * a.history[0]


def test_lr_zero_keeps_initial_matrix():
    hist, rankings = planted_rankings()
    a = sare.train_sare_adapter(rankings, hist, HashEmbedder(32), sare.SareConfig(epochs=2, lr=0.0, seed=9))
    assert np.array_equal(a.W, Adapter.initial(32, 0.02, 9).W)
