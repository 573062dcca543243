"""Self-assessing reranker: LLM assessments, reasoning-aligned rankings, InfoNCE adapter."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .adapter import Adapter, infonce_term, project, project_backward
from .artifacts import atomic_open
from .corpus import InteractionCorpus, behavior_text, item_text
from .errors import ConfigError
from .prompts import DEFAULT_PROMPTS, PromptBundle, assessment_prompt, basic_prompt
from .providers import LLM, Embedder, ProviderError, cosine, is_zero, map_bounded

log = logging.getLogger(__name__)

ADAPTER_MAGIC = b"ADP2"


class DegenerateCandidateError(ValueError):
    def __init__(self, user_id):
        super().__init__(f"candidate {user_id} has a zero embedding")
        self.user_id = user_id


class EmptyTailError(ValueError):
    pass


@dataclass
class AssessmentRecord:
    target_user: str
    target_item: str
    text: str
    embedding: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {"user": self.target_user, "item": self.target_item, "text": self.text,
             "embedding": [float(x) for x in self.embedding]},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "AssessmentRecord":
        d = json.loads(line)
        return cls(d["user"], d["item"], d["text"], np.asarray(d["embedding"], dtype=np.float64))


def write_assessments(path, records: Sequence[AssessmentRecord]) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def read_assessments(path) -> list[AssessmentRecord]:
    with open(path, encoding="utf-8") as f:
        return [AssessmentRecord.from_json(line) for line in f if line.strip()]


def generate_assessments(
    llm: LLM,
    corpus: InteractionCorpus,
    sample: Sequence[tuple[int, int]],
    embedder: Embedder,
    max_items: int = 15,
    prompts: PromptBundle = DEFAULT_PROMPTS,
    concurrency: int = 1,
) -> tuple[list[AssessmentRecord], int]:
    """One assessment per (user, item) pair; provider failures are skipped and counted."""

    def one(pair):
        u, i = pair
        prompt = assessment_prompt(behavior_text(corpus, u, max_items), item_text(corpus, i), prompts)
        try:
            return llm.complete(prompt)
        except ProviderError as e:
            log.warning("assessment failed for (%s, %s): %s", corpus.user_ids[u], corpus.items[i].item_id, e)
            return None

    texts = map_bounded(one, list(sample), concurrency)
    kept = [(p, t) for p, t in zip(sample, texts) if t]
    skipped = len(sample) - len(kept)
    if skipped:
        log.warning("skipped %d assessments", skipped)
    embs = embedder.embed([t for _, t in kept]) if kept else []
    records = [
        AssessmentRecord(corpus.user_ids[u], corpus.items[i].item_id, t, e)
        for ((u, i), t), e in zip(kept, embs)
    ]
    return records, skipped


@dataclass
class OrderedCandidateSet:
    target_user: str
    target_item: str
    ranked: list[tuple[str, float]]

    @property
    def users(self) -> list[str]:
        return [u for u, _ in self.ranked]


def _rank(ids: Sequence[str], scores: np.ndarray) -> list[tuple[str, float]]:
    # ties by ascending user id
    order = sorted(range(len(ids)), key=lambda k: (-scores[k], ids[k]))
    return [(ids[k], float(scores[k])) for k in order]


def ranking_from_assessment(
    assessment: AssessmentRecord,
    candidates: Sequence[tuple[str, str]],
    embedder: Embedder,
) -> OrderedCandidateSet:
    if not candidates:
        raise ValueError("no candidates to rank")
    ids = [u for u, _ in candidates]
    embs = embedder.embed([t for _, t in candidates])
    for uid, e in zip(ids, embs):
        if is_zero(e):
            raise DegenerateCandidateError(uid)
    scores = np.array([cosine(assessment.embedding, e) for e in embs])
    return OrderedCandidateSet(assessment.target_user, assessment.target_item, _rank(ids, scores))


def sample_negatives(ranking: OrderedCandidateSet, rank_threshold: int = 5, neg_count: int = 3, seed=0) -> list[str]:
    """Uniform draw without replacement from ranks strictly after `rank_threshold`."""
    if rank_threshold < 1 or neg_count < 1:
        raise ValueError("rank_threshold and neg_count must be positive")
    tail = ranking.users[rank_threshold:]
    if not tail:
        raise EmptyTailError(f"ranking of length {len(ranking.ranked)} has no users after rank {rank_threshold}")
    if len(tail) <= neg_count:
        if len(tail) < neg_count:
            warnings.warn(f"only {len(tail)} negatives available, wanted {neg_count}", stacklevel=2)
        return list(tail)
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(tail), size=neg_count, replace=False))
    return [tail[k] for k in picked]


def sare_loss(query_emb, positive_emb, negative_embs, tau: float) -> float:
    if not tau > 0:
        raise ConfigError("tau must be > 0", "tau_sare")
    q = np.asarray(query_emb, dtype=np.float64)
    negs = np.asarray(negative_embs, dtype=np.float64).reshape(-1, q.shape[0])
    return infonce_term(float(q @ positive_emb), negs @ q, tau)[0]


def sare_objective(
    M: np.ndarray,
    query_base: np.ndarray,
    positive_base: np.ndarray,
    negative_base: Sequence[np.ndarray],
    tau: float,
) -> tuple[float, np.ndarray]:
    """Mean sare_loss over instances (after projection by M) and its gradient."""
    n = len(query_base)
    Q, nq = project(M, query_base)
    P, npos = project(M, positive_base)
    counts = [len(x) for x in negative_base]
    N_base = np.vstack([x for x in negative_base if len(x)]) if sum(counts) else np.zeros((0, M.shape[1]))
    N, nn = project(M, N_base) if len(N_base) else (N_base, np.zeros(0))
    dQ, dP, dN = np.zeros_like(Q), np.zeros_like(P), np.zeros_like(N)
    loss, off = 0.0, 0
    for k in range(n):
        negs = N[off:off + counts[k]]
        lk, dpos, dneg = infonce_term(float(Q[k] @ P[k]), negs @ Q[k], tau)
        loss += lk
        dQ[k] = dpos * P[k] + dneg @ negs
        dP[k] = dpos * Q[k]
        dN[off:off + counts[k]] = np.outer(dneg, Q[k])
        off += counts[k]
    grad = project_backward(dQ, Q, nq, query_base) + project_backward(dP, P, npos, positive_base)
    if len(N):
        grad += project_backward(dN, N, nn, N_base)
    return loss / n, grad / n


@dataclass
class SareConfig:
    tau: float = 0.02
    epochs: int = 50
    lr: float = 0.05
    seed: int = 0
    rank_threshold: int = 5
    neg_count: int = 3
    max_items: int = 15

    def validate(self) -> None:
        if not self.tau > 0:
            raise ConfigError("tau_sare must be > 0", "tau_sare")
        if self.lr < 0:
            raise ConfigError("sare learning rate must be >= 0", "sare_lr")


@dataclass
class SareInstance:
    query_text: str
    positive: str
    negatives: list[str]


def build_instances(
    rankings: Sequence[OrderedCandidateSet],
    corpus: InteractionCorpus,
    config: SareConfig,
    prompts: PromptBundle = DEFAULT_PROMPTS,
) -> list[SareInstance]:
    out = []
    for k, r in enumerate(rankings):
        u = corpus.user_index[r.target_user]
        i = corpus.item_index[r.target_item]
        query = basic_prompt(behavior_text(corpus, u, config.max_items), item_text(corpus, i), prompts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            negs = sample_negatives(r, config.rank_threshold, config.neg_count, seed=[config.seed, k])
        out.append(SareInstance(query, r.users[0], negs))
    return out


def train_sare_adapter(
    rankings: Sequence[OrderedCandidateSet],
    corpus: InteractionCorpus,
    embedder: Embedder,
    config: SareConfig | None = None,
    prompts: PromptBundle = DEFAULT_PROMPTS,
) -> Adapter:
    """Full-batch gradient descent on the mean InfoNCE loss."""
    config = config or SareConfig()
    config.validate()
    if not rankings:
        raise ValueError("no rankings to train on")
    instances = build_instances(rankings, corpus, config, prompts)
    users = sorted({x.positive for x in instances} | {n for x in instances for n in x.negatives})
    row = {u: k for k, u in enumerate(users)}
    user_base = embedder.embed([behavior_text(corpus, corpus.user_index[u], config.max_items) for u in users])
    query_base = embedder.embed([x.query_text for x in instances])
    pos_base = user_base[[row[x.positive] for x in instances]]
    neg_base = [user_base[[row[n] for n in x.negatives]] for x in instances]
    adapter = Adapter.initial(user_base.shape[1], config.tau, config.seed)
    M = adapter.W
    for epoch in range(config.epochs):
        loss, grad = sare_objective(M, query_base, pos_base, neg_base, config.tau)
        adapter.history.append(loss)
        log.debug("sare epoch %d loss %.5f", epoch, loss)
        M = M - config.lr * grad
    adapter.W = M
    if adapter.history:
        log.info("sare training: loss %.4f -> %.4f", adapter.history[0], adapter.history[-1])
    return adapter


def rerank(
    adapter: Adapter,
    basic_prompt_text: str,
    candidates: Sequence[tuple[str, str]],
    k_s: int,
    embedder: Embedder,
) -> list[str]:
    """Top-k_s candidate ids by cosine between projected prompt and behavior embeddings."""
    if not candidates:
        raise ValueError("no candidates to rerank")
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    ids = [u for u, _ in candidates]
    base = embedder.embed([basic_prompt_text] + [t for _, t in candidates])
    proj = adapter.embed(base)
    scores = proj[1:] @ proj[0]
    return [u for u, _ in _rank(ids, scores)[:k_s]]

