"""Collaborative retriever: CRM-supervised contrastive adapter and exact cosine index."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adapter import Adapter, infonce_term, project, project_backward
from .artifacts import read_index_file, write_index_file
from .corpus import InteractionCorpus, behavior_text
from .crm import CrmModel, top_k_collaborative, user_embeddings
from .errors import ConfigError
from .providers import Embedder, normalize

log = logging.getLogger(__name__)

ADAPTER_MAGIC = b"ADP1"


class EmptyIndexError(ValueError):
    pass


@dataclass
class TrainingPairSet:
    entries: list[tuple[int, list[int]]]
    skipped: int = 0


def build_training_pairs(corpus: InteractionCorpus, crm_model: CrmModel, k_c: int = 5) -> TrainingPairSet:
    if not k_c < corpus.n_users:
        raise ValueError(f"K_c={k_c} must be smaller than the number of users ({corpus.n_users})")
    emb = user_embeddings(crm_model, corpus)
    entries, skipped = [], 0
    for u in range(corpus.n_users):
        if not corpus.history(u):
            skipped += 1
            continue
        nl = top_k_collaborative(crm_model, corpus, u, k_c, embeddings=emb)
        # positives need behavior text too
        pos = [v for v, _ in nl.neighbors if corpus.history(v)]
        if len(pos) < k_c:
            skipped += 1
            continue
        entries.append((u, pos))
    if skipped:
        log.info("build_training_pairs: skipped %d anchors without usable history", skipped)
    return TrainingPairSet(entries, skipped)


def car_embed(adapter: Adapter, base: np.ndarray) -> np.ndarray:
    return adapter.embed(base)


def negative_mask(
    owner: np.ndarray,
    n_anchors: int,
    anchor_ids: Sequence | None = None,
    positive_ids: Sequence | None = None,
) -> np.ndarray:
    """mask[t, n]: whether flattened positive n serves as an in-batch negative for anchor t.

    Without ids every other anchor's positive is a negative. With ids, users that
    are positives of t (or t itself) are dropped and each user counts once.
    """
    mask = owner[None, :] != np.arange(n_anchors)[:, None]
    if anchor_ids is None or positive_ids is None:
        return mask
    for t in range(n_anchors):
        own = {positive_ids[n] for n in np.flatnonzero(owner == t)} | {anchor_ids[t]}
        seen = set()
        for n in np.flatnonzero(mask[t]):
            uid = positive_ids[n]
            if uid in own or uid in seen:
                mask[t, n] = False
            seen.add(uid)
    return mask


def _flatten(positive_embs) -> tuple[np.ndarray, np.ndarray]:
    blocks = [np.atleast_2d(np.asarray(p, dtype=np.float64)) for p in positive_embs]
    owner = np.concatenate([np.full(len(b), t) for t, b in enumerate(blocks)])
    return np.vstack(blocks), owner


def _car_loss_and_dS(S: np.ndarray, owner: np.ndarray, mask: np.ndarray, tau: float):
    dS = np.zeros_like(S)
    loss = 0.0
    for t in range(S.shape[0]):
        negs = np.flatnonzero(mask[t])
        for i in np.flatnonzero(owner == t):
            li, dpos, dneg = infonce_term(S[t, i], S[t, negs], tau)
            loss += li
            dS[t, i] += dpos
            dS[t, negs] += dneg
    return loss, dS


def car_loss(anchor_embs, positive_embs, tau: float, anchor_ids=None, positive_ids=None) -> float:
    """Sum over anchors and their positives of the in-batch contrastive loss.

    `positive_embs[t]` holds the positives of anchor t; `positive_ids`, if given,
    is the flattened id list aligned with them.
    """
    if not tau > 0:
        raise ConfigError("tau must be > 0", "tau_car")
    A = np.atleast_2d(np.asarray(anchor_embs, dtype=np.float64))
    P, owner = _flatten(positive_embs)
    mask = negative_mask(owner, len(A), anchor_ids, positive_ids)
    S = A @ P.T
    return _car_loss_and_dS(S, owner, mask, tau)[0]


def car_objective(
    W: np.ndarray,
    anchor_base: np.ndarray,
    positive_base: np.ndarray,
    owner: np.ndarray,
    tau: float,
    mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Summed car_loss over adapter outputs and its gradient w.r.t. W."""
    if mask is None:
        mask = negative_mask(owner, len(anchor_base))
    A, na = project(W, anchor_base)
    P, npos = project(W, positive_base)
    S = A @ P.T
    loss, dS = _car_loss_and_dS(S, owner, mask, tau)
    dA = dS @ P
    dP = dS.T @ A
    grad = project_backward(dA, A, na, anchor_base) + project_backward(dP, P, npos, positive_base)
    return loss, grad


@dataclass
class CarConfig:
    tau: float = 0.1
    epochs: int = 50
    lr: float = 0.1
    batch_size: int = 16
    seed: int = 0
    max_items: int = 15

    def validate(self) -> None:
        if not self.tau > 0:
            raise ConfigError("tau_car must be > 0", "tau_car")
        if self.lr < 0:
            raise ConfigError("car learning rate must be >= 0", "car_lr")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1", "batch_size")


def behavior_embeddings(corpus: InteractionCorpus, users: Sequence[int], embedder: Embedder, max_items: int) -> np.ndarray:
    texts = [behavior_text(corpus, u, max_items) for u in users]
    return embedder.embed(texts)


def train_car_adapter(
    pairs: TrainingPairSet,
    corpus: InteractionCorpus,
    embedder: Embedder,
    config: CarConfig | None = None,
) -> Adapter:
    """Mini-batch gradient descent on the mean per-term contrastive loss."""
    config = config or CarConfig()
    config.validate()
    if not pairs.entries:
        raise ValueError("no training pairs")
    users = sorted({u for u, _ in pairs.entries} | {v for _, ps in pairs.entries for v in ps})
    row = {u: k for k, u in enumerate(users)}
    base = behavior_embeddings(corpus, users, embedder, config.max_items)
    adapter = Adapter.initial(base.shape[1], config.tau, config.seed)
    W = adapter.W
    rng = np.random.default_rng([config.seed, 2])
    n = len(pairs.entries)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, terms = 0.0, 0
        for start in range(0, n, config.batch_size):
            batch = [pairs.entries[k] for k in order[start:start + config.batch_size]]
            anchors = [u for u, _ in batch]
            pos_ids = [v for _, ps in batch for v in ps]
            owner = np.concatenate([np.full(len(ps), t) for t, (_, ps) in enumerate(batch)])
            mask = negative_mask(owner, len(batch), anchors, pos_ids)
            loss, grad = car_objective(
                W, base[[row[u] for u in anchors]], base[[row[v] for v in pos_ids]], owner, config.tau, mask
            )
            total += loss
            terms += len(pos_ids)
            if config.lr:
                W = W - config.lr * grad / len(pos_ids)
        adapter.history.append(total / terms)
        log.debug("car epoch %d loss %.5f", epoch, adapter.history[-1])
    adapter.W = W
    if adapter.history:
        log.info("car training: loss %.4f -> %.4f", adapter.history[0], adapter.history[-1])
    return adapter


@dataclass
class BehaviorIndex:
    user_ids: list[str]
    vectors: np.ndarray
    _pos: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if len(self.user_ids) != len(self.vectors):
            raise ValueError("id list and row count differ")
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        self.vectors = self.vectors / np.where(norms == 0, 1.0, norms)
        self._pos = {u: k for k, u in enumerate(self.user_ids)}

    def __len__(self) -> int:
        return len(self.user_ids)

    def __contains__(self, user_id) -> bool:
        return user_id in self._pos

    def vector(self, user_id: str) -> np.ndarray:
        return self.vectors[self._pos[user_id]]

    def save(self, path) -> None:
        write_index_file(path, self.user_ids, self.vectors)

    @classmethod
    def load(cls, path) -> "BehaviorIndex":
        ids, rows = read_index_file(path)
        return cls(ids, rows)


def build_index(
    corpus: InteractionCorpus, adapter: Adapter, embedder: Embedder, max_items: int = 15
) -> BehaviorIndex:
    """Index every user with a non-empty history, rows in user-index order."""
    users = [u for u in range(corpus.n_users) if corpus.history(u)]
    if not users:
        return BehaviorIndex([], np.zeros((0, adapter.dim)))
    base = behavior_embeddings(corpus, users, embedder, max_items)
    return BehaviorIndex([corpus.user_ids[u] for u in users], adapter.embed(base))


def retrieve(index: BehaviorIndex, query: np.ndarray, k_e: int = 10, exclude: str | None = None) -> list[tuple[str, float]]:
    """Exact top-k by cosine; ties by ascending user id."""
    if len(index) == 0:
        raise EmptyIndexError("behavior index is empty")
    q = normalize(np.asarray(query, dtype=np.float64))
    scores = np.clip(index.vectors @ q, -1.0, 1.0)
    ids = index.user_ids
    cand = [k for k in range(len(ids)) if ids[k] != exclude]
    cand.sort(key=lambda k: (-scores[k], ids[k]))
    return [(ids[k], float(scores[k])) for k in cand[:max(0, k_e)]]
