"""BPR matrix factorization as the collaborative model, plus inner-product neighbors."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .artifacts import read_crm_file, write_crm_file
from .corpus import EmptyHistoryError, InteractionCorpus, InteractionRecord

log = logging.getLogger(__name__)

USER_FACTOR = "user-factor"
MEAN_OF_ITEMS = "mean-of-items"


class EmptyNeighborhoodError(ValueError):
    pass


@dataclass
class BprConfig:
    d: int = 64
    epochs: int = 30
    learning_rate: float = 0.05
    l2: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.d <= 0:
            raise ConfigError("d must be positive", "d")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive", "learning_rate")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0", "epochs")


@dataclass
class CrmModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    seed: int = 0
    mode: str = MEAN_OF_ITEMS
    epoch_losses: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ValueError("factor widths differ")
        if not (np.all(np.isfinite(self.user_factors)) and np.all(np.isfinite(self.item_factors))):
            raise ValueError("non-finite factors")
        if self.mode not in (USER_FACTOR, MEAN_OF_ITEMS):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return self.user_factors.shape[1]

    def score(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.user_factors[users], self.item_factors[items])

    def save(self, path) -> None:
        write_crm_file(path, self.user_factors, self.item_factors)

    @classmethod
    def load(cls, path, mode: str = MEAN_OF_ITEMS) -> "CrmModel":
        u, v = read_crm_file(path)
        return cls(u, v, mode=mode)


def init_factors(n_users: int, n_items: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    bound = 0.1 / np.sqrt(d)
    return rng.uniform(-bound, bound, (n_users, d)), rng.uniform(-bound, bound, (n_items, d))


def log_sigmoid(x: float) -> float:
    return -np.logaddexp(0.0, -x)


def bpr_loss(p_u: np.ndarray, q_i: np.ndarray, q_j: np.ndarray) -> float:
    """-ln sigma(x_ui - x_uj) for a single triple."""
    return float(-log_sigmoid(float(p_u @ (q_i - q_j))))


def bpr_grad(p_u: np.ndarray, q_i: np.ndarray, q_j: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = float(p_u @ (q_i - q_j))
    g = -1.0 / (1.0 + np.exp(x))  # d/dx of -ln sigma(x)
    return g * (q_i - q_j), g * p_u, -g * p_u


def train_bpr_mf(
    corpus: InteractionCorpus,
    train: Sequence[InteractionRecord],
    config: BprConfig | None = None,
    mode: str = MEAN_OF_ITEMS,
) -> CrmModel:
    """SGD on the BPR objective with uniform negatives among non-positive items."""
    config = config or BprConfig()
    config.validate()
    pairs = sorted({(corpus.user_index[r.user_id], corpus.item_index[r.item_id])
                    for r in train if corpus.label(r) == 1})
    if not pairs:
        raise ValueError("training set has no positive interactions")
    P, Q = init_factors(corpus.n_users, corpus.n_items, config.d, config.seed)
    positives: dict[int, set[int]] = {}
    for u, i in pairs:
        positives.setdefault(u, set()).add(i)
    rng = np.random.default_rng([config.seed, 1])
    n_items = corpus.n_items
    lr, l2 = config.learning_rate, config.l2
    pairs_arr = np.asarray(pairs)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs_arr))
        total = 0.0
        for k in order:
            u, i = pairs_arr[k]
            pos = positives[u]
            if len(pos) >= n_items:
                continue
            j = int(rng.integers(n_items))
            while j in pos:
                j = int(rng.integers(n_items))
            pu, qi, qj = P[u], Q[i], Q[j]
            x = float(pu @ (qi - qj))
            total += -log_sigmoid(x)
            g = 1.0 / (1.0 + np.exp(x))  # sigma(-x)
            du = g * (qi - qj) - l2 * pu
            di = g * pu - l2 * qi
            dj = -g * pu - l2 * qj
            P[u] += lr * du
            Q[i] += lr * di
            Q[j] += lr * dj
        losses.append(total / len(pairs_arr))
        log.debug("bpr epoch %d loss %.5f", epoch, losses[-1])
    return CrmModel(P, Q, config.seed, mode, losses)


def sequence_embedding(model: CrmModel, history: Sequence[int], user: int | None = None) -> np.ndarray:
    if model.mode == USER_FACTOR:
        if user is None:
            raise ValueError("user-factor mode needs the user index")
        return model.user_factors[user].copy()
    if len(history) == 0:
        raise EmptyHistoryError("cannot embed an empty history")
    idx = np.asarray(history, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= model.item_factors.shape[0]):
        raise IndexError("item index out of range")
    return model.item_factors[idx].mean(axis=0)


def user_embeddings(model: CrmModel, corpus: InteractionCorpus) -> tuple[np.ndarray, np.ndarray]:
    """Embedding matrix for all users plus a mask of users that have one."""
    H = np.zeros((corpus.n_users, model.dim))
    ok = np.zeros(corpus.n_users, dtype=bool)
    for u in range(corpus.n_users):
        hist = corpus.history(u)
        if model.mode == USER_FACTOR or hist:
            H[u] = sequence_embedding(model, hist, u)
            ok[u] = True
    return H, ok


def ranked_top_k(scores: np.ndarray, k: int, candidates: np.ndarray) -> list[tuple[int, float]]:
    """Top-k candidate indices by score, ties broken by ascending index."""
    cand = np.asarray(candidates)
    order = np.lexsort((cand, -scores[cand]))
    return [(int(cand[o]), float(scores[cand[o]])) for o in order[:k]]


@dataclass(frozen=True)
class NeighborList:
    target: int
    neighbors: list[tuple[int, float]]


def top_k_collaborative(
    model: CrmModel,
    corpus: InteractionCorpus,
    target: int,
    k: int,
    embeddings: tuple[np.ndarray, np.ndarray] | None = None,
) -> NeighborList:
    if k < 1:
        raise ValueError("k must be positive")
    if corpus.n_users < 2:
        raise EmptyNeighborhoodError("corpus has a single user")
    H, ok = embeddings if embeddings is not None else user_embeddings(model, corpus)
    if not ok[target]:
        raise EmptyHistoryError(f"user {corpus.user_ids[target]} has no embedding")
    cand = np.flatnonzero(ok)
    cand = cand[cand != target]
    if cand.size == 0:
        raise EmptyNeighborhoodError("no other user has an embedding")
    scores = H @ H[target]
    return NeighborList(target, ranked_top_k(scores, min(k, corpus.n_users - 1), cand))
