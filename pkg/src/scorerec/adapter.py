"""Linear adapter over frozen embeddings, shared by the retriever and reranker.

An adapter maps a unit base embedding x to normalize(W @ x). Both training
objectives are InfoNCE-style losses over cosines of adapter outputs, so the
backward pass through the projection lives here too.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .artifacts import read_adapter_file, write_adapter_file

_DEGENERATE = 1e-12


class DegenerateProjectionError(ValueError):
    pass


@dataclass
class Adapter:
    W: np.ndarray
    tau: float
    seed: int = 0
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError(f"adapter matrix must be square, got {self.W.shape}")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("adapter matrix has non-finite entries")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0", "tau")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @classmethod
    def initial(cls, dim: int, tau: float, seed: int, noise: float = 0.01) -> "Adapter":
        rng = np.random.default_rng(seed)
        return cls(np.eye(dim) + rng.normal(0.0, noise, size=(dim, dim)), tau, seed)

    def embed(self, base: np.ndarray) -> np.ndarray:
        """Project one vector or a row-stack of vectors."""
        base = np.asarray(base, dtype=np.float64)
        if base.ndim == 1:
            return project(self.W, base[None, :])[0][0]
        return project(self.W, base)[0]

    def save(self, path, magic: bytes) -> None:
        write_adapter_file(path, magic, self.W, self.tau)

    @classmethod
    def load(cls, path, magic: bytes) -> "Adapter":
        W, tau = read_adapter_file(path, magic)
        return cls(W.astype(np.float64), tau)


def project(W: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows of X -> unit rows of X @ W.T; also returns the pre-normalization norms."""
    if X.shape[1] != W.shape[1]:
        raise ValueError(f"dimension mismatch: adapter {W.shape[1]}, input {X.shape[1]}")
    Z = X @ W.T
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms <= _DEGENERATE):
        raise DegenerateProjectionError("adapter maps an input to (numerically) zero")
    return Z / norms[:, None], norms


def project_backward(dU: np.ndarray, U: np.ndarray, norms: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. W given the gradient w.r.t. the unit outputs U."""
    dZ = (dU - U * np.sum(dU * U, axis=1, keepdims=True)) / norms[:, None]
    return dZ.T @ X


def infonce_term(pos: float, negs: np.ndarray, tau: float) -> tuple[float, float, np.ndarray]:
    """-log(e^{pos/tau} / (e^{pos/tau} + sum e^{neg/tau})) and its cosine gradients."""
    logits = np.concatenate([[pos], negs]) / tau
    k = int(np.argmax(logits))
    e = np.exp(logits - logits[k])
    rest = np.delete(e, k).sum()  # e[k] == 1; summing the others avoids cancellation
    # log1p and the 1 - w0 = sum(w_neg) identity keep precision when the loss is tiny
    loss = float(logits[k] - logits[0] + np.log1p(rest))
    w = e / (1.0 + rest)
    return loss, -float(w[1:].sum()) / tau, w[1:] / tau
