"""Text embedding and LLM providers, offline stubs and HTTP clients.

Embeddings travel as 1-d float64 numpy arrays. A vector is either unit-norm or
all zeros; the all-zero vector is the "no tokens" flag.
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
import requests

log = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_TOKEN_RE = re.compile(r"[^\W_]+")


class ProviderError(Exception):
    pass


class TransportError(ProviderError):
    def __init__(self, msg: str, status: int | None = None):
        super().__init__(msg if status is None else f"{msg} (HTTP {status})")
        self.status = status


class ProtocolError(ProviderError):
    pass


class MissingTokenError(ProviderError):
    pass


class UndefinedSimilarityError(ValueError):
    pass


@dataclass(frozen=True)
class JudgeResult:
    logit_yes: float
    logit_no: float

    def __post_init__(self):
        if not (math.isfinite(self.logit_yes) and math.isfinite(self.logit_no)):
            raise ValueError("judge logits must be finite")


def is_zero(v: np.ndarray) -> bool:
    return not np.any(v)


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        return np.zeros_like(v, dtype=np.float64)
    return np.asarray(v, dtype=np.float64) / n


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("cosine undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def hash_embed(text: str, dim: int = 256) -> np.ndarray:
    """Signed feature hashing of alphanumeric tokens, L2-normalized."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    v = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(text):
        h = fnv1a64(tok.encode("utf-8"))
        v[h % dim] += -1.0 if h >> 63 else 1.0
    return normalize(v)


class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    def __init__(self, dim: int = 256):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for k, t in enumerate(texts):
            v = self._cache.get(t)
            if v is None:
                v = self._cache[t] = hash_embed(t, self.dim)
            out[k] = v
        return out


def _post_json(session: requests.Session, url: str, payload: dict, headers: dict, timeout: float, retries: int):
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            resp = session.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as e:
            last = TransportError(f"POST {url} failed: {e}")
        else:
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError as e:
                    raise ProtocolError(f"POST {url}: invalid JSON body") from e
            last = TransportError(f"POST {url} failed", resp.status_code)
            if resp.status_code < 500 and resp.status_code != 429:
                break
        if attempt < retries:
            time.sleep(0.5 * 2**attempt)
    assert last is not None
    raise last


class RemoteEmbedder:
    """Client for `POST {endpoint}/embed` returning {"vectors": [[...], ...]}."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2, api_key: str | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.api_key = api_key if api_key is not None else os.environ.get("SCORE_API_KEY")
        self.session = requests.Session()
        self.dim = 0

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim))
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = _post_json(self.session, f"{self.endpoint}/embed", {"texts": texts}, headers, self.timeout, self.retries)
        vectors = body.get("vectors") if isinstance(body, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError("embed response must carry one vector per input text")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProtocolError(f"dimension mismatch across batch: {sorted(dims)}")
        arr = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ProtocolError("embed response contains a zero vector")
        self.dim = arr.shape[1]
        return arr / norms


def embed_remote(endpoint: str, texts: Sequence[str], **kw) -> list[np.ndarray]:
    return list(RemoteEmbedder(endpoint, **kw).embed(texts))


class LLM(Protocol):
    def complete(self, prompt: str) -> str: ...

    def judge(self, prompt: str) -> JudgeResult: ...


# Markers that open the target-item slot in every prompt template.
_TARGET_MARKERS = ("would enjoy the movie titled ", "would enjoy the movie ")


class StubLLM:
    """Deterministic offline LLM that reads item titles back out of prompts.

    Items are recognised as single-quoted catalog titles. Everything before the
    target-item slot counts as history/CI context.
    """

    def __init__(self, catalog: Mapping[str, Iterable[str]], gain: float = 4.0):
        self.catalog: dict[str, frozenset[str]] = {}
        for title, tags in catalog.items():
            self.catalog[title] = self.catalog.get(title, frozenset()) | frozenset(tags)
        self.gain = gain
        titles = sorted(self.catalog, key=lambda t: (-len(t), t))
        self._title_re = re.compile("'(" + "|".join(map(re.escape, titles)) + ")'") if titles else None

    @classmethod
    def from_items(cls, items, gain: float = 4.0) -> "StubLLM":
        return cls({m.title: m.tags for m in items}, gain)

    def _split(self, prompt: str) -> tuple[str, str]:
        for marker in _TARGET_MARKERS:
            k = prompt.rfind(marker)
            if k >= 0:
                return prompt[:k], prompt[k + len(marker):]
        return prompt, ""

    def _tags(self, text: str) -> set[str]:
        if self._title_re is None:
            return set()
        out: set[str] = set()
        for m in self._title_re.finditer(text):
            out |= self.catalog[m.group(1)]
        return out

    def context_tags(self, prompt: str) -> tuple[set[str], set[str]]:
        context, target = self._split(prompt)
        return self._tags(context), self._tags(target)

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        ctx, tgt = self.context_tags(prompt)
        return "Helpful signals include: " + ", ".join(sorted(ctx | tgt))

    def jaccard(self, prompt: str) -> float:
        ctx, tgt = self.context_tags(prompt)
        union = ctx | tgt
        return len(ctx & tgt) / len(union) if union else 0.0

    def judge(self, prompt: str) -> JudgeResult:
        if not prompt:
            raise ValueError("empty prompt")
        j = self.jaccard(prompt)
        return JudgeResult(self.gain * j, self.gain * (1.0 - j))


def _match_logprob(top: list[dict], word: str) -> float | None:
    best = None
    for entry in top:
        tok = entry.get("token")
        if isinstance(tok, str) and tok.lstrip() == word:
            lp = float(entry["logprob"])
            if best is None or lp > best:
                best = lp
    return best


def extract_yes_no(body: dict) -> JudgeResult:
    """Pull Yes/No logprobs from the first generated token of a chat completion."""
    try:
        content = body["choices"][0]["logprobs"]["content"]
        first = content[0]
    except (KeyError, IndexError, TypeError) as e:
        raise ProtocolError("chat completion response has no token logprobs") from e
    top = list(first.get("top_logprobs") or [])
    if "token" in first and "logprob" in first:
        top.append({"token": first["token"], "logprob": first["logprob"]})
    yes, no = _match_logprob(top, "Yes"), _match_logprob(top, "No")
    if yes is None and no is None:
        raise MissingTokenError("neither 'Yes' nor 'No' among the returned top logprobs")
    # an absent token is bounded above by the smallest returned logprob
    floor = min(float(e["logprob"]) for e in top)
    return JudgeResult(yes if yes is not None else floor, no if no is not None else floor)


class RemoteLLM:
    """OpenAI-style chat-completions client."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        retries: int = 2,
        top_logprobs: int = 20,
        max_tokens: int = 512,
        concurrency: int = 4,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("SCORE_API_KEY")
        self.timeout = timeout
        self.retries = retries
        self.top_logprobs = top_logprobs
        self.max_tokens = max_tokens
        self.concurrency = concurrency
        self.session = requests.Session()

    def _chat(self, prompt: str, **extra) -> dict:
        if not prompt:
            raise ValueError("empty prompt")
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0.0,
            **extra,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        return _post_json(self.session, f"{self.base_url}/chat/completions", payload, headers, self.timeout, self.retries)

    def complete(self, prompt: str) -> str:
        body = self._chat(prompt, max_tokens=self.max_tokens)
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise ProtocolError(f"unexpected chat completion body: {json.dumps(body)[:200]}") from e

    def judge(self, prompt: str) -> JudgeResult:
        body = self._chat(prompt, max_tokens=1, logprobs=True, top_logprobs=self.top_logprobs)
        return extract_yes_no(body)


def llm_complete(provider: LLM, prompt: str) -> str:
    return provider.complete(prompt)


def llm_judge(provider: LLM, prompt: str) -> JudgeResult:
    return provider.judge(prompt)


def map_bounded(fn, items: Sequence, concurrency: int = 1) -> list:
    """Apply `fn` to every item with at most `concurrency` calls in flight.

    Results are returned in input order regardless of completion order.
    """
    if concurrency <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(fn, items))
