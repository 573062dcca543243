"""Two-step retrieve/rerank inference and Yes-probability prediction."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from . import car, sare
from .adapter import Adapter
from .artifacts import atomic_open
from .corpus import EmptyHistoryError, InteractionCorpus, behavior_text, item_text
from .prompts import DEFAULT_PROMPTS, PromptBundle, basic_prompt, ci_prompt
from .providers import LLM, Embedder, map_bounded


class ColdStartError(EmptyHistoryError):
    pass


@dataclass
class Providers:
    embedder: Embedder
    llm: LLM
    concurrency: int = 1


@dataclass
class InferenceConfig:
    k_e: int = 10
    k_s: int = 2
    max_items: int = 15


@dataclass
class PredictionRecord:
    user: str
    item: str
    ci_users: list[str]
    prompt: str
    prob: float
    label: int | None = None
    candidates: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"user": self.user, "item": self.item, "ci_users": self.ci_users, "prob": self.prob, "label": self.label},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "PredictionRecord":
        d = json.loads(line)
        return cls(d["user"], d["item"], list(d["ci_users"]), "", float(d["prob"]), d.get("label"))


def yes_probability(logit_yes: float, logit_no: float) -> float:
    """Two-way softmax written as a logistic in the logit difference."""
    d = logit_yes - logit_no
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def predict(judge: LLM, prompt: str) -> float:
    if not prompt:
        raise ValueError("empty prompt")
    r = judge.judge(prompt)
    return yes_probability(r.logit_yes, r.logit_no)


@dataclass
class Pipeline:
    """Everything inference needs, loaded once."""

    corpus: InteractionCorpus
    car_adapter: Adapter
    index: car.BehaviorIndex
    sare_adapter: Adapter
    providers: Providers
    config: InferenceConfig = field(default_factory=InferenceConfig)
    prompts: PromptBundle = DEFAULT_PROMPTS


def recommend(target_user: int, target_item: int, pipe: Pipeline, label: int | None = None) -> PredictionRecord:
    corpus, cfg = pipe.corpus, pipe.config
    uid = corpus.user_ids[target_user]
    if not corpus.history(target_user):
        raise ColdStartError(f"user {uid} has no positive history")
    history = behavior_text(corpus, target_user, cfg.max_items)
    target = item_text(corpus, target_item)
    base_prompt = basic_prompt(history, target, pipe.prompts)
    ci_users: list[str] = []
    candidates: list[str] = []
    if cfg.k_s > 0:
        query = car.car_embed(pipe.car_adapter, pipe.providers.embedder.embed([history])[0])
        hits = car.retrieve(pipe.index, query, cfg.k_e, exclude=uid)
        candidates = [u for u, _ in hits]
        if hits:
            cand_texts = [(u, behavior_text(corpus, corpus.user_index[u], cfg.max_items)) for u in candidates]
            ci_users = sare.rerank(pipe.sare_adapter, base_prompt, cand_texts, cfg.k_s, pipe.providers.embedder)
    behaviors = [behavior_text(corpus, corpus.user_index[u], cfg.max_items) for u in ci_users]
    prompt = ci_prompt(history, behaviors, target, pipe.prompts)
    return PredictionRecord(
        uid, corpus.items[target_item].item_id, ci_users, prompt, predict(pipe.providers.llm, prompt), label, candidates
    )


def recommend_many(
    pairs: Sequence[tuple[int, int, int | None]], pipe: Pipeline
) -> tuple[list[PredictionRecord], int]:
    """Score (user, item, label) triples; cold-start users are skipped and counted."""

    def one(t):
        u, i, y = t
        try:
            return recommend(u, i, pipe, y)
        except ColdStartError:
            return None

    out = map_bounded(one, list(pairs), pipe.providers.concurrency)
    records = [r for r in out if r is not None]
    records.sort(key=lambda r: (r.user, r.item))
    return records, len(out) - len(records)


def write_predictions(path, records: Sequence[PredictionRecord]) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def read_predictions(path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8") as f:
        return [PredictionRecord.from_json(line) for line in f if line.strip()]

