"""Pipeline stages over persisted artifacts, and whole-experiment runs.

Every stage reads its inputs from the paths named in RunConfig and writes its
output atomically. All randomness derives from `config.seed`.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import car, crm, sare
from .adapter import Adapter
from .artifacts import atomic_write_text
from .config import RunConfig
from .corpus import (
    InteractionCorpus,
    InteractionRecord,
    SplitSpec,
    add_months,
    behavior_text,
    ingest,
    month_split_spec,
    read_interactions,
    read_metadata,
    read_ml1m,
    build_corpus,
    temporal_split,
    write_interactions,
    write_metadata,
)
from .metrics import auc, uauc
from .providers import HashEmbedder, RemoteEmbedder, RemoteLLM, StubLLM
from .recommender import InferenceConfig, Pipeline, Providers, read_predictions, recommend_many, write_predictions

log = logging.getLogger(__name__)

# published MovieLens-1M counts after windowing, for the dataset soft check
ML1M_REFERENCE = {"users": 839, "items": 3256, "train": 33891, "val": 10401, "test": 7331}


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def corpus_paths(cfg: RunConfig) -> tuple[Path, Path]:
    d = cfg.path("corpus_dir", "corpus")
    return d / "interactions.tsv", d / "items.tsv"


def split_paths(cfg: RunConfig) -> dict[str, Path]:
    d = cfg.path("split_dir", "split")
    return {name: d / f"{name}.tsv" for name in ("train", "val", "test")}


def run_ingest(cfg: RunConfig) -> InteractionCorpus:
    window_start = None
    if cfg.window_months:
        latest = max(r.timestamp for r in read_interactions(cfg.interactions))
        window_start = add_months(latest, -cfg.window_months)
    corpus = ingest(cfg.interactions, cfg.metadata, cfg.threshold, window_start, cfg.min_interactions)
    ip, mp = corpus_paths(cfg)
    write_interactions(ip, corpus.records)
    write_metadata(mp, corpus.items)
    atomic_write_text(ip.parent / "stats.json", _json(corpus.stats()))
    return corpus


def load_corpus(cfg: RunConfig) -> InteractionCorpus:
    ip, mp = corpus_paths(cfg)
    return build_corpus(read_interactions(ip), read_metadata(mp), cfg.threshold)


def split_spec(cfg: RunConfig, corpus: InteractionCorpus) -> SplitSpec:
    if cfg.train_end or cfg.val_end:
        return SplitSpec(cfg.train_end, cfg.val_end)
    if cfg.train_months and cfg.val_months:
        return month_split_spec(corpus, cfg.train_months, cfg.val_months)
    raise ValueError("split boundaries missing: set train_end/val_end or train_months/val_months")


def run_split(cfg: RunConfig) -> dict:
    corpus = load_corpus(cfg)
    spec = split_spec(cfg, corpus)
    parts = dict(zip(("train", "val", "test"), temporal_split(corpus, spec)))
    paths = split_paths(cfg)
    for name, recs in parts.items():
        write_interactions(paths[name], recs)
    stats = {"train_end": spec.train_end, "val_end": spec.val_end, **{k: len(v) for k, v in parts.items()}}
    atomic_write_text(paths["train"].parent / "stats.json", _json(stats))
    return stats


def load_split(cfg: RunConfig, name: str) -> list[InteractionRecord]:
    return read_interactions(split_paths(cfg)[name])


def history_corpus(cfg: RunConfig, corpus: InteractionCorpus | None = None) -> InteractionCorpus:
    """The corpus restricted to training-period records; source of every H(u)."""
    corpus = corpus or load_corpus(cfg)
    return corpus.restrict(load_split(cfg, "train"))


def make_providers(cfg: RunConfig, corpus: InteractionCorpus) -> Providers:
    if cfg.provider == "stub":
        return Providers(HashEmbedder(cfg.dim), StubLLM.from_items(corpus.items), 1)
    return Providers(
        RemoteEmbedder(cfg.embed_endpoint),
        RemoteLLM(cfg.llm_base_url, cfg.llm_model, concurrency=cfg.concurrency),
        cfg.concurrency,
    )


def run_train_crm(cfg: RunConfig) -> crm.CrmModel:
    corpus = load_corpus(cfg)
    model = crm.train_bpr_mf(
        corpus,
        load_split(cfg, "train"),
        crm.BprConfig(cfg.d, cfg.crm_epochs, cfg.crm_lr, cfg.crm_l2, cfg.seed),
        cfg.crm_mode,
    )
    model.save(cfg.path("crm_path", "crm.bin"))
    return model


def run_train_car(cfg: RunConfig) -> Adapter:
    hist = history_corpus(cfg)
    model = crm.CrmModel.load(cfg.path("crm_path", "crm.bin"), cfg.crm_mode)
    pairs = car.build_training_pairs(hist, model, cfg.k_c)
    adapter = car.train_car_adapter(
        pairs, hist, make_providers(cfg, hist).embedder,
        car.CarConfig(cfg.tau_car, cfg.car_epochs, cfg.car_lr, cfg.batch_size, cfg.seed, cfg.max_items),
    )
    adapter.save(cfg.path("car_path", "car_adapter.bin"), car.ADAPTER_MAGIC)
    return adapter


def run_index(cfg: RunConfig) -> car.BehaviorIndex:
    hist = history_corpus(cfg)
    adapter = Adapter.load(cfg.path("car_path", "car_adapter.bin"), car.ADAPTER_MAGIC)
    index = car.build_index(hist, adapter, make_providers(cfg, hist).embedder, cfg.max_items)
    index.save(cfg.path("index_path", "index.bin"))
    return index


def assessment_sample(cfg: RunConfig, hist: InteractionCorpus) -> list[tuple[int, int]]:
    """Random (user, item) pairs from the assessment split whose user has a history."""
    pairs = sorted({
        (hist.user_index[r.user_id], hist.item_index[r.item_id])
        for r in load_split(cfg, cfg.assess_split)
        if hist.history(hist.user_index[r.user_id])
    })
    rng = np.random.default_rng([cfg.seed, 3])
    picked = rng.permutation(len(pairs))[:cfg.assess_samples]
    return [pairs[k] for k in sorted(picked)]


def run_assess(cfg: RunConfig) -> list[sare.AssessmentRecord]:
    hist = history_corpus(cfg)
    providers = make_providers(cfg, hist)
    records, skipped = sare.generate_assessments(
        providers.llm, hist, assessment_sample(cfg, hist), providers.embedder, cfg.max_items,
        concurrency=providers.concurrency,
    )
    sare.write_assessments(cfg.path("assessments_path", "assessments.jsonl"), records)
    log.info("assessments: %d written, %d skipped", len(records), skipped)
    return records


def build_rankings(cfg: RunConfig, hist: InteractionCorpus, providers: Providers) -> list[sare.OrderedCandidateSet]:
    adapter = Adapter.load(cfg.path("car_path", "car_adapter.bin"), car.ADAPTER_MAGIC)
    index = car.BehaviorIndex.load(cfg.path("index_path", "index.bin"))
    out = []
    for a in sare.read_assessments(cfg.path("assessments_path", "assessments.jsonl")):
        u = hist.user_index[a.target_user]
        query = car.car_embed(adapter, providers.embedder.embed([behavior_text(hist, u, cfg.max_items)])[0])
        hits = car.retrieve(index, query, cfg.k_e, exclude=a.target_user)
        if len(hits) <= cfg.rank_threshold:
            continue
        cands = [(v, behavior_text(hist, hist.user_index[v], cfg.max_items)) for v, _ in hits]
        out.append(sare.ranking_from_assessment(a, cands, providers.embedder))
    return out


def run_train_sare(cfg: RunConfig) -> Adapter:
    hist = history_corpus(cfg)
    providers = make_providers(cfg, hist)
    rankings = build_rankings(cfg, hist, providers)
    adapter = sare.train_sare_adapter(
        rankings, hist, providers.embedder,
        sare.SareConfig(cfg.tau_sare, cfg.sare_epochs, cfg.sare_lr, cfg.seed, cfg.rank_threshold, cfg.neg_count,
                        cfg.max_items),
    )
    adapter.save(cfg.path("sare_path", "sare_adapter.bin"), sare.ADAPTER_MAGIC)
    return adapter


def load_pipeline(cfg: RunConfig, hist: InteractionCorpus | None = None) -> Pipeline:
    hist = hist or history_corpus(cfg)
    return Pipeline(
        hist,
        Adapter.load(cfg.path("car_path", "car_adapter.bin"), car.ADAPTER_MAGIC),
        car.BehaviorIndex.load(cfg.path("index_path", "index.bin")),
        Adapter.load(cfg.path("sare_path", "sare_adapter.bin"), sare.ADAPTER_MAGIC),
        make_providers(cfg, hist),
        InferenceConfig(cfg.k_e, cfg.k_s, cfg.max_items),
    )


def run_predict(cfg: RunConfig, split: str = "test"):
    pipe = load_pipeline(cfg)
    hist = pipe.corpus
    triples = [
        (hist.user_index[r.user_id], hist.item_index[r.item_id], hist.label(r))
        for r in load_split(cfg, split)
    ]
    records, skipped = recommend_many(triples, pipe)
    if skipped:
        log.info("predict: skipped %d cold-start pairs", skipped)
    write_predictions(cfg.path("predictions_path", "predictions.jsonl"), records)
    return records


@dataclass
class EvalReport:
    auc: float
    uauc: float
    n_pairs: int
    n_users_evaluated: int
    n_users_skipped: int
    config_digest: str
    seed: int

    def to_json(self) -> str:
        return _json(asdict(self))


def evaluate_records(records, cfg: RunConfig) -> EvalReport:
    scores = [r.prob for r in records]
    labels = [int(r.label) for r in records]
    u, n_eval, n_skip = uauc(records)
    return EvalReport(auc(scores, labels), u, len(records), n_eval, n_skip, cfg.digest(), cfg.seed)


def run_evaluate(cfg: RunConfig) -> EvalReport:
    records = read_predictions(cfg.path("predictions_path", "predictions.jsonl"))
    report = evaluate_records(records, cfg)
    atomic_write_text(cfg.path("report_path", "report.json"), report.to_json())
    return report


def run_experiment(cfg: RunConfig) -> EvalReport:
    """Score every test pair with the persisted artifacts, then report."""
    run_predict(cfg)
    return run_evaluate(cfg)


def run_all(cfg: RunConfig) -> EvalReport:
    run_ingest(cfg)
    run_split(cfg)
    run_train_crm(cfg)
    run_train_car(cfg)
    run_index(cfg)
    run_assess(cfg)
    run_train_sare(cfg)
    return run_experiment(cfg)


def dataset_report(cfg: RunConfig) -> dict:
    """Corpus and split counts next to the published MovieLens-1M counts."""
    corpus = load_corpus(cfg)
    parts = temporal_split(corpus, split_spec(cfg, corpus))
    ours = {**{k: v for k, v in corpus.stats().items() if k in ("users", "items")},
            **{name: len(p) for name, p in zip(("train", "val", "test"), parts)}}
    return {"ours": ours, "reference": ML1M_REFERENCE}


def ml1m_soft_check(raw_dir, work_dir) -> dict:
    """Convert raw ML-1M, apply the 20-month window and 10/5/5-month split, report counts."""
    records, items = read_ml1m(raw_dir)
    work = Path(work_dir)
    write_interactions(work / "raw" / "interactions.tsv", records)
    write_metadata(work / "raw" / "items.tsv", items)
    cfg = RunConfig(
        interactions=str(work / "raw" / "interactions.tsv"), metadata=str(work / "raw" / "items.tsv"),
        artifacts_dir=str(work), threshold=4, window_months=20, train_months=10, val_months=5,
    ).validate()
    run_ingest(cfg)
    report = dataset_report(cfg)
    atomic_write_text(work / "dataset_report.json", _json(report))
    return report
