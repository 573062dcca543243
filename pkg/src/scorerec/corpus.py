"""Interaction corpus: ingestion, binarization, temporal splits and behavior text."""
from __future__ import annotations

import calendar
import logging
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .artifacts import atomic_open

log = logging.getLogger(__name__)


class CorpusError(Exception):
    pass


class ParseError(CorpusError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


class MissingMetadataError(CorpusError):
    def __init__(self, item_ids: Sequence[str]):
        super().__init__(f"items without metadata: {', '.join(item_ids)}")
        self.item_ids = list(item_ids)


class EmptyHistoryError(CorpusError):
    pass


@dataclass(frozen=True)
class InteractionRecord:
    user_id: str
    item_id: str
    rating: int
    timestamp: int

    def __post_init__(self):
        if not 1 <= self.rating <= 5:
            raise ValueError(f"rating out of range: {self.rating}")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp: {self.timestamp}")


@dataclass(frozen=True)
class ItemMeta:
    item_id: str
    title: str
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.title:
            raise ValueError(f"empty title for item {self.item_id}")
        # dedupe, keep first occurrence order
        object.__setattr__(self, "tags", tuple(dict.fromkeys(self.tags)))


@dataclass(frozen=True)
class SplitSpec:
    train_end: int
    val_end: int

    def __post_init__(self):
        if not self.train_end < self.val_end:
            raise ValueError("train_end must be < val_end")


@dataclass(frozen=True)
class SequenceEntry:
    item: int
    label: int
    timestamp: int


@dataclass
class InteractionCorpus:
    """Immutable after construction.

    Users and items are dense-indexed in ascending id order, so index order and
    id order agree everywhere ties are broken.
    """

    user_ids: list[str]
    items: list[ItemMeta]
    records: list[InteractionRecord]
    threshold: int = 4
    sequences: list[list[SequenceEntry]] = field(init=False, repr=False)
    user_index: dict[str, int] = field(init=False, repr=False)
    item_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.user_index = {u: i for i, u in enumerate(self.user_ids)}
        self.item_index = {m.item_id: i for i, m in enumerate(self.items)}
        seqs: list[list[SequenceEntry]] = [[] for _ in self.user_ids]
        # stable sort keeps input order among equal timestamps
        for r in sorted(self.records, key=lambda r: r.timestamp):
            seqs[self.user_index[r.user_id]].append(
                SequenceEntry(self.item_index[r.item_id], label_of(r.rating, self.threshold), r.timestamp)
            )
        self.sequences = seqs

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def history(self, user: int) -> list[int]:
        """H(u): positively labelled items of `user`, chronological."""
        return [e.item for e in self.sequences[user] if e.label == 1]

    def stats(self) -> dict:
        return {
            "users": len({r.user_id for r in self.records}),
            "items": len({r.item_id for r in self.records}),
            "interactions": len(self.records),
            "positives": sum(label_of(r.rating, self.threshold) for r in self.records),
        }

    def label(self, record: InteractionRecord) -> int:
        return label_of(record.rating, self.threshold)

    def restrict(self, records: Iterable[InteractionRecord]) -> "InteractionCorpus":
        """Same user/item tables, sequences rebuilt from `records` only."""
        return InteractionCorpus(self.user_ids, self.items, list(records), self.threshold)


def label_of(rating: int, threshold: int) -> int:
    return int(rating >= threshold)


def read_interactions(path) -> list[InteractionRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(path, lineno, f"expected 4 tab-separated fields, got {len(parts)}")
            user, item, rating, ts = parts
            try:
                out.append(InteractionRecord(user, item, int(rating), int(ts)))
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
    return out


def read_metadata(path) -> list[ItemMeta]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 2 or 3 tab-separated fields, got {len(parts)}")
            tags = tuple(t for t in parts[2].split("|") if t) if len(parts) == 3 else ()
            try:
                out.append(ItemMeta(parts[0], parts[1], tags))
            except ValueError as e:
                raise ParseError(path, lineno, str(e)) from None
    return out


def build_corpus(
    records: Sequence[InteractionRecord],
    metadata: Sequence[ItemMeta],
    threshold: int = 4,
    window_start: int | None = None,
    min_interactions: int = 0,
) -> InteractionCorpus:
    if window_start is not None:
        records = [r for r in records if r.timestamp >= window_start]
    if min_interactions > 0:
        counts: dict[str, int] = {}
        for r in records:
            counts[r.user_id] = counts.get(r.user_id, 0) + 1
        records = [r for r in records if counts[r.user_id] >= min_interactions]
    meta = {m.item_id: m for m in metadata}
    missing = sorted({r.item_id for r in records} - meta.keys())
    if missing:
        raise MissingMetadataError(missing)
    users = sorted({r.user_id for r in records})
    items = [meta[k] for k in sorted(meta)]
    return InteractionCorpus(users, items, list(records), threshold)


def ingest(
    interaction_path,
    metadata_path,
    binarize_threshold: int = 4,
    window_start: int | None = None,
    min_interactions: int = 0,
) -> InteractionCorpus:
    corpus = build_corpus(
        read_interactions(interaction_path),
        read_metadata(metadata_path),
        binarize_threshold,
        window_start,
        min_interactions,
    )
    log.info("ingested corpus: %s", corpus.stats())
    return corpus


def write_interactions(path, records: Iterable[InteractionRecord]) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(f"{r.user_id}\t{r.item_id}\t{r.rating}\t{r.timestamp}\n")


def write_metadata(path, items: Iterable[ItemMeta]) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as f:
        for m in items:
            f.write(f"{m.item_id}\t{m.title}\t{'|'.join(m.tags)}\n")


def save_corpus(corpus: InteractionCorpus, directory) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ip, mp = d / "interactions.tsv", d / "items.tsv"
    write_interactions(ip, corpus.records)
    write_metadata(mp, corpus.items)
    return ip, mp


def temporal_split(
    corpus: InteractionCorpus, spec: SplitSpec
) -> tuple[list[InteractionRecord], list[InteractionRecord], list[InteractionRecord]]:
    """Boundaries are inclusive on the left set: t <= train_end goes to train."""
    train, val, test = [], [], []
    for r in corpus.records:
        if r.timestamp <= spec.train_end:
            train.append(r)
        elif r.timestamp <= spec.val_end:
            val.append(r)
        else:
            test.append(r)
    for name, part in (("train", train), ("val", val), ("test", test)):
        if not part:
            warnings.warn(f"temporal split produced an empty {name} partition", stacklevel=2)
    return train, val, test


def add_months(ts: int, months: int) -> int:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    m = dt.month - 1 + months
    year, month = dt.year + m // 12, m % 12 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return int(dt.replace(year=year, month=month, day=day).timestamp())


def month_split_spec(corpus: InteractionCorpus, train_months: int, val_months: int) -> SplitSpec:
    """Boundaries counted in calendar months from the earliest timestamp."""
    start = min(r.timestamp for r in corpus.records)
    train_end = add_months(start, train_months)
    return SplitSpec(train_end, add_months(train_end, val_months))


def quote_title(title: str) -> str:
    return f"'{title}'"


def item_text(corpus: InteractionCorpus, item: int) -> str:
    return quote_title(corpus.items[item].title)


def behavior_text(corpus: InteractionCorpus, user: int, max_items: int = 15) -> str:
    """d(H(u)): quoted titles of the most recent positives, oldest first."""
    if max_items < 1:
        raise ValueError("max_items must be positive")
    hist = corpus.history(user)
    if not hist:
        raise EmptyHistoryError(f"user {corpus.user_ids[user]} has no positive history")
    return ", ".join(item_text(corpus, i) for i in hist[-max_items:])


def read_ml1m(directory) -> tuple[list[InteractionRecord], list[ItemMeta]]:
    """Raw MovieLens-1M files: `::`-separated, latin-1, genres as tags."""
    d = Path(directory)
    records, items = [], []
    for path, n_fields, sink in ((d / "ratings.dat", 4, records), (d / "movies.dat", 3, items)):
        with open(path, encoding="latin-1") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\r\n")
                if not line:
                    continue
                parts = line.split("::")
                if len(parts) != n_fields:
                    raise ParseError(path, lineno, f"expected {n_fields} '::'-separated fields")
                try:
                    if n_fields == 4:
                        sink.append(InteractionRecord(parts[0], parts[1], int(parts[2]), int(parts[3])))
                    else:
                        sink.append(ItemMeta(parts[0], parts[1], tuple(g for g in parts[2].split("|") if g)))
                except ValueError as e:
                    raise ParseError(path, lineno, str(e)) from None
    return records, items
