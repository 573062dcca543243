"""Seeded synthetic corpora with planted structure.

* two_block: two user groups that like disjoint item blocks (CRM sanity).
* planted_clusters: small user cliques sharing cluster-specific items among
  shared popular noise (retriever training).
* planted_signal: seekers whose test items carry a tag visible only in their
  group's helper histories (end-to-end CI lift).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import InteractionRecord, ItemMeta, SplitSpec, write_interactions, write_metadata

_CONS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def _words(rng: np.random.Generator, n: int, syllables: int = 3) -> list[str]:
    out, seen = [], set()
    while len(out) < n:
        w = "".join(_CONS[rng.integers(len(_CONS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(syllables))
        if w not in seen:
            seen.add(w)
            out.append(w.capitalize())
    return out


@dataclass
class SyntheticData:
    records: list[InteractionRecord]
    items: list[ItemMeta]
    groups: dict[str, int]
    split: SplitSpec | None = None


def two_block(seed: int = 0, n_users: int = 50, n_items: int = 40, n_pos: int = 10, n_neg: int = 6) -> SyntheticData:
    """Group g users rate n_pos items of block g high and n_neg items of the other block low."""
    rng = np.random.default_rng(seed)
    words = _words(rng, n_items)
    half = n_items // 2
    items = [ItemMeta(f"i{k:03d}", f"{words[k]} ({1980 + k % 20})", (f"block{int(k >= half)}",)) for k in range(n_items)]
    records, groups = [], {}
    for u in range(n_users):
        g = u % 2
        uid = f"u{u:03d}"
        groups[uid] = g
        own = np.arange(half) + g * half
        other = np.arange(half) + (1 - g) * half
        for k in rng.choice(own, n_pos, replace=False):
            records.append(InteractionRecord(uid, items[k].item_id, int(rng.integers(4, 6)), int(rng.integers(0, 10**6))))
        for k in rng.choice(other, n_neg, replace=False):
            records.append(InteractionRecord(uid, items[k].item_id, int(rng.integers(1, 3)), int(rng.integers(0, 10**6))))
    return SyntheticData(records, items, groups)


def holdout(records: list[InteractionRecord], frac: float, seed: int) -> tuple[list[InteractionRecord], list[InteractionRecord]]:
    """Random per-record holdout."""
    rng = np.random.default_rng(seed)
    mask = rng.random(len(records)) < frac
    return [r for r, m in zip(records, mask) if not m], [r for r, m in zip(records, mask) if m]


def planted_clusters(
    seed: int = 0,
    n_clusters: int = 20,
    cluster_size: int = 6,
    cluster_items: int = 8,
    per_user_cluster: int = 5,
    noise_items: int = 40,
    per_user_noise: int = 6,
) -> SyntheticData:
    """Cliques of `cluster_size` users; with the default K_c=5 a clique is exactly a user plus its positives."""
    rng = np.random.default_rng(seed)
    n_items = n_clusters * cluster_items + noise_items
    words = _words(rng, 2 * n_items)
    items = [
        ItemMeta(f"i{k:04d}", f"{words[2 * k]} {words[2 * k + 1]} ({1970 + k % 40})",
                 (f"cluster{k // cluster_items}" if k < n_clusters * cluster_items else "noise",))
        for k in range(n_items)
    ]
    noise = np.arange(n_clusters * cluster_items, n_items)
    records, groups = [], {}
    for c in range(n_clusters):
        own = np.arange(cluster_items) + c * cluster_items
        for m in range(cluster_size):
            uid = f"u{c:03d}_{m}"
            groups[uid] = c
            chosen = list(rng.choice(own, per_user_cluster, replace=False)) + list(rng.choice(noise, per_user_noise, replace=False))
            for k in rng.permutation(chosen):
                records.append(InteractionRecord(uid, items[k].item_id, 5, int(rng.integers(0, 10**6))))
    return SyntheticData(records, items, groups)


def planted_signal(
    seed: int = 0,
    n_groups: int = 8,
    seekers: int = 4,
    helpers: int = 4,
    base_items: int = 6,
    hidden_items: int = 6,
    n_styles: int = 6,
) -> SyntheticData:
    """Per group: base-tag items everyone likes and hidden-tag items only helpers have seen.

    Seekers' val/test interactions are positive on their own group's hidden items
    and negative on another group's hidden items. Timestamps place train in
    [0, 1000], val in (1000, 2000], test in (2000, 3000].
    """
    if n_groups < 3:
        raise ValueError("planted_signal needs at least 3 groups (negatives come from 2 other groups)")
    rng = np.random.default_rng(seed)
    tag_words = _words(rng, 2 * n_groups + n_styles, syllables=2)
    base_tags = tag_words[:n_groups]
    hidden_tags = tag_words[n_groups:2 * n_groups]
    styles = tag_words[2 * n_groups:]
    names = _words(rng, n_groups * (base_items + hidden_items), syllables=3)
    items: list[ItemMeta] = []
    base_of: list[list[int]] = []
    hidden_of: list[list[int]] = []
    for g in range(n_groups):
        b, h = [], []
        for kind, tag, n, bucket in (("b", base_tags[g], base_items, b), ("h", hidden_tags[g], hidden_items, h)):
            for _ in range(n):
                k = len(items)
                style = styles[rng.integers(n_styles)]
                items.append(ItemMeta(f"{kind}{g:02d}_{len(bucket)}", f"{tag} {names[k]} ({1990 + k % 25})", (tag, style)))
                bucket.append(k)
        base_of.append(b)
        hidden_of.append(h)

    records, groups = [], {}

    def add(uid, k, rating, lo, hi):
        records.append(InteractionRecord(uid, items[k].item_id, rating, int(rng.integers(lo, hi + 1))))

    for g in range(n_groups):
        for s in range(seekers):
            uid = f"g{g:02d}s{s}"
            groups[uid] = g
            for k in rng.choice(base_of[g], 4, replace=False):
                add(uid, k, 5, 0, 1000)
            others = [h for h in range(n_groups) if h != g]
            for lo, hi in ((1001, 2000), (2001, 3000)):
                for k in rng.choice(hidden_of[g], 2, replace=False):
                    add(uid, k, 5, lo, hi)
                for h in rng.choice(others, 2, replace=False):
                    add(uid, int(rng.choice(hidden_of[h])), 1, lo, hi)
        for s in range(helpers):
            uid = f"g{g:02d}h{s}"
            groups[uid] = g
            for k in rng.choice(base_of[g], 3, replace=False):
                add(uid, k, 5, 0, 1000)
            for k in rng.choice(hidden_of[g], 3, replace=False):
                add(uid, k, 5, 0, 1000)
    return SyntheticData(records, items, groups, SplitSpec(1000, 2000))


def write_dataset(data: SyntheticData, directory) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ip, mp = d / "interactions.tsv", d / "items.tsv"
    write_interactions(ip, data.records)
    write_metadata(mp, data.items)
    return ip, mp
