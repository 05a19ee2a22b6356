"""Deterministic N-way K-shot episode sampling.

Randomness comes from numpy's PCG64 bit generator (64-bit, XSL-RR output
function). Selection without replacement is an explicit partial Fisher-Yates
over rng.integers draws, so a seed pins the episode stream exactly. Parallel
streams derive child seeds as seed XOR episode counter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EpisodeTape, ToyEncoder
from .ingest import Dataset
from .types import Episode, RelationInfo


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_rng(seed: int, counter: int) -> np.random.Generator:
    """Independent per-episode stream: child seed = seed XOR counter."""
    return make_rng(seed ^ counter)


def sample_without_replacement(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """First k entries of a partial Fisher-Yates shuffle of range(n)."""
    if not (0 <= k <= n):
        raise ValueError(f"cannot draw {k} from {n} without replacement")
    idx = list(range(n))
    for i in range(k):
        j = int(rng.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


@dataclass(frozen=True)
class EpisodeSpec:
    """Indices defining one episode: N classes, K support + Q query per class."""

    class_ids: tuple[str, ...]
    support_indices: tuple[tuple[int, ...], ...]
    query_indices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "class_ids", tuple(self.class_ids))
        object.__setattr__(
            self, "support_indices", tuple(tuple(s) for s in self.support_indices)
        )
        object.__setattr__(self, "query_indices", tuple(tuple(q) for q in self.query_indices))
        n = len(self.class_ids)
        if n == 0:
            raise ValueError("episode spec needs at least one class")
        if len(set(self.class_ids)) != n:
            raise ValueError("episode classes must be distinct")
        if len(self.support_indices) != n or len(self.query_indices) != n:
            raise ValueError("need one support and one query index tuple per class")
        for cid, sup, que in zip(self.class_ids, self.support_indices, self.query_indices):
            if not sup:
                raise ValueError(f"class {cid!r}: empty support")
            all_idx = sup + que
            if len(set(all_idx)) != len(all_idx):
                raise ValueError(f"class {cid!r}: support/query indices overlap")
            if any(i < 0 for i in all_idx):
                raise ValueError(f"class {cid!r}: negative instance index")

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    @property
    def k_shot(self) -> int:
        return len(self.support_indices[0])


def sample_episode_spec(
    rng: np.random.Generator, ds: Dataset, n_way: int, k_shot: int, q_queries: int
) -> EpisodeSpec:
    """Uniformly draw N classes, then K+Q distinct instances per class
    (first K as support), from the dataset's file order."""
    relation_ids = ds.relation_ids
    if len(relation_ids) < n_way:
        raise ValueError(f"dataset has {len(relation_ids)} relations, need {n_way}")
    chosen = [relation_ids[i] for i in sample_without_replacement(rng, len(relation_ids), n_way)]
    support, query = [], []
    for cid in chosen:
        pool = len(ds.relations[cid])
        need = k_shot + q_queries
        if pool < need:
            raise ValueError(f"relation {cid!r} has {pool} instances, need {need}")
        picks = sample_without_replacement(rng, pool, need)
        support.append(tuple(picks[:k_shot]))
        query.append(tuple(picks[k_shot:]))
    return EpisodeSpec(
        class_ids=tuple(chosen),
        support_indices=tuple(support),
        query_indices=tuple(query),
    )


def materialize_episode(
    spec: EpisodeSpec, ds: Dataset, encoder, rel_info: dict[str, RelationInfo]
) -> Episode:
    """Embed the instances and relations an episode spec names.

    Query labels follow class position: queries of class_ids[i] carry label i.
    """
    support = tuple(
        tuple(encoder.embed_instance(ds.instance(cid, idx)) for idx in sup)
        for cid, sup in zip(spec.class_ids, spec.support_indices)
    )
    query = tuple(
        (encoder.embed_instance(ds.instance(cid, idx)), label)
        for label, (cid, que) in enumerate(zip(spec.class_ids, spec.query_indices))
        for idx in que
    )
    relation_embs = tuple(encoder.embed_relation(rel_info[cid]) for cid in spec.class_ids)
    return Episode(
        class_ids=spec.class_ids,
        support=support,
        query=query,
        relation_embs=relation_embs,
    )


def trace_episode(
    spec: EpisodeSpec, ds: Dataset, encoder: ToyEncoder, rel_info: dict[str, RelationInfo]
) -> tuple[Episode, EpisodeTape]:
    """materialize_episode for the toy encoder, also recording the backward tape."""
    ep = materialize_episode(spec, ds, encoder, rel_info)
    support_buckets = [
        [encoder.instance_buckets(ds.instance(cid, idx)) for idx in sup]
        for cid, sup in zip(spec.class_ids, spec.support_indices)
    ]
    query_buckets = [
        encoder.instance_buckets(ds.instance(cid, idx))
        for cid, que in zip(spec.class_ids, spec.query_indices)
        for idx in que
    ]
    relation_buckets, relation_means = [], []
    for cid in spec.class_ids:
        buckets, mean_view = encoder.relation_trace(rel_info[cid])
        relation_buckets.append(buckets)
        relation_means.append(mean_view)
    tape = EpisodeTape(
        support_buckets=support_buckets,
        query_buckets=query_buckets,
        relation_buckets=relation_buckets,
        relation_means=relation_means,
    )
    return ep, tape
