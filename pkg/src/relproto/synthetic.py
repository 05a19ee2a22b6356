"""Synthetic desk-scale tasks.

Two generators: Gaussian clusters with precomputed vectors (probes fusion
strategies with no training) and a token-level task for the toy encoder
(end-to-end training on hashed synthetic vocabularies).
"""

from __future__ import annotations

import numpy as np

from .ingest import Dataset, EmbeddingStore, instance_key
from .sampler import make_rng
from .types import InstanceEmbedding, RelationEmbedding, RelationInfo, TokenizedInstance


def _relation_ids(n_classes: int) -> list[str]:
    return [f"R{c:03d}" for c in range(n_classes)]


def _placeholder_instance(rid: str, index: int) -> TokenizedInstance:
    # Vector task instances carry no token content; the store has the vectors.
    return TokenizedInstance(
        tokens=("e1", "e2"),
        head_span=(0, 1),
        tail_span=(1, 2),
        relation_id=rid,
        instance_index=index,
    )


def gaussian_cluster_task(
    seed: int,
    n_classes: int = 20,
    dim: int = 16,
    sigma: float = 0.5,
    instances_per_class: int = 50,
) -> tuple[Dataset, EmbeddingStore, dict[str, RelationInfo]]:
    """Gaussian clusters around unit-norm class means.

    Instance head/tail vectors are mean + sigma * standard normal noise; each
    relation embedding is the exact class mean in both views, so fusing it adds
    a noise-free copy of the class signal.
    """
    rng = make_rng(seed)
    ids = _relation_ids(n_classes)
    store = EmbeddingStore(dim=dim)
    relations: dict[str, list[TokenizedInstance]] = {}
    rel_info: dict[str, RelationInfo] = {}
    for rid in ids:
        mean = rng.normal(size=dim)
        mean /= np.linalg.norm(mean)
        insts = []
        for i in range(instances_per_class):
            insts.append(_placeholder_instance(rid, i))
            store.add_instance(
                instance_key(rid, i),
                InstanceEmbedding(
                    head_vec=mean + sigma * rng.normal(size=dim),
                    tail_vec=mean + sigma * rng.normal(size=dim),
                ),
            )
        relations[rid] = insts
        store.add_relation(rid, RelationEmbedding(cls_view=mean.copy(), mean_view=mean.copy()))
        rel_info[rid] = RelationInfo(relation_id=rid, name=f"cluster {rid}", description="")
    return Dataset(relations), store, rel_info


def token_cluster_task(
    seed: int,
    n_classes: int = 20,
    vocab_per_class: int = 8,
    tokens_per_instance: int = 8,
    instances_per_class: int = 40,
) -> tuple[Dataset, dict[str, RelationInfo]]:
    """Token-level task for the toy encoder.

    Each class owns a small word vocabulary; instance tokens are drawn from it
    and the head/tail spans land on class words, so hashed bucket rows carry a
    learnable class signal. Relation name/description reuse the class words.
    """
    rng = make_rng(seed)
    ids = _relation_ids(n_classes)
    relations: dict[str, list[TokenizedInstance]] = {}
    rel_info: dict[str, RelationInfo] = {}
    for c, rid in enumerate(ids):
        vocab = [f"{rid.lower()}w{j}" for j in range(vocab_per_class)]
        insts = []
        for i in range(instances_per_class):
            toks = [vocab[int(rng.integers(0, vocab_per_class))] for _ in range(tokens_per_instance)]
            head = int(rng.integers(0, tokens_per_instance))
            tail = int(rng.integers(0, tokens_per_instance - 1))
            if tail >= head:
                tail += 1  # distinct start positions
            insts.append(
                TokenizedInstance(
                    tokens=tuple(toks),
                    head_span=(head, head + 1),
                    tail_span=(tail, tail + 1),
                    relation_id=rid,
                    instance_index=i,
                )
            )
        relations[rid] = insts
        rel_info[rid] = RelationInfo(
            relation_id=rid, name=vocab[0], description=" ".join(vocab[1:])
        )
    return Dataset(relations), rel_info
