"""Embedding providers behind one contract.

Two implementations: a lookup provider over a precomputed store (real
transformer features produced offline) and a toy trainable encoder that hashes
tokens into an embedding table, cheap enough to train end to end with exact
gradients at desk scale. Instances and relations share the same parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import EmbeddingStore, instance_key
from .protonet import EpisodeGradients
from .types import InstanceEmbedding, RelationEmbedding, RelationInfo, TokenizedInstance

# Token cap for relation text (name + description); the description tail is
# truncated beyond this.
MAX_RELATION_TOKENS = 128

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash; deterministic and portable, no vocabulary file."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def token_bucket(token: str, n_buckets: int) -> int:
    return fnv1a_64(token.encode("utf-8")) % n_buckets


@dataclass(frozen=True)
class ToyEncoderParams:
    """Hash-bucket embedding table plus the affine map producing the summary view."""

    E: np.ndarray  # (H, d) token-bucket embeddings
    W_c: np.ndarray  # (d, d)
    b_c: np.ndarray  # (d,)

    def __post_init__(self):
        E = np.asarray(self.E, dtype=np.float64)
        W_c = np.asarray(self.W_c, dtype=np.float64)
        b_c = np.asarray(self.b_c, dtype=np.float64)
        if E.ndim != 2 or E.shape[0] < 64:
            raise ValueError(f"E must be (H, d) with H >= 64, got {E.shape}")
        d = E.shape[1]
        if W_c.shape != (d, d) or b_c.shape != (d,):
            raise ValueError(f"W_c/b_c shapes {W_c.shape}/{b_c.shape} do not match d={d}")
        for name, a in (("E", E), ("W_c", W_c), ("b_c", b_c)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "W_c", W_c)
        object.__setattr__(self, "b_c", b_c)

    @property
    def n_buckets(self) -> int:
        return self.E.shape[0]

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    def copy(self) -> "ToyEncoderParams":
        return ToyEncoderParams(self.E.copy(), self.W_c.copy(), self.b_c.copy())


def init_toy_params(seed: int, n_buckets: int = 4096, dim: int = 32) -> ToyEncoderParams:
    """Seeded init: E and W_c uniform in [-1/sqrt(d), 1/sqrt(d)], b_c zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    bound = 1.0 / np.sqrt(dim)
    E = rng.uniform(-bound, bound, size=(n_buckets, dim))
    W_c = rng.uniform(-bound, bound, size=(dim, dim))
    return ToyEncoderParams(E=E, W_c=W_c, b_c=np.zeros(dim))


@dataclass
class ToyEncoderGrads:
    """Gradient accumulators mirroring ToyEncoderParams."""

    E: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray

    @classmethod
    def zeros_like(cls, p: ToyEncoderParams) -> "ToyEncoderGrads":
        return cls(np.zeros_like(p.E), np.zeros_like(p.W_c), np.zeros_like(p.b_c))


@dataclass
class EpisodeTape:
    """Which table rows an episode's forward pass touched.

    support_buckets[i][k] and query_buckets[m] are (head, tail) bucket pairs;
    relation_buckets[i] lists the bucket of every relation-text token, and
    relation_means[i] caches the pre-affine mean view needed for the W_c grad.
    """

    support_buckets: list[list[tuple[int, int]]]
    query_buckets: list[tuple[int, int]]
    relation_buckets: list[list[int]]
    relation_means: list[np.ndarray]


def relation_tokens(info: RelationInfo) -> list[str]:
    """Whitespace tokens of name followed by description, capped at 128."""
    toks = info.name.split() + info.description.split()
    return toks[:MAX_RELATION_TOKENS]


class ToyEncoder:
    """Trainable hash-bucket encoder.

    Per-token hidden state is the bucket row E[hash(token) mod H]; an instance
    embedding takes the rows at the two span-start tokens, a relation embedding
    mean-pools its text and applies the learned affine map for the summary view.
    """

    trainable = True

    def __init__(self, params: ToyEncoderParams):
        self.params = params

    @property
    def dim(self) -> int:
        return self.params.dim

    def instance_buckets(self, x: TokenizedInstance) -> tuple[int, int]:
        h = self.params.n_buckets
        return (
            token_bucket(x.tokens[x.head_span[0]], h),
            token_bucket(x.tokens[x.tail_span[0]], h),
        )

    def embed_instance(self, x: TokenizedInstance) -> InstanceEmbedding:
        hb, tb = self.instance_buckets(x)
        # copies, not views: embeddings must stay valid across parameter updates
        return InstanceEmbedding(head_vec=self.params.E[hb].copy(),
                                 tail_vec=self.params.E[tb].copy())

    def relation_trace(self, info: RelationInfo) -> tuple[list[int], np.ndarray]:
        toks = relation_tokens(info)
        if not toks:
            raise ValueError(f"relation {info.relation_id!r} has no tokens to encode")
        buckets = [token_bucket(t, self.params.n_buckets) for t in toks]
        mean_view = self.params.E[buckets].mean(axis=0)
        return buckets, mean_view

    def embed_relation(self, info: RelationInfo) -> RelationEmbedding:
        _, mean_view = self.relation_trace(info)
        cls_view = self.params.W_c @ mean_view + self.params.b_c
        return RelationEmbedding(cls_view=cls_view, mean_view=mean_view)

    def backward(
        self,
        tape: EpisodeTape,
        grads: EpisodeGradients,
        out: ToyEncoderGrads,
        relation_grads: bool = True,
    ) -> None:
        """Accumulate parameter gradients for one episode into `out`.

        Accumulation order is fixed (support class/shot order, then queries,
        then relations) so batch reductions are bit-reproducible. With
        relation_grads=False the relation embeddings are treated as constants
        and only the instance paths contribute.
        """
        for i, shots in enumerate(tape.support_buckets):
            for k, (hb, tb) in enumerate(shots):
                out.E[hb] += grads.support_head[i, k]
                out.E[tb] += grads.support_tail[i, k]
        for m, (hb, tb) in enumerate(tape.query_buckets):
            out.E[hb] += grads.query_head[m]
            out.E[tb] += grads.query_tail[m]
        if not relation_grads:
            return
        for i, buckets in enumerate(tape.relation_buckets):
            g_cls = grads.rel_cls[i]
            g_mean = grads.rel_mean[i] + self.params.W_c.T @ g_cls
            out.W_c += np.outer(g_cls, tape.relation_means[i])
            out.b_c += g_cls
            per_token = g_mean / len(buckets)
            np.add.at(out.E, buckets, per_token)


class PrecomputedEncoder:
    """Pure lookup provider over an embedding store produced offline."""

    trainable = False

    def __init__(self, store: EmbeddingStore, expected_dim: int | None = None):
        if expected_dim is not None and store.dim != expected_dim:
            raise ValueError(
                f"store dimension {store.dim} does not match configured {expected_dim}"
            )
        self.store = store

    @property
    def dim(self) -> int:
        return self.store.dim

    def embed_instance(self, x: TokenizedInstance) -> InstanceEmbedding:
        key = instance_key(x.relation_id, x.instance_index)
        try:
            return self.store.instances[key]
        except KeyError:
            raise KeyError(f"embedding store has no instance {key!r}") from None

    def embed_relation(self, info: RelationInfo) -> RelationEmbedding:
        try:
            return self.store.relations[info.relation_id]
        except KeyError:
            raise KeyError(f"embedding store has no relation {info.relation_id!r}") from None
