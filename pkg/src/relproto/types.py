"""Core value types shared by every module.

All real arithmetic is float64. Vectors are validated for finiteness when a
value object is constructed, not inside arithmetic ops. Every type here is
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# 1-D float64 arrays. A Prototype has length 2d, score/prob vectors length N.
Vector = np.ndarray
Prototype = np.ndarray
ScoreVector = np.ndarray
ProbVector = np.ndarray
# Row-stack of N prototypes after fusion, shape (N, 2d).
FusedPrototypeSet = np.ndarray


def as_vector(x, name: str = "vector") -> Vector:
    """Coerce to a finite 1-D float64 array, raising ValueError otherwise."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class TokenizedInstance:
    """A sentence with head/tail entity spans and its relation label.

    Spans are half-open token index ranges. Overlapping head/tail spans are
    legal (ingestion warns about them but does not reject).
    """

    tokens: tuple[str, ...]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    relation_id: str
    instance_index: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("tokens must be non-empty")
        for label, (start, end) in (("head", self.head_span), ("tail", self.tail_span)):
            if not (0 <= start < end <= len(self.tokens)):
                raise ValueError(
                    f"{label} span [{start},{end}) invalid for {len(self.tokens)} tokens"
                )


@dataclass(frozen=True)
class RelationInfo:
    """Textual name and description of a relation class."""

    relation_id: str
    name: str
    description: str = ""

    def __post_init__(self):
        if not self.relation_id:
            raise ValueError("relation_id must be non-empty")
        if not self.name:
            raise ValueError(f"relation {self.relation_id!r}: name must be non-empty")


@dataclass(frozen=True)
class InstanceEmbedding:
    """Entity-start vectors of one sentence: head and tail, each length d."""

    head_vec: Vector
    tail_vec: Vector

    def __post_init__(self):
        object.__setattr__(self, "head_vec", as_vector(self.head_vec, "head_vec"))
        object.__setattr__(self, "tail_vec", as_vector(self.tail_vec, "tail_vec"))
        if self.head_vec.shape != self.tail_vec.shape:
            raise ValueError("head_vec and tail_vec must have equal length")

    @property
    def dim(self) -> int:
        return self.head_vec.shape[0]


@dataclass(frozen=True)
class RelationEmbedding:
    """Two views of a relation's text: sequence summary and token mean."""

    cls_view: Vector
    mean_view: Vector

    def __post_init__(self):
        object.__setattr__(self, "cls_view", as_vector(self.cls_view, "cls_view"))
        object.__setattr__(self, "mean_view", as_vector(self.mean_view, "mean_view"))
        if self.cls_view.shape != self.mean_view.shape:
            raise ValueError("cls_view and mean_view must have equal length")

    @property
    def dim(self) -> int:
        return self.cls_view.shape[0]


def combined(e: InstanceEmbedding) -> Vector:
    """Sentence representation: head vector followed by tail vector (length 2d)."""
    return np.concatenate([e.head_vec, e.tail_vec])


def fused(r: RelationEmbedding) -> Vector:
    """Relation representation: cls view followed by mean view (length 2d)."""
    return np.concatenate([r.cls_view, r.mean_view])


@dataclass(frozen=True)
class Episode:
    """One N-way K-shot task: support, labelled queries, relation embeddings.

    Labels index into class_ids. Support/query disjointness is enforced where
    episodes are sampled (EpisodeSpec); embeddings carry no instance identity.
    """

    class_ids: tuple[str, ...]
    support: tuple[tuple[InstanceEmbedding, ...], ...]  # N classes x K shots
    query: tuple[tuple[InstanceEmbedding, int], ...]
    relation_embs: tuple[RelationEmbedding, ...]

    def __post_init__(self):
        object.__setattr__(self, "class_ids", tuple(self.class_ids))
        object.__setattr__(self, "support", tuple(tuple(s) for s in self.support))
        object.__setattr__(self, "query", tuple(tuple(q) for q in self.query))
        object.__setattr__(self, "relation_embs", tuple(self.relation_embs))
        n = len(self.class_ids)
        if n == 0:
            raise ValueError("episode needs at least one class")
        if len(set(self.class_ids)) != n:
            raise ValueError("class_ids must be distinct")
        if len(self.support) != n or len(self.relation_embs) != n:
            raise ValueError("support and relation_embs must have one entry per class")
        k = len(self.support[0])
        if k == 0 or any(len(s) != k for s in self.support):
            raise ValueError("every class needs the same nonzero number of supports")
        for _, label in self.query:
            if not (0 <= label < n):
                raise ValueError(f"query label {label} out of range for N={n}")

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    @property
    def k_shot(self) -> int:
        return len(self.support[0])

    @property
    def dim(self) -> int:
        return self.support[0][0].dim


@dataclass(frozen=True)
class NoFusion:
    """Prototype-only variant; relation embeddings are ignored."""

    label = "w/o relation info."

    def parameters(self) -> dict[str, np.ndarray]:
        return {}


@dataclass(frozen=True)
class DirectAdd:
    """Final prototype = prototype + concatenated relation views."""

    label = "ours"

    def parameters(self) -> dict[str, np.ndarray]:
        return {}


@dataclass(frozen=True)
class ConcatProject:
    """Concatenate relation representation with prototype, project 4d -> 2d."""

    W: np.ndarray  # (2d, 4d)
    b: np.ndarray  # (2d,)
    label = "w/ concat"

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        b = as_vector(self.b, "b")
        if W.ndim != 2 or W.shape[1] != 2 * W.shape[0] or W.shape[0] != b.shape[0]:
            raise ValueError(f"need W of shape (2d, 4d) and matching b, got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("W contains non-finite entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    def parameters(self) -> dict[str, np.ndarray]:
        return {"fusion.W": self.W, "fusion.b": self.b}


@dataclass(frozen=True)
class ViewLinear:
    """Project a single relation view d -> 2d and add to the prototype.

    view selects which relation view feeds the projection: 1 for the sequence
    summary (cls), 2 for the token mean.
    """

    view: int
    W: np.ndarray  # (2d, d)
    b: np.ndarray  # (2d,)

    def __post_init__(self):
        if self.view not in (1, 2):
            raise ValueError("view must be 1 or 2")
        W = np.asarray(self.W, dtype=np.float64)
        b = as_vector(self.b, "b")
        if W.ndim != 2 or W.shape[0] != 2 * W.shape[1] or W.shape[0] != b.shape[0]:
            raise ValueError(f"need W of shape (2d, d) and matching b, got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("W contains non-finite entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def label(self) -> str:
        return f"w/ linear layer view#{self.view}"

    def parameters(self) -> dict[str, np.ndarray]:
        return {"fusion.W": self.W, "fusion.b": self.b}


FusionStrategy = Union[NoFusion, DirectAdd, ConcatProject, ViewLinear]

# Fusion strategy ids as they appear in configs, in ablation-table row order.
FUSION_IDS = ("direct_add", "none", "concat_project", "view_linear_1", "view_linear_2")


def init_fusion(kind: str, d: int, seed: int) -> FusionStrategy:
    """Build a fusion strategy for representation size d.

    Matrices are drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)] by a
    seeded generator; biases start at zero.
    """
    if kind == "none":
        return NoFusion()
    if kind == "direct_add":
        return DirectAdd()
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind == "concat_project":
        fan_in = 4 * d
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(2 * d, 4 * d))
        return ConcatProject(W=W, b=np.zeros(2 * d))
    if kind in ("view_linear_1", "view_linear_2"):
        bound = 1.0 / np.sqrt(d)
        W = rng.uniform(-bound, bound, size=(2 * d, d))
        return ViewLinear(view=int(kind[-1]), W=W, b=np.zeros(2 * d))
    raise ValueError(f"unknown fusion strategy {kind!r} (expected one of {FUSION_IDS})")


def fusion_id(s: FusionStrategy) -> str:
    if isinstance(s, NoFusion):
        return "none"
    if isinstance(s, DirectAdd):
        return "direct_add"
    if isinstance(s, ConcatProject):
        return "concat_project"
    if isinstance(s, ViewLinear):
        return f"view_linear_{s.view}"
    raise TypeError(f"not a fusion strategy: {s!r}")
