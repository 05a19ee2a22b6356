"""Prototype/fusion math: forward scoring, loss, and exact gradients.

Every function here is pure over immutable inputs. The backward pass is
hand-derived; tests check it against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .types import (
    ConcatProject,
    DirectAdd,
    Episode,
    FusedPrototypeSet,
    FusionStrategy,
    InstanceEmbedding,
    NoFusion,
    ProbVector,
    Prototype,
    RelationEmbedding,
    ScoreVector,
    ViewLinear,
    combined,
    fused,
)

PROB_FLOOR = 1e-12  # clamp before log; far below any test tolerance


def compute_prototypes(support: Sequence[Sequence[InstanceEmbedding]]) -> np.ndarray:
    """Mean of combined support representations per class, shape (N, 2d)."""
    if len(support) == 0 or any(len(shots) == 0 for shots in support):
        raise ValueError("every class needs at least one support instance")
    return np.stack(
        [np.mean([combined(e) for e in shots], axis=0) for shots in support]
    )


def fuse(
    protos: np.ndarray | Sequence[Prototype],
    rels: Sequence[RelationEmbedding],
    strategy: FusionStrategy,
) -> FusedPrototypeSet:
    """Combine prototypes with relation representations, shape (N, 2d)."""
    P = np.asarray(protos, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError(f"prototypes must stack to (N, 2d), got {P.shape}")
    if len(rels) != P.shape[0]:
        raise ValueError(f"{P.shape[0]} prototypes but {len(rels)} relation embeddings")
    R = np.stack([fused(r) for r in rels])
    if R.shape != P.shape:
        raise ValueError(f"relation representation shape {R.shape} != prototype {P.shape}")
    return _fuse_arrays(P, R, np.stack([r.cls_view for r in rels]),
                        np.stack([r.mean_view for r in rels]), strategy)


def _fuse_arrays(P, R_final, R_cls, R_mean, strategy: FusionStrategy) -> np.ndarray:
    if isinstance(strategy, NoFusion):
        return P.copy()
    if isinstance(strategy, DirectAdd):
        return P + R_final
    if isinstance(strategy, ConcatProject):
        if strategy.W.shape != (P.shape[1], 2 * P.shape[1]):
            raise ValueError(
                f"concat projection {strategy.W.shape} incompatible with 2d={P.shape[1]}"
            )
        U = np.concatenate([R_final, P], axis=1)  # relation first, then prototype
        return U @ strategy.W.T + strategy.b
    if isinstance(strategy, ViewLinear):
        V = R_cls if strategy.view == 1 else R_mean
        if strategy.W.shape != (P.shape[1], V.shape[1]):
            raise ValueError(
                f"view projection {strategy.W.shape} incompatible with d={V.shape[1]}"
            )
        return P + V @ strategy.W.T + strategy.b
    raise TypeError(f"unknown fusion strategy {strategy!r}")


def score(q: InstanceEmbedding, fp: FusedPrototypeSet) -> ScoreVector:
    """Dot-product similarity of one query against each fused prototype."""
    qc = combined(q)
    fp = np.asarray(fp, dtype=np.float64)
    if fp.ndim != 2 or fp.shape[1] != qc.shape[0]:
        raise ValueError(f"prototype set {fp.shape} incompatible with query dim {qc.shape[0]}")
    return fp @ qc


def softmax(scores: ScoreVector) -> ProbVector:
    """Numerically stable softmax (max-shifted)."""
    s = np.asarray(scores, dtype=np.float64)
    shifted = s - np.max(s)
    e = np.exp(shifted)
    return e / e.sum()


def ce_loss(probs: ProbVector, y: int) -> float:
    """Cross entropy -log(p_y), with p_y clamped at PROB_FLOOR."""
    return float(-np.log(max(float(probs[y]), PROB_FLOOR)))


def predict(scores: ScoreVector) -> int:
    """Highest score wins (dot product as similarity); ties go to the lowest index."""
    if len(scores) == 0:
        raise ValueError("cannot predict from an empty score vector")
    return int(np.argmax(scores))


@dataclass
class EpisodeGradients:
    """Gradients of the mean query loss; shapes mirror the primal values."""

    support_head: np.ndarray  # (N, K, d)
    support_tail: np.ndarray  # (N, K, d)
    query_head: np.ndarray  # (M, d)
    query_tail: np.ndarray  # (M, d)
    rel_cls: np.ndarray  # (N, d)
    rel_mean: np.ndarray  # (N, d)
    fusion_W: np.ndarray | None = None
    fusion_b: np.ndarray | None = None


def episode_arrays(ep: Episode):
    """Stack an episode into arrays: support (N,K,2d), queries (M,2d), labels,
    relation views (N,d) each."""
    sup = np.stack([[combined(e) for e in shots] for shots in ep.support])
    if ep.query:
        qc = np.stack([combined(q) for q, _ in ep.query])
        labels = np.array([y for _, y in ep.query], dtype=np.int64)
    else:
        qc = np.zeros((0, sup.shape[2]))
        labels = np.zeros(0, dtype=np.int64)
    r_cls = np.stack([r.cls_view for r in ep.relation_embs])
    r_mean = np.stack([r.mean_view for r in ep.relation_embs])
    return sup, qc, labels, r_cls, r_mean


def episode_scores(ep: Episode, strategy: FusionStrategy) -> tuple[np.ndarray, np.ndarray]:
    """Forward-only pass: (M, N) score matrix and the M query labels."""
    sup, qc, labels, r_cls, r_mean = episode_arrays(ep)
    P = sup.mean(axis=1)
    fp = _fuse_arrays(P, np.concatenate([r_cls, r_mean], axis=1), r_cls, r_mean, strategy)
    return qc @ fp.T, labels


def episode_loss(ep: Episode, strategy: FusionStrategy) -> float:
    """Mean cross entropy over the episode's queries."""
    scores, labels = episode_scores(ep, strategy)
    if scores.shape[0] == 0:
        raise ValueError("episode has no queries")
    losses = [ce_loss(softmax(s), int(y)) for s, y in zip(scores, labels)]
    return float(np.mean(losses))


def episode_loss_and_grads(
    ep: Episode, strategy: FusionStrategy
) -> tuple[float, EpisodeGradients]:
    """Mean query loss plus exact gradients w.r.t. every episode input.

    Chain, per query: dL/ds_j = (p_j - 1[j=y]) / M; scores are bilinear in the
    query and the fused prototypes; fusion backward routes into prototypes,
    relation views, and projection parameters; the prototype mean hands 1/K of
    its gradient to each support instance.
    """
    sup, qc, labels, r_cls, r_mean = episode_arrays(ep)
    n, k, two_d = sup.shape
    m = qc.shape[0]
    if m == 0:
        raise ValueError("episode has no queries")
    d = two_d // 2

    P = sup.mean(axis=1)
    R_final = np.concatenate([r_cls, r_mean], axis=1)
    fp = _fuse_arrays(P, R_final, r_cls, r_mean, strategy)

    loss = 0.0
    g_fp = np.zeros_like(fp)
    g_query = np.zeros_like(qc)
    for qi in range(m):
        s = fp @ qc[qi]
        p = softmax(s)
        loss += ce_loss(p, int(labels[qi]))
        ds = p.copy()
        ds[labels[qi]] -= 1.0
        ds /= m
        g_query[qi] = fp.T @ ds
        g_fp += np.outer(ds, qc[qi])
    loss /= m

    g_W = g_b = None
    g_rel_final = np.zeros_like(R_final)
    g_rel_cls = np.zeros_like(r_cls)
    g_rel_mean = np.zeros_like(r_mean)
    if isinstance(strategy, NoFusion):
        g_P = g_fp
    elif isinstance(strategy, DirectAdd):
        g_P = g_fp
        g_rel_final = g_fp
    elif isinstance(strategy, ConcatProject):
        U = np.concatenate([R_final, P], axis=1)
        g_U = g_fp @ strategy.W
        g_rel_final = g_U[:, :two_d]
        g_P = g_U[:, two_d:]
        g_W = g_fp.T @ U
        g_b = g_fp.sum(axis=0)
    elif isinstance(strategy, ViewLinear):
        V = r_cls if strategy.view == 1 else r_mean
        g_P = g_fp
        g_V = g_fp @ strategy.W
        g_W = g_fp.T @ V
        g_b = g_fp.sum(axis=0)
        if strategy.view == 1:
            g_rel_cls = g_V.copy()
        else:
            g_rel_mean = g_V.copy()
    else:
        raise TypeError(f"unknown fusion strategy {strategy!r}")

    g_rel_cls = g_rel_cls + g_rel_final[:, :d]
    g_rel_mean = g_rel_mean + g_rel_final[:, d:]

    g_support = np.repeat(g_P[:, None, :] / k, k, axis=1)  # (N, K, 2d)

    grads = EpisodeGradients(
        support_head=g_support[:, :, :d],
        support_tail=g_support[:, :, d:],
        query_head=g_query[:, :d],
        query_tail=g_query[:, d:],
        rel_cls=g_rel_cls,
        rel_mean=g_rel_mean,
        fusion_W=g_W,
        fusion_b=g_b,
    )
    return loss, grads
