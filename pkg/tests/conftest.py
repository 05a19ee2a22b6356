"""Shared test helpers: finite-difference oracle and episode builders."""

import numpy as np
import pytest

from relproto.types import Episode, InstanceEmbedding, RelationEmbedding


def central_diff(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of the scalar f() over every entry of x.

    x is perturbed in place and restored; f must recompute from x on each call.
    Independent of any analytic gradient code.
    """
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_err(analytic: np.ndarray, estimate: np.ndarray) -> float:
    """max |analytic - estimate| / max(1, |estimate|), elementwise."""
    analytic = np.asarray(analytic)
    estimate = np.asarray(estimate)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - estimate) / np.maximum(1.0, np.abs(estimate))))


def random_episode(rng: np.random.Generator, n=3, k=2, q=2, d=6) -> Episode:
    """Episode with standard-normal embeddings and round-robin query labels."""
    support = tuple(
        tuple(
            InstanceEmbedding(head_vec=rng.normal(size=d), tail_vec=rng.normal(size=d))
            for _ in range(k)
        )
        for _ in range(n)
    )
    query = tuple(
        (InstanceEmbedding(head_vec=rng.normal(size=d), tail_vec=rng.normal(size=d)), m % n)
        for m in range(q * n)
    )
    rels = tuple(
        RelationEmbedding(cls_view=rng.normal(size=d), mean_view=rng.normal(size=d))
        for _ in range(n)
    )
    return Episode(
        class_ids=tuple(f"R{i:03d}" for i in range(n)),
        support=support,
        query=query,
        relation_embs=rels,
    )


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
