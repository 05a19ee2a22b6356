import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, max_rel_err, random_episode
from relproto.protonet import (
    ce_loss,
    compute_prototypes,
    episode_loss,
    episode_loss_and_grads,
    episode_scores,
    fuse,
    predict,
    score,
    softmax,
)
from relproto.types import (
    DirectAdd,
    Episode,
    InstanceEmbedding,
    NoFusion,
    RelationEmbedding,
    init_fusion,
)

ALL_FUSIONS = ["none", "direct_add", "concat_project", "view_linear_1", "view_linear_2"]


def _inst(head, tail):
    return InstanceEmbedding(head_vec=head, tail_vec=tail)


def _rel(cls, mean):
    return RelationEmbedding(cls_view=cls, mean_view=mean)


def test_prototype_of_single_support_is_its_combined():
    e = _inst([1.0, 2.0], [3.0, 4.0])
    np.testing.assert_array_equal(compute_prototypes([[e]])[0], [1, 2, 3, 4])


def test_prototype_is_arithmetic_mean():
    a = _inst([1.0, 1.0], [1.0, 1.0])
    b = _inst([3.0, 3.0], [3.0, 3.0])
    np.testing.assert_array_equal(compute_prototypes([[a, b]])[0], [2, 2, 2, 2])


def test_prototype_requires_support():
    with pytest.raises(ValueError):
        compute_prototypes([])
    with pytest.raises(ValueError):
        compute_prototypes([[]])


def test_fuse_direct_add_matches_sum():
    protos = np.array([[1.0, 0.0, 0.0, 0.0]])
    rels = [_rel([0.0, 1.0], [0.0, 0.0])]
    np.testing.assert_array_equal(fuse(protos, rels, DirectAdd()), [[1, 1, 0, 0]])


def test_fuse_zero_relations_equals_none(rng):
    ep = random_episode(rng, n=4, k=2, q=1, d=5)
    protos = compute_prototypes(ep.support)
    zero_rels = [_rel(np.zeros(5), np.zeros(5)) for _ in range(4)]
    np.testing.assert_array_equal(
        fuse(protos, zero_rels, DirectAdd()), fuse(protos, zero_rels, NoFusion())
    )


def test_fuse_zero_projection_gives_zeros():
    strategy = init_fusion("concat_project", 2, seed=0)
    strategy.W[...] = 0.0
    protos = np.ones((3, 4))
    rels = [_rel([1.0, 1.0], [1.0, 1.0])] * 3
    np.testing.assert_array_equal(fuse(protos, rels, strategy), np.zeros((3, 4)))


def test_fuse_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        fuse(np.ones((2, 4)), [_rel([1.0], [1.0])] * 2, DirectAdd())
    strategy = init_fusion("concat_project", 3, seed=0)
    with pytest.raises(ValueError):
        fuse(np.ones((2, 4)), [_rel([1.0, 1.0], [1.0, 1.0])] * 2, strategy)


def test_score_dot_products():
    q = _inst([1.0], [0.0])
    fp = np.array([[2.0, 0.0], [0.0, 3.0]])
    np.testing.assert_array_equal(score(q, fp), [2.0, 0.0])


def test_score_zero_query():
    q = _inst([0.0, 0.0], [0.0, 0.0])
    np.testing.assert_array_equal(score(q, np.ones((3, 4))), [0.0, 0.0, 0.0])


def test_score_dim_mismatch():
    with pytest.raises(ValueError):
        score(_inst([1.0], [1.0]), np.ones((2, 4)))


@given(st.floats(min_value=1e-3, max_value=1e3), st.integers(min_value=0, max_value=2**32))
def test_scaling_query_preserves_argmax(alpha, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    fp = rng.normal(size=(4, 6))
    head, tail = rng.normal(size=3), rng.normal(size=3)
    s1 = score(_inst(head, tail), fp)
    s2 = score(_inst(alpha * head, alpha * tail), fp)
    np.testing.assert_allclose(s2, alpha * s1, rtol=1e-9, atol=1e-12)
    assert predict(s1) == predict(s2)


def test_softmax_symmetry():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(softmax([1.0] * 5), [0.2] * 5, atol=1e-15)


def test_softmax_analytic_value():
    np.testing.assert_allclose(softmax([math.log(2.0), 0.0]), [2 / 3, 1 / 3], atol=1e-12)


@given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=12))
def test_softmax_sums_to_one(scores):
    p = softmax(scores)
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all(p >= 0.0)


def test_ce_loss_values():
    assert abs(ce_loss(np.full(5, 0.2), 3) - math.log(5.0)) < 1e-9
    assert ce_loss(np.array([0.0, 1.0]), 1) == 0.0
    assert abs(ce_loss(np.array([0.25, 0.75]), 0) - math.log(4.0)) < 1e-12


def test_ce_loss_clamps_zero_probability():
    assert ce_loss(np.array([0.0, 1.0]), 0) == pytest.approx(-math.log(1e-12))


def test_predict_tie_breaks_low_index():
    assert predict(np.array([2.0, 0.0])) == 0
    assert predict(np.array([1.0, 1.0])) == 0
    assert predict(np.array([0.0, 0.0, 5.0])) == 2


def test_softmax_ce_gradient_equal_scores():
    # two orthogonal one-shot prototypes and a query seeing both equally:
    # scores tie, so dL/dscores = [-1/2, +1/2] for label 0, which lands
    # directly on the support and query gradients under NoFusion.
    ep = Episode(
        class_ids=("A", "B"),
        support=(( _inst([1.0], [0.0]),), (_inst([0.0], [1.0]),)),
        query=((_inst([1.0], [1.0]), 0),),
        relation_embs=(_rel([0.0], [0.0]), _rel([0.0], [0.0])),
    )
    loss, grads = episode_loss_and_grads(ep, NoFusion())
    assert loss == pytest.approx(math.log(2.0))
    np.testing.assert_allclose(grads.query_head[0], [-0.5])
    np.testing.assert_allclose(grads.query_tail[0], [0.5])
    np.testing.assert_allclose(grads.support_head[0, 0], [-0.5])
    np.testing.assert_allclose(grads.support_tail[0, 0], [-0.5])
    np.testing.assert_allclose(grads.support_head[1, 0], [0.5])


def test_none_strategy_zeroes_relation_grads(rng):
    ep = random_episode(rng)
    _, grads = episode_loss_and_grads(ep, NoFusion())
    assert not grads.rel_cls.any()
    assert not grads.rel_mean.any()
    assert grads.fusion_W is None


@pytest.mark.parametrize("kind", ALL_FUSIONS)
def test_episode_gradients_match_finite_differences(kind, rng):
    """Frozen oracle: central differences (h=1e-4) on the mean episode loss."""
    ep = random_episode(rng, n=3, k=2, q=2, d=6)
    strategy = init_fusion(kind, 6, seed=77)
    _, grads = episode_loss_and_grads(ep, strategy)

    def loss():
        return episode_loss(ep, strategy)

    checks = []
    for i, shots in enumerate(ep.support):
        for k, e in enumerate(shots):
            checks.append((grads.support_head[i, k], e.head_vec))
            checks.append((grads.support_tail[i, k], e.tail_vec))
    for m, (e, _) in enumerate(ep.query):
        checks.append((grads.query_head[m], e.head_vec))
        checks.append((grads.query_tail[m], e.tail_vec))
    for i, r in enumerate(ep.relation_embs):
        checks.append((grads.rel_cls[i], r.cls_view))
        checks.append((grads.rel_mean[i], r.mean_view))
    for pname, arr in strategy.parameters().items():
        analytic = grads.fusion_W if pname.endswith(".W") else grads.fusion_b
        checks.append((analytic, arr))
    for analytic, primal in checks:
        fd = central_diff(loss, primal)
        assert max_rel_err(analytic, fd) < 1e-5


def test_support_gradient_is_prototype_share(rng):
    # each of the K supports receives exactly 1/K of the prototype gradient
    ep = random_episode(rng, n=2, k=3, q=1, d=4)
    _, grads = episode_loss_and_grads(ep, DirectAdd())
    for i in range(2):
        for k in range(1, 3):
            np.testing.assert_allclose(grads.support_head[i, k], grads.support_head[i, 0])
            np.testing.assert_allclose(grads.support_tail[i, k], grads.support_tail[i, 0])


def test_direct_add_with_zero_relations_equals_none(rng):
    for _ in range(20):
        ep = random_episode(rng, n=3, k=2, q=2, d=5)
        zeroed = Episode(
            class_ids=ep.class_ids,
            support=ep.support,
            query=ep.query,
            relation_embs=tuple(_rel(np.zeros(5), np.zeros(5)) for _ in range(3)),
        )
        s_none, _ = episode_scores(zeroed, NoFusion())
        s_da, _ = episode_scores(zeroed, DirectAdd())
        np.testing.assert_array_equal(s_none, s_da)
        assert episode_loss(zeroed, NoFusion()) == episode_loss(zeroed, DirectAdd())


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=2**32))
def test_loss_is_permutation_equivariant(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    ep = random_episode(rng, n=4, k=2, q=2, d=3)
    perm = list(rng.permutation(4))
    inverse = {old: new for new, old in enumerate(perm)}
    permuted = Episode(
        class_ids=tuple(ep.class_ids[p] for p in perm),
        support=tuple(ep.support[p] for p in perm),
        query=tuple((e, inverse[y]) for e, y in ep.query),
        relation_embs=tuple(ep.relation_embs[p] for p in perm),
    )
    assert episode_loss(ep, DirectAdd()) == pytest.approx(
        episode_loss(permuted, DirectAdd()), abs=1e-12
    )


def test_episode_loss_requires_queries(rng):
    ep = random_episode(rng, n=2, k=1, q=1, d=3)
    empty = Episode(class_ids=ep.class_ids, support=ep.support, query=(),
                    relation_embs=ep.relation_embs)
    with pytest.raises(ValueError):
        episode_loss(empty, NoFusion())
    with pytest.raises(ValueError):
        episode_loss_and_grads(empty, NoFusion())
