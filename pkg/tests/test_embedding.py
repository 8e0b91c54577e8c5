import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import path_graph, random_graph
from hetprompt.embedding import (
    PromptPair,
    aggregate_views,
    class_prototypes,
    classify,
    cosine_matrix,
    cosine_sim,
    embed_instance,
    pool_matrices,
    prompted_embeddings,
    readout,
    view_means,
)
from hetprompt.encoder import encode_all, init_params
from hetprompt.graph import make_graph
from hetprompt.template import context_members, graph_template

finite = st.floats(-10, 10, allow_nan=False)


def test_readout_identity_prompt_single_node():
    h = np.array([[1.5, -2.0, 0.25]])
    np.testing.assert_array_equal(readout(h, np.ones(3)), h[0])


def test_readout_zero_prompt():
    assert not readout(np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros(2)).any()


def test_readout_hand_computed():
    np.testing.assert_allclose(readout(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([2.0, 0.0])), [4.0, 0.0])


def test_readout_empty_and_mismatch():
    assert readout(np.zeros((0, 3))).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        readout(np.ones((2, 3)), np.ones(2))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=finite), st.permutations(range(5)))
def test_readout_permutation_invariant(h, perm):
    np.testing.assert_allclose(readout(h[list(perm)]), readout(h), atol=1e-12)


def test_aggregate_views_examples():
    r = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    np.testing.assert_array_equal(aggregate_views(r, np.zeros(2)), [1.0, 1.0])
    np.testing.assert_array_equal(aggregate_views(r, np.array([1.0, -1.0])), [2.0, 0.0])
    with pytest.raises(ValueError):
        aggregate_views(r, np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, 3, elements=finite),
       st.integers(0, 2), finite)
def test_aggregate_views_linear(r, p_het, i, scale):
    bumped = r.copy()
    bumped[i] *= scale
    lhs = aggregate_views(bumped, p_het) - aggregate_views(r, p_het)
    np.testing.assert_allclose(lhs, (1 + p_het[i]) * (scale - 1) * r[i], atol=1e-9)


def test_cosine_examples():
    x = np.array([3.0, -4.0])
    assert cosine_sim(x, x) == pytest.approx(1.0)
    assert cosine_sim([1, 0], [0, 1]) == 0.0
    assert cosine_sim([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    assert cosine_sim([0, 0], [1, 1]) == 0.0


def test_cosine_matrix_agrees_with_scalar(rng):
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    a[1] = 0.0
    expected = np.array([[cosine_sim(x, y) for y in b] for x in a])
    np.testing.assert_allclose(cosine_matrix(a, b), expected, atol=1e-12)


def test_prototypes():
    protos = class_prototypes(np.array([[0.0, 2.0], [2.0, 0.0], [5.0, 5.0]]), [1, 1, 0])
    assert protos.classes.tolist() == [0, 1]
    np.testing.assert_array_equal(protos.vectors, [[5.0, 5.0], [1.0, 1.0]])
    single = class_prototypes(np.array([[1.0, 2.0]]), [4])
    np.testing.assert_array_equal(single.vectors[0], [1.0, 2.0])


def test_classify_examples():
    protos = class_prototypes(np.array([[1.0, 0.1], [0.0, 1.0]]), [0, 1])
    # cos([1,0],[1,0.1]) = 0.995 > cos([1,0],[0,1]) = 0
    assert classify(np.array([1.0, 0.0]), protos) == 0
    ortho = class_prototypes(np.eye(3), [0, 1, 2])
    assert classify(np.array([0.0, 2.0, 0.0]), ortho) == 1
    same = class_prototypes(np.ones((3, 2)), [0, 1, 2])
    assert classify(np.array([1.0, -3.0]), same) == 0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=finite), st.floats(1e-3, 1e3))
def test_classify_scale_invariant(q, lam):
    protos = class_prototypes(np.random.default_rng(0).standard_normal((3, 4)), [0, 1, 2])
    assert classify(lam * q, protos) == classify(q, protos)


def _encoded(rng, n=12, num_types=3):
    g = random_graph(rng, n=n, num_types=num_types, d=4)
    views = graph_template(g)
    return g, views, encode_all(views, g, init_params(4, 6, 2, 0))


def test_identity_prompts_equal_unprompted(rng):
    g, views, outs = _encoded(rng)
    ident = PromptPair.identity(6, len(views))
    for members in context_members(g, 1):
        np.testing.assert_allclose(embed_instance(members, views, outs, ident),
                                   embed_instance(members, views, outs), atol=1e-12)


def test_single_node_homogeneous_instance():
    g = make_graph([0], np.zeros((0, 3)), [[1.0, 2.0]])
    views = graph_template(g)
    outs = encode_all(views, g, init_params(2, 3, 2, 0))
    p = PromptPair(np.array([1.0, 2.0, 3.0]), np.zeros(2))
    np.testing.assert_allclose(embed_instance([0], views, outs, p, templated=False), p.p_feat * outs[0][0])


def test_homogeneous_templated_is_twice_direct_readout():
    g = path_graph(6, d=2)
    g = make_graph(g.node_type, g.edges, np.random.default_rng(3).standard_normal((6, 2)))
    views = graph_template(g)
    outs = encode_all(views, g, init_params(2, 4, 2, 1))
    members = [1, 2, 3]
    np.testing.assert_allclose(embed_instance(members, views, outs),
                               2 * embed_instance(members, views, outs, templated=False), atol=1e-12)


def test_batched_path_matches_embed_instance(rng):
    g, views, outs = _encoded(rng)
    members = context_members(g, 1)
    means = view_means(pool_matrices(views, members), outs)
    prompts = PromptPair(rng.standard_normal(6), rng.standard_normal(len(views)))
    batched = prompted_embeddings(means, prompts)
    for i, m in enumerate(members):
        np.testing.assert_allclose(batched[i], embed_instance(m, views, outs, prompts), atol=1e-12)


def test_prompt_parameter_count():
    assert PromptPair.identity(64, 5).num_parameters == 69
    assert PromptPair.identity(64, 9).p_het.size == 9  # eight node types
