import logging

import numpy as np
import pytest

from graphmatch.graphs import (GraphError, adjacency_matrix, make_graph,
                               normalized_adjacency, validate)

from conftest import random_graph


def test_single_node_adjacency():
    g = make_graph("a", [[1.0]], [])
    assert np.array_equal(normalized_adjacency(g), [[1.0]])


def test_two_node_one_edge():
    g = make_graph("a", np.zeros((2, 1)), [(0, 1)])
    assert np.allclose(normalized_adjacency(g), [[0.5, 0.5], [0.5, 0.5]])


def test_path_graph_off_diagonal():
    g = make_graph("a", np.zeros((3, 1)), [(0, 1), (1, 2)])
    ab = normalized_adjacency(g)
    assert abs(ab[0, 1] - 1.0 / np.sqrt(6.0)) < 1e-12
    assert abs(ab[1, 1] - 1.0 / 3.0) < 1e-12


def test_isolated_node_diagonal_is_one():
    g = make_graph("a", np.zeros((3, 1)), [(0, 1)])
    assert normalized_adjacency(g)[2, 2] == 1.0


def test_diagonal_is_inverse_degree_plus_one():
    g = make_graph("a", np.zeros((4, 1)), [(0, 1), (0, 2), (0, 3)])
    ab = normalized_adjacency(g)
    assert abs(ab[0, 0] - 0.25) < 1e-12


def test_exact_symmetry(rng):
    for i in range(20):
        g = random_graph(rng, n_min=2, n_max=8, gid=f"g{i}")
        ab = normalized_adjacency(g)
        assert np.array_equal(ab, ab.T)


def test_permutation_equivariance(rng):
    g = random_graph(rng, n_min=4, n_max=6)
    n = g.num_nodes
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    pg = make_graph("p", np.asarray(g.features)[perm],
                    [(int(inv[u]), int(inv[v])) for u, v in g.edges])
    a, pa = normalized_adjacency(g), normalized_adjacency(pg)
    # row i of the permuted graph corresponds to node perm[i] of the original
    assert np.allclose(pa, a[np.ix_(perm, perm)])


def test_valid_graph_passes():
    validate(make_graph("a", np.zeros((1, 6)), []))


def test_out_of_range_edge():
    with pytest.raises(GraphError):
        make_graph("a", np.zeros((3, 2)), [(0, 5)])


def test_self_loop_rejected():
    with pytest.raises(GraphError):
        make_graph("a", np.zeros((2, 1)), [(1, 1)])


def test_empty_features_rejected():
    with pytest.raises(GraphError):
        make_graph("a", np.zeros((0, 3)), [])


def test_duplicate_edges_deduplicated(caplog):
    with caplog.at_level(logging.WARNING):
        g = make_graph("a", np.zeros((2, 1)), [(0, 1), (1, 0)])
    assert g.edges == ((0, 1),)
    assert any("duplicate" in r.message for r in caplog.records)


def test_label_length_checked():
    with pytest.raises(GraphError):
        make_graph("a", np.zeros((3, 1)), [], labels=[1, 2])


def test_adjacency_matrix_symmetric():
    g = make_graph("a", np.zeros((3, 1)), [(0, 2)])
    a = adjacency_matrix(g)
    assert a[0, 2] == a[2, 0] == 1.0
    assert a.sum() == 2.0
