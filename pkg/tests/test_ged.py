import math

import numpy as np
import pytest

from graphmatch.ged import (EditCostScheme, GedBudgetError, astar_start_bound,
                            ged_bruteforce, ged_exact, normalized_similarity)
from graphmatch.graphs import make_graph

from conftest import random_graph


def triangle():
    return make_graph("tri", np.zeros((3, 1)), [(0, 1), (1, 2), (0, 2)])


def path3():
    return make_graph("p3", np.zeros((3, 1)), [(0, 1), (1, 2)])


def test_self_distance_zero():
    g = triangle()
    res = ged_exact(g, g)
    assert res.distance == 0.0
    assert res.normalized_similarity == 1.0


def test_triangle_vs_path():
    res = ged_exact(triangle(), path3())
    assert res.distance == 1.0
    assert abs(res.normalized_similarity - math.exp(-1.0 / 3.0)) < 1e-12


def test_node_and_edge_insertion():
    g1 = make_graph("a", np.zeros((1, 1)), [])
    g2 = make_graph("b", np.zeros((2, 1)), [(0, 1)])
    assert ged_exact(g1, g2).distance == 2.0


def test_label_substitution():
    g1 = make_graph("a", np.zeros((1, 1)), [], labels=[0])
    g2 = make_graph("b", np.zeros((1, 1)), [], labels=[1])
    assert ged_exact(g1, g2).distance == 1.0
    assert ged_bruteforce(g1, g2).distance == 1.0


def test_bruteforce_agrees_on_fixtures():
    for a, b in [(triangle(), path3()),
                 (make_graph("a", np.zeros((1, 1)), []),
                  make_graph("b", np.zeros((2, 1)), [(0, 1)]))]:
        assert ged_exact(a, b).distance == ged_bruteforce(a, b).distance


def test_symmetry_on_random_pairs(rng):
    for i in range(50):
        g1 = random_graph(rng, n_min=1, n_max=4, gid=f"a{i}")
        g2 = random_graph(rng, n_min=1, n_max=4, gid=f"b{i}")
        assert ged_bruteforce(g1, g2).distance == ged_bruteforce(g2, g1).distance


def test_oracle_equivalence_small(rng):
    for i in range(60):
        labeled = i % 2 == 0
        g1 = random_graph(rng, n_min=1, n_max=4, labeled=labeled, gid=f"a{i}")
        g2 = random_graph(rng, n_min=1, n_max=4, labeled=labeled, gid=f"b{i}")
        assert ged_exact(g1, g2).distance == ged_bruteforce(g1, g2).distance


def test_triangle_inequality(rng):
    for i in range(30):
        gs = [random_graph(rng, n_min=1, n_max=4, gid=f"g{i}{j}") for j in range(3)]
        dab = ged_bruteforce(gs[0], gs[1]).distance
        dbc = ged_bruteforce(gs[1], gs[2]).distance
        dac = ged_bruteforce(gs[0], gs[2]).distance
        assert dac <= dab + dbc + 1e-9


def test_isomorphic_permutation_zero(rng):
    g = random_graph(rng, n_min=3, n_max=4)
    n = g.num_nodes
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    pg = make_graph("p", np.asarray(g.features)[perm],
                    [(int(inv[u]), int(inv[v])) for u, v in g.edges],
                    None if g.labels is None else [g.labels[int(p)] for p in perm])
    assert ged_exact(g, pg).distance == 0.0


def test_heuristic_admissible_at_start(rng):
    for i in range(40):
        g1 = random_graph(rng, n_min=1, n_max=4, gid=f"a{i}")
        g2 = random_graph(rng, n_min=1, n_max=4, gid=f"b{i}")
        assert astar_start_bound(g1, g2) <= ged_bruteforce(g1, g2).distance + 1e-9


def test_budget_refusal():
    g = make_graph("a", np.zeros((6, 1)), [])
    with pytest.raises(GedBudgetError):
        ged_exact(g, g, node_budget=5)
    with pytest.raises(GedBudgetError):
        ged_bruteforce(g, g)


def test_normalized_similarity_values():
    assert normalized_similarity(0.0, 3, 3) == 1.0
    assert abs(normalized_similarity(2.0, 3, 3) - math.exp(-2.0 / 3.0)) < 1e-12
    big = normalized_similarity(1000.0, 5, 5)
    assert 0.0 < big < 1e-10


def test_normalized_similarity_rejects_bad_input():
    with pytest.raises(ValueError):
        normalized_similarity(-1.0, 3, 3)


def test_substitution_free_for_equal_labels():
    costs = EditCostScheme()
    assert costs.substitution("a", "a") == 0.0
    assert costs.substitution("a", "b") == 1.0
