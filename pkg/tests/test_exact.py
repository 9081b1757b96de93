import itertools
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given

from hoplp.exact import (
    CliqueTree,
    brute_force_hop_min_marginals,
    brute_force_map,
    build_junction_forest,
    induced_width,
    iter_assignments,
    junction_min,
    lp_relaxation_value,
    minplus_conv,
    treewidth_upper_bound,
)
from hoplp.generators import gen_avgcut_chain, gen_chain_exclusion, grid_edges, random_tree_edges
from hoplp.model import INF, CardinalityHop, EnergyModel, ModelError, evaluate_energy, zero_hop
from strategies import random_graph, random_model, random_tree_model, seeds


# -- enumeration oracles ---------------------------------------------------------


def test_iter_assignments_is_lexicographic():
    xs = np.concatenate(list(iter_assignments(3, chunk=3)))
    assert [tuple(x) for x in xs] == list(itertools.product([0, 1], repeat=3))


def test_map_of_exclusion_chain():
    x, e = brute_force_map(gen_chain_exclusion(4, 10.0, 0.1))
    assert list(x) == [1, 1, 1, 1]
    assert e == pytest.approx(0.4)


def test_map_of_avgcut_chain_is_uncut():
    # uncut assignments (energy 0) beat the middle split (energy c - lam (n/2)^2 = 0.6)
    m = gen_avgcut_chain(4, 1.0, 0.1)
    x, e = brute_force_map(m)
    assert e == 0.0
    assert list(x) == [0, 0, 0, 0]
    assert evaluate_energy(m, [0, 0, 1, 1]) == pytest.approx(0.6)


def test_map_single_variable():
    m = EnergyModel(1, [[0.0, -1.0]], [], np.zeros((0, 2, 2)))
    x, e = brute_force_map(m)
    assert list(x) == [1] and e == -1.0


def test_map_ties_go_to_smallest_assignment():
    m = EnergyModel(3, np.zeros((3, 2)), [], np.zeros((0, 2, 2)))
    x, _ = brute_force_map(m)
    assert list(x) == [0, 0, 0]


def test_map_guard():
    with pytest.raises(ModelError, match="25"):
        brute_force_map(EnergyModel(26, np.zeros((26, 2)), [], np.zeros((0, 2, 2))))


@given(seeds)
def test_map_energy_matches_its_assignment(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, int(rng.integers(1, 8)), forbid=True)
    x, e = brute_force_map(m)
    assert evaluate_energy(m, x) == pytest.approx(e, abs=1e-9)


def test_hop_min_marginals_oracle_examples():
    z = brute_force_hop_min_marginals(zero_hop(3), [(0, 1)], np.zeros((1, 2, 2)), [2], np.zeros((1, 2)), (0, 1))
    assert np.array_equal(z, np.zeros((2, 2)))
    avg = CardinalityHop([-c * (3 - c) for c in range(4)])
    mm = brute_force_hop_min_marginals(avg, [], np.zeros((0, 2, 2)), [0, 1, 2], np.zeros((3, 2)), 1)
    assert np.array_equal(mm, [-2.0, -2.0])  # frozen from enumerating the 8 assignments
    with pytest.raises(ModelError):
        brute_force_hop_min_marginals(avg, [(0, 1)], np.zeros((1, 2, 2)), [2], np.zeros((1, 2)), (1, 2))
    with pytest.raises(ModelError):
        brute_force_hop_min_marginals(avg, [(0, 1)], np.zeros((1, 2, 2)), [2], np.zeros((1, 2)), 0)


# -- tree-width --------------------------------------------------------------------


@lru_cache(maxsize=None)
def _exact_treewidth(n: int, edges: tuple) -> int:
    """Exact tree-width by dynamic programming over elimination prefixes."""
    adj = {v: set() for v in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)

    def q(eliminated: frozenset, v: int) -> int:
        # vertices outside eliminated+{v} reachable from v through eliminated vertices
        seen, stack, out = {v}, [v], set()
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in seen:
                    continue
                seen.add(w)
                if w in eliminated:
                    stack.append(w)
                else:
                    out.add(w)
        return len(out)

    @lru_cache(maxsize=None)
    def tw(s: frozenset) -> int:
        if not s:
            return -1
        return min(max(tw(s - {v}), q(s - {v}, v)) for v in s)

    return tw(frozenset(range(n)))


@given(seeds)
def test_trees_have_width_one(seed):
    rng = np.random.default_rng(seed)
    edges = random_tree_edges(int(rng.integers(2, 30)), rng)
    assert treewidth_upper_bound(edges).width == 1


def test_small_widths():
    assert treewidth_upper_bound([(0, 1), (1, 2), (0, 2)]).width == 2
    grid = grid_edges(3, 3)
    assert treewidth_upper_bound(grid).width == 3
    assert _exact_treewidth(9, tuple(grid)) == 3
    assert treewidth_upper_bound([]).width == 0


@given(seeds)
def test_min_fill_is_an_upper_bound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    edges = random_graph(rng, n, 0.5)
    bound = treewidth_upper_bound(edges, range(n))
    assert sorted(bound.order) == list(range(n))
    assert bound.width == induced_width(edges, bound.order)
    assert bound.width >= _exact_treewidth(n, tuple(edges))


def test_min_fill_ties_pick_lowest_vertex():
    assert treewidth_upper_bound([(0, 1), (1, 2), (2, 3)]).order[0] == 0


@pytest.mark.xfail(strict=True, reason="greedy min-fill is not monotone under edge addition")
def test_treewidth_bound_monotone_under_edge_addition():
    rng = np.random.default_rng(0)
    for _ in range(3000):
        n = int(rng.integers(4, 11))
        pool = [(i, j) for i in range(n) for j in range(i + 1, n)]
        rng.shuffle(pool)
        edges, width = [], 0
        for e in pool[:int(rng.integers(1, len(pool) + 1))]:
            edges.append(e)
            w = treewidth_upper_bound(edges).width
            assert w >= width, f"width fell from {width} to {w} after adding {e} to {edges[:-1]}"
            width = w


def test_induced_width_rejects_bad_orders():
    with pytest.raises(ModelError):
        induced_width([(0, 1)], [0, 0])


# -- junction forests ----------------------------------------------------------------


def test_chain_forest():
    jf = build_junction_forest([(0, 1), (1, 2)], treewidth_upper_bound([(0, 1), (1, 2)]))
    assert sorted(jf.cliques) == [(0, 1), (1, 2)]
    assert len(jf.tree_edges) == 1
    assert jf.separator(*jf.tree_edges[0]) == (1,)


def test_empty_forest():
    jf = build_junction_forest([], [])
    assert jf.cliques == () and jf.tree_edges == ()


def test_triangle_forest():
    tri = [(0, 1), (1, 2), (0, 2)]
    jf = build_junction_forest(tri, treewidth_upper_bound(tri))
    assert jf.running_intersection()
    assert all(set(e) <= set(jf.cliques[c]) for e, c in jf.edge_clique.items())


def test_forest_needs_covering_order():
    with pytest.raises(ModelError):
        build_junction_forest([(0, 1), (1, 2)], [0, 1])


@given(seeds)
def test_forest_invariants_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    edges = random_graph(rng, n, float(rng.uniform(0.1, 0.6)))
    jf = build_junction_forest(edges, treewidth_upper_bound(edges))
    assert jf.running_intersection()
    assert set(jf.edge_clique) == set(edges)
    for e, c in jf.edge_clique.items():
        assert set(e) <= set(jf.cliques[c])


# -- min-sum on clique trees -----------------------------------------------------------


def test_minplus_conv_small():
    assert list(minplus_conv(np.array([0.0, 1.0]), np.array([0.0, 2.0]))) == [0, 1, 3]
    b = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(minplus_conv(np.array([0.0]), b), b)
    assert minplus_conv(np.array([INF, 0.0]), np.array([INF, 0.0]))[0] == INF


@given(seeds)
def test_minplus_conv_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=int(rng.integers(1, 7)))
    b = rng.normal(size=int(rng.integers(1, 7)))
    ref = [min(a[k] + b[m - k] for k in range(len(a)) if 0 <= m - k < len(b))
           for m in range(len(a) + len(b) - 1)]
    np.testing.assert_allclose(minplus_conv(a, b), ref)
    np.testing.assert_allclose(minplus_conv(b, a), ref)
    c = rng.normal(size=3)
    np.testing.assert_allclose(minplus_conv(minplus_conv(a, b), c), minplus_conv(a, minplus_conv(b, c)))


def test_junction_min_single_clique():
    res = junction_min(CliqueTree([(0, 1)]), [np.array([[0.0, 5.0], [5.0, 0.0]])])
    assert res.value == 0.0
    assert list(res.argmin) == [0, 0]


def test_junction_min_chain_with_reward_on_last_vertex():
    edges = [(0, 1), (1, 2)]
    jf = build_junction_forest(edges, treewidth_upper_bound(edges))
    attract = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = junction_min(jf, [attract for _ in jf.cliques], unary={2: np.array([0.0, -1.0])})
    assert res.value == -1.0
    assert list(res.argmin) == [1, 1, 1]


def _junction_vs_brute(rng):
    n = int(rng.integers(1, 11))
    m = random_model(rng, n, random_graph(rng, n, float(rng.uniform(0.1, 0.5))), hop="none", forbid=True)
    order = treewidth_upper_bound(m.edges, range(n))
    jf = build_junction_forest(m.edges, order)
    pots = [np.zeros((2,) * len(c)) for c in jf.cliques]
    for e, (i, j) in enumerate(m.edges):
        c = jf.edge_clique[(i, j)]
        clique = jf.cliques[c]
        shape = [1] * len(clique)
        shape[clique.index(i)] = 2
        shape[clique.index(j)] = 2
        pots[c] = pots[c] + m.pairwise[e].reshape(shape)
    covered = {v for c in jf.cliques for v in c}
    tree = CliqueTree(jf.cliques, jf.tree_edges, sorted(set(range(n)) - covered))
    res = junction_min(tree, pots, unary={v: m.unary[v] for v in range(n)}, n=n)
    x, e = brute_force_map(m)
    assert res.value == pytest.approx(e, abs=1e-9) or (res.value >= INF and e >= INF)
    if e < INF:
        assert list(res.argmin) == list(x)
        xs = np.concatenate(list(iter_assignments(n)))
        en = m.energies(xs)
        for v in range(n):
            ref = [en[xs[:, v] == b].min() for b in range(2)]
            np.testing.assert_allclose(np.minimum(res.vertex_marginals[v], INF), ref, atol=1e-9)


def test_junction_min_matches_enumeration_on_300_forests():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        _junction_vs_brute(rng)


# -- explicit LP oracle ------------------------------------------------------------------


@given(seeds)
def test_lp_relaxation_sandwich(seed):
    rng = np.random.default_rng(seed)
    m = random_tree_model(rng, int(rng.integers(2, 7)))
    _, e = brute_force_map(m)
    lp0 = lp_relaxation_value(m, ())
    lpe = lp_relaxation_value(m, m.edges)
    assert lp0 <= lpe + 1e-7
    assert lpe <= e + 1e-7
    # on a tree, consistency on every edge is tight
    assert lpe == pytest.approx(e, abs=1e-6)


def test_lp_relaxation_rejects_foreign_edges():
    with pytest.raises(ModelError):
        lp_relaxation_value(gen_chain_exclusion(4, 1.0, 0.1), [(0, 3)])
