"""Min, argmin set and block min-marginals of the reparameterized HOP.

The reparameterized term is::

    theta~_alpha(x) = theta_alpha(x) - sum_{ij in S} delta_ij(x_i, x_j)
                                     - sum_{i not covered by S} delta_i(x_i)

For cardinality potentials the message terms are aggregated over a junction
forest of ``S`` whose tables carry an extra count axis, and components are
combined by min-plus convolution.  Pattern potentials run one plain min-sum
sweep per pattern and take the elementwise minimum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exact import (
    CliqueTree,
    EliminationOrder,
    JunctionForest,
    Sweep,
    build_junction_forest,
    iter_assignments,
    minplus_conv,
    reparameterized_hop_values,
    treewidth_upper_bound,
)
from .model import (
    FORBIDDEN,
    INF,
    CardinalityHop,
    EnergyModel,
    Hop,
    InfeasibleError,
    ModelError,
    PatternHop,
    TableHop,
    saturate,
)

log = logging.getLogger(__name__)

M_MAX = 100
TIE_TOL = 1e-9


class EdgeSet:
    """The consistency set ``S`` with its junction forest and uncovered singletons."""

    def __init__(self, n: int, edges: Sequence, order: EliminationOrder | None = None):
        self.n = n
        edges = list(edges)
        self.edges = tuple(sorted({tuple(sorted((int(i), int(j)))) for i, j in edges}))
        if len(self.edges) != len(edges):
            raise ModelError("duplicate edges in S")
        covered = sorted({v for e in self.edges for v in e})
        if covered and (covered[0] < 0 or covered[-1] >= n):
            raise ModelError("edge endpoint out of range")
        self.covered = tuple(covered)
        self.singletons = tuple(v for v in range(n) if v not in set(covered))
        if order is None:
            order = treewidth_upper_bound(self.edges, covered)
        self.order = order
        self.tw_bound = order.width
        self.forest: JunctionForest = build_junction_forest(self.edges, order)
        self._trees: dict = {}

    @classmethod
    def for_model(cls, model: EnergyModel, edges: Sequence = ()) -> "EdgeSet":
        edges = list(edges)
        for i, j in edges:
            if (min(i, j), max(i, j)) not in model.edge_index:
                raise ModelError(f"({i}, {j}) is not an edge of the model")
        return cls(model.n, edges)

    def __len__(self):
        return len(self.edges)

    def __repr__(self):
        return f"EdgeSet(|S|={len(self.edges)}, tw={self.tw_bound}, singletons={len(self.singletons)})"

    def extended(self, extra: Sequence) -> "EdgeSet":
        return EdgeSet(self.n, list(self.edges) + [tuple(sorted(e)) for e in extra])

    def tree(self, flip=None) -> CliqueTree:
        """Clique tree over the forest plus singletons (cached per flip mask)."""
        key = None if flip is None else bytes(np.asarray(flip, dtype=np.int8))
        if key not in self._trees:
            self._trees[key] = CliqueTree(self.forest.cliques, self.forest.tree_edges,
                                          self.singletons, flip)
        return self._trees[key]


@dataclass
class ArgminSet:
    """Distinct minimizers of the reparameterized HOP, sorted lexicographically."""

    value: float
    assignments: list = field(default_factory=list)
    truncated: bool = False
    m_max: int = M_MAX

    def __len__(self):
        return len(self.assignments)

    def as_array(self) -> np.ndarray:
        return np.array(self.assignments, dtype=np.int8).reshape(len(self.assignments), -1)


@dataclass
class HopMarginals:
    value: float
    edge: np.ndarray   # (|S|, 2, 2)
    node: np.ndarray   # (len(singletons), 2)


def minplus_convolve(a, b) -> np.ndarray:
    """``h(m) = min_k a(k) + b(m - k)``, saturating at the sentinel."""
    return minplus_conv(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def _message_potentials(es: EdgeSet, tree: CliqueTree, delta_edge, delta_node) -> list:
    """Clique tables holding ``-delta`` for every block assigned to the clique."""
    pots = [np.zeros((2,) * len(c)) for c in tree.cliques[:-1]] + [np.zeros(())]
    for (i, j), d in zip(es.edges, np.asarray(delta_edge, dtype=float).reshape(-1, 2, 2)):
        c = es.forest.edge_clique[(i, j)]
        clique = tree.cliques[c]
        shape = [1] * len(clique)
        shape[clique.index(i)] = 2
        shape[clique.index(j)] = 2
        # clique axes are sorted and i < j, so the table needs no transpose
        pots[c] = pots[c] - d.reshape(shape)
    off = tree.n_real
    for k, d in enumerate(np.asarray(delta_node, dtype=float).reshape(-1, 2)):
        pots[off + k] = pots[off + k] - d
    return pots


def _with_unary(tree: CliqueTree, pots: list, w: np.ndarray) -> list:
    out = list(pots)
    for c in range(len(tree.cliques) - 1):
        clique = tree.cliques[c]
        for v in tree.home[c]:
            shape = [1] * len(clique)
            shape[clique.index(v)] = 2
            out[c] = out[c] + np.array([0.0, w[v]]).reshape(shape)
    return out


def _check_dims(es: EdgeSet, hop: Hop, delta_edge, delta_node):
    if hop.n != es.n:
        raise ModelError(f"HOP has {hop.n} variables, edge set has {es.n}")
    if np.shape(delta_edge) != (len(es.edges), 2, 2) and len(es.edges):
        raise ModelError(f"delta_edge must have shape ({len(es.edges)}, 2, 2)")
    if np.shape(delta_node) != (len(es.singletons), 2) and len(es.singletons):
        raise ModelError(f"delta_node must have shape ({len(es.singletons)}, 2)")


def component_profile(hop: CardinalityHop, es: EdgeSet, delta_edge, delta_node,
                      component: int) -> np.ndarray:
    """Count profile of one forest component or singleton.

    ``component`` indexes the children of the virtual root, which are ordered by
    their smallest vertex.  Entry ``g[c]`` is the minimum of the component's
    ``-delta`` terms over its assignments with ``c`` flipped ones.
    """
    tree = es.tree(hop.flip_mask)
    sw = tree.upward(_message_potentials(es, tree, delta_edge, delta_node))
    return sw.up[tree.children[tree.root][component]]


def _cardinality_sweep(hop: CardinalityHop, es: EdgeSet, delta_edge, delta_node,
                       marginals: bool) -> tuple[CliqueTree, Sweep]:
    tree = es.tree(hop.flip_mask)
    sw = tree.upward(_message_potentials(es, tree, delta_edge, delta_node))
    if marginals:
        tree.downward(sw, hop.f)
    return tree, sw


def _pattern_sweeps(hop: PatternHop, es: EdgeSet, delta_edge, delta_node, marginals: bool):
    tree = es.tree()
    base = _message_potentials(es, tree, delta_edge, delta_node)
    for w in hop.patterns:
        sw = tree.upward(_with_unary(tree, base, w))
        if marginals:
            tree.downward(sw)
        yield tree, sw


def _collect(tree: CliqueTree, sw: Sweep, value: float, root_fn, hop, es, delta_edge, delta_node,
             found: dict, m_max: int) -> bool:
    """Add minimizers from one sweep to ``found``; return True once truncated."""
    n = es.n
    for xd in sw.enumerate_argmins(value, root_fn, tol=1e-7):
        x = np.zeros(n, dtype=np.int8)
        for v, b in xd.items():
            x[v] = b
        key = tuple(int(b) for b in x)
        if key in found:
            continue
        val = reparameterized_hop_values(hop, x[None, :], es.edges, delta_edge,
                                         es.singletons, delta_node)[0]
        if val > value + TIE_TOL:
            continue
        found[key] = val
        if len(found) > m_max:
            return True
    return False


def _table_min(hop: TableHop, es, delta_edge, delta_node, m_max):
    best, found = INF, []
    for xs in iter_assignments(hop.n):
        v = reparameterized_hop_values(hop, xs, es.edges, delta_edge, es.singletons, delta_node)
        best = min(best, float(v.min()))
    for xs in iter_assignments(hop.n):
        v = reparameterized_hop_values(hop, xs, es.edges, delta_edge, es.singletons, delta_node)
        found.extend(tuple(int(b) for b in x) for x in xs[v <= best + TIE_TOL])
    return best, found


def hop_min(hop: Hop, es: EdgeSet, delta_edge, delta_node, m_max: int = M_MAX) -> tuple[float, ArgminSet]:
    """Minimum of the reparameterized HOP and the set of its minimizers.

    Raises :class:`InfeasibleError` when every assignment is forbidden.
    """
    _check_dims(es, hop, delta_edge, delta_node)
    found: dict = {}
    truncated = False
    if isinstance(hop, CardinalityHop):
        tree, sw = _cardinality_sweep(hop, es, delta_edge, delta_node, marginals=False)
        value = float(sw.total(hop.f).min())
        if value < FORBIDDEN:
            truncated = _collect(tree, sw, value, hop.f, hop, es, delta_edge, delta_node, found, m_max)
    elif isinstance(hop, PatternHop):
        sweeps = list(_pattern_sweeps(hop, es, delta_edge, delta_node, marginals=False))
        values = [float(sw.total().min()) for _, sw in sweeps]
        value = min(values)
        for (tree, sw), v in zip(sweeps, values):
            if truncated or v > value + TIE_TOL * max(1.0, abs(value)):
                continue
            truncated = _collect(tree, sw, v, None, hop, es, delta_edge, delta_node, found, m_max)
    elif isinstance(hop, TableHop):
        value, keys = _table_min(hop, es, delta_edge, delta_node, m_max)
        found = dict.fromkeys(keys)
        truncated = len(found) > m_max
    else:
        raise ModelError(f"unsupported HOP type {type(hop).__name__}")
    if value >= FORBIDDEN:
        raise InfeasibleError("the reparameterized HOP forbids every assignment")
    keys = sorted(found)
    if truncated:
        keys = keys[:m_max]
    return value, ArgminSet(value, [np.array(k, dtype=np.int8) for k in keys], truncated, m_max)


def hop_min_marginals(hop: Hop, es: EdgeSet, delta_edge, delta_node) -> HopMarginals:
    """Min-marginal tables of the reparameterized HOP on every block of ``es``.

    Edge blocks come back in ``es.edges`` order as 2x2 tables indexed
    ``[x_i, x_j]``; singleton blocks in ``es.singletons`` order.
    """
    _check_dims(es, hop, delta_edge, delta_node)
    if isinstance(hop, TableHop):
        return _table_marginals(hop, es, delta_edge, delta_node)
    if isinstance(hop, CardinalityHop):
        sweeps = [_cardinality_sweep(hop, es, delta_edge, delta_node, marginals=True)]
        values = [float(sweeps[0][1].total(hop.f).min())]
    elif isinstance(hop, PatternHop):
        sweeps = list(_pattern_sweeps(hop, es, delta_edge, delta_node, marginals=True))
        values = [float(sw.total().min()) for _, sw in sweeps]
    else:
        raise ModelError(f"unsupported HOP type {type(hop).__name__}")
    value = min(values)
    if value >= FORBIDDEN:
        raise InfeasibleError("the reparameterized HOP forbids every assignment")
    edge = np.full((len(es.edges), 2, 2), INF)
    node = np.full((len(es.singletons), 2), INF)
    for tree, sw in sweeps:
        for k, (i, j) in enumerate(es.edges):
            np.minimum(edge[k], sw.pair_marginal(es.forest.edge_clique[(i, j)], i, j), out=edge[k])
        for k, v in enumerate(es.singletons):
            np.minimum(node[k], sw.vertex_marginal(v), out=node[k])
    return HopMarginals(value, saturate(edge), saturate(node))


def _table_marginals(hop: TableHop, es: EdgeSet, delta_edge, delta_node) -> HopMarginals:
    edge = np.full((len(es.edges), 2, 2), INF)
    node = np.full((len(es.singletons), 2), INF)
    best = INF
    for xs in iter_assignments(hop.n):
        v = reparameterized_hop_values(hop, xs, es.edges, delta_edge, es.singletons, delta_node)
        best = min(best, float(v.min()))
        for k, (i, j) in enumerate(es.edges):
            np.minimum.at(edge[k], (xs[:, i], xs[:, j]), v)
        for k, i in enumerate(es.singletons):
            np.minimum.at(node[k], xs[:, i], v)
    if best >= FORBIDDEN:
        raise InfeasibleError("the reparameterized HOP forbids every assignment")
    return HopMarginals(best, saturate(edge), saturate(node))
