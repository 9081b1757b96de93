"""Exact inference: enumeration oracles, elimination orders, junction trees.

The :class:`CliqueTree` sweep is the workhorse behind both :func:`junction_min`
and the high-order-potential computations in :mod:`hoplp.hop`.  Every table it
handles carries a trailing *count* axis; plain min-sum inference simply uses a
count axis of length one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .model import FORBIDDEN, INF, EnergyModel, Hop, ModelError, saturate

MAX_BRUTE_MAP = 25
MAX_BRUTE_MARGINALS = 20
_CHUNK = 1 << 16


def iter_assignments(n: int, chunk: int = _CHUNK) -> Iterator[np.ndarray]:
    """All ``2**n`` assignments in lexicographic order (``x_0`` most significant)."""
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield ((idx[:, None] >> shifts) & 1).astype(np.int8)


def brute_force_map(model: EnergyModel) -> tuple[np.ndarray, float]:
    """Exhaustive MAP; ties go to the lexicographically smallest assignment."""
    if model.n > MAX_BRUTE_MAP:
        raise ModelError(f"brute force MAP is limited to n <= {MAX_BRUTE_MAP} (got n={model.n})")
    best_x, best = None, np.inf
    for xs in iter_assignments(model.n):
        e = model.energies(xs)
        k = int(np.argmin(e))
        if e[k] < best:
            best, best_x = float(e[k]), xs[k].copy()
    return best_x, best


def reparameterized_hop_values(hop: Hop, xs: np.ndarray, edges: Sequence, delta_edge,
                               singletons: Sequence, delta_node) -> np.ndarray:
    """``theta_alpha(x) - sum_S delta_ij(x_i, x_j) - sum_singletons delta_i(x_i)`` for a batch."""
    vals = np.asarray(hop.values(xs), dtype=float)
    for (i, j), d in zip(edges, delta_edge):
        vals = vals - np.asarray(d)[xs[:, i], xs[:, j]]
    for i, d in zip(singletons, delta_node):
        vals = vals - np.asarray(d)[xs[:, i]]
    return saturate(vals)


def brute_force_hop_min_marginals(hop: Hop, edges: Sequence, delta_edge, singletons: Sequence,
                                  delta_node, block) -> np.ndarray:
    """Min-marginal of the reparameterized HOP on one block, by enumeration.

    ``block`` is either an edge ``(i, j)`` from ``edges`` (2x2 result) or a vertex
    from ``singletons`` (length-2 result).
    """
    n = hop.n
    if n > MAX_BRUTE_MARGINALS:
        raise ModelError(f"brute force min-marginals are limited to n <= {MAX_BRUTE_MARGINALS}")
    edges = [tuple(e) for e in edges]
    if isinstance(block, (tuple, list)) and len(block) == 2:
        if tuple(block) not in edges:
            raise ModelError(f"block {block} is not an edge attached to the HOP")
        i, j = block
        out = np.full((2, 2), INF)
        for xs in iter_assignments(n):
            v = reparameterized_hop_values(hop, xs, edges, delta_edge, singletons, delta_node)
            np.minimum.at(out, (xs[:, i], xs[:, j]), v)
    else:
        i = int(block)
        if i not in list(singletons):
            raise ModelError(f"vertex {i} is not a singleton attached to the HOP")
        out = np.full(2, INF)
        for xs in iter_assignments(n):
            v = reparameterized_hop_values(hop, xs, edges, delta_edge, singletons, delta_node)
            np.minimum.at(out, xs[:, i], v)
    return saturate(out)


def lp_relaxation_value(model: EnergyModel, edges: Sequence = ()) -> float:
    """Optimal value of the LP relaxation with HOP consistency on ``edges``, by a generic LP solver.

    The HOP distribution is explicit (one variable per assignment), so this is
    an oracle for small models only (``n <= MAX_BRUTE_MARGINALS``).  Node and
    edge pseudo-marginals are locally consistent; the HOP distribution agrees
    with every node marginal and with the edge marginals of ``edges``.
    """
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n = model.n
    if n > MAX_BRUTE_MARGINALS:
        raise ModelError(f"the explicit LP is limited to n <= {MAX_BRUTE_MARGINALS}")
    edges = [tuple(e) for e in edges]
    missing = [e for e in edges if e not in model.edge_index]
    if missing:
        raise ModelError(f"edge {missing[0]} is not an edge of the model")
    xs = next(iter_assignments(n, 1 << n))
    m = len(model.edges)
    node0, edge0, hop0 = 0, 2 * n, 2 * n + 4 * m
    nvar = hop0 + len(xs)
    cost = np.concatenate([model.unary.ravel(), model.pairwise.reshape(-1),
                           np.asarray(model.hop.values(xs), dtype=float)])
    upper = np.where(cost >= FORBIDDEN, 0.0, None)
    cost = np.where(cost >= FORBIDDEN, 0.0, cost)
    rows, cols, vals, rhs = [], [], [], []

    def constraint(entries, b=0.0):
        r = len(rhs)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(b)

    for i in range(n):
        constraint([(node0 + 2 * i, 1.0), (node0 + 2 * i + 1, 1.0)], 1.0)
    for e, (i, j) in enumerate(model.edges):
        base = edge0 + 4 * e
        for a in range(2):
            constraint([(base + 2 * a, 1.0), (base + 2 * a + 1, 1.0), (node0 + 2 * i + a, -1.0)])
            constraint([(base + a, 1.0), (base + 2 + a, 1.0), (node0 + 2 * j + a, -1.0)])
    hop_ids = hop0 + np.arange(len(xs))
    for i in range(n):
        for a in range(2):
            sel = hop_ids[xs[:, i] == a]
            constraint([(int(c), 1.0) for c in sel] + [(node0 + 2 * i + a, -1.0)])
    for (i, j) in edges:
        base = edge0 + 4 * model.edge_index[(i, j)]
        for a in range(2):
            for b in range(2):
                sel = hop_ids[(xs[:, i] == a) & (xs[:, j] == b)]
                constraint([(int(c), 1.0) for c in sel] + [(base + 2 * a + b, -1.0)])
    A = coo_matrix((vals, (rows, cols)), shape=(len(rhs), nvar)).tocsr()
    bounds = [(0.0, u) for u in upper]
    res = linprog(cost, A_eq=A, b_eq=np.asarray(rhs), bounds=bounds, method="highs")
    if res.status == 2:
        return INF
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(res.fun)


# -- elimination orders ------------------------------------------------------


@dataclass(frozen=True)
class EliminationOrder:
    order: tuple
    width: int


def _adjacency(edges: Iterable, vertices: Iterable = ()) -> dict[int, set]:
    adj: dict[int, set] = {int(v): set() for v in vertices}
    for i, j in edges:
        adj.setdefault(int(i), set()).add(int(j))
        adj.setdefault(int(j), set()).add(int(i))
    return adj


def induced_width(edges: Iterable, order: Sequence) -> int:
    """Induced width of eliminating ``order`` on the graph (max clique size - 1)."""
    adj = _adjacency(edges, order)
    if set(adj) != set(order) or len(set(order)) != len(order):
        raise ModelError("order must be a permutation of the graph's vertices")
    width = 0
    for v in order:
        nb = adj.pop(v)
        width = max(width, len(nb))
        for a in nb:
            adj[a].discard(v)
            adj[a] |= nb - {a}
    return width


def treewidth_upper_bound(edges: Iterable, vertices: Iterable = ()) -> EliminationOrder:
    """Greedy min-fill elimination order; ties go to the lowest vertex index."""
    adj = _adjacency(edges, vertices)
    order, width = [], 0
    while adj:
        best, best_fill = None, None
        for v in sorted(adj):
            nb = list(adj[v])
            fill = sum(1 for a in range(len(nb)) for b in range(a + 1, len(nb))
                       if nb[b] not in adj[nb[a]])
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nb = adj.pop(best)
        width = max(width, len(nb))
        for a in nb:
            adj[a].discard(best)
            adj[a] |= nb - {a}
        order.append(best)
    return EliminationOrder(tuple(order), width)


# -- junction forests --------------------------------------------------------


@dataclass(frozen=True)
class JunctionForest:
    """Cliques (sorted vertex tuples), tree edges, and the home clique of each edge."""

    cliques: tuple
    tree_edges: tuple
    edge_clique: dict = field(default_factory=dict)

    def separator(self, a: int, b: int) -> tuple:
        return tuple(sorted(set(self.cliques[a]) & set(self.cliques[b])))

    def running_intersection(self) -> bool:
        adj = {c: set() for c in range(len(self.cliques))}
        for a, b in self.tree_edges:
            adj[a].add(b)
            adj[b].add(a)
        verts = {v for c in self.cliques for v in c}
        for v in verts:
            holders = {c for c, cl in enumerate(self.cliques) if v in cl}
            start = next(iter(holders))
            seen, stack = {start}, [start]
            while stack:
                c = stack.pop()
                for d in adj[c]:
                    if d in holders and d not in seen:
                        seen.add(d)
                        stack.append(d)
            if seen != holders:
                return False
        return True


def build_junction_forest(edges: Sequence, order: EliminationOrder | Sequence) -> JunctionForest:
    edges = [tuple(sorted((int(i), int(j)))) for i, j in edges]
    seq = list(order.order if isinstance(order, EliminationOrder) else order)
    covered = {v for e in edges for v in e}
    if not covered <= set(seq):
        raise ModelError(f"elimination order misses vertices {sorted(covered - set(seq))}")
    seq = [v for v in seq if v in covered]
    if not seq:
        return JunctionForest((), (), {})

    adj = _adjacency(edges, seq)
    pos = {v: k for k, v in enumerate(seq)}
    cliques, parent = [], []
    for v in seq:
        nb = adj.pop(v)
        for a in nb:
            adj[a].discard(v)
            adj[a] |= nb - {a}
        cliques.append(set(nb) | {v})
        parent.append(pos[min(nb, key=pos.__getitem__)] if nb else None)

    tree = {c: set() for c in range(len(cliques))}
    for c, p in enumerate(parent):
        if p is not None:
            tree[c].add(p)
            tree[p].add(c)
    # absorb every clique contained in an adjacent one
    alive = set(tree)
    changed = True
    while changed:
        changed = False
        for c in sorted(alive):
            host = next((d for d in sorted(tree[c]) if cliques[c] <= cliques[d]), None)
            if host is None:
                continue
            for d in tree[c] - {host}:
                tree[d].discard(c)
                tree[d].add(host)
                tree[host].add(d)
            tree[host].discard(c)
            del tree[c]
            alive.discard(c)
            changed = True

    keep = sorted(alive, key=lambda c: (min(cliques[c]), sorted(cliques[c])))
    remap = {c: k for k, c in enumerate(keep)}
    cl = tuple(tuple(sorted(cliques[c])) for c in keep)
    tedges = tuple(sorted({tuple(sorted((remap[a], remap[b]))) for a in keep for b in tree[a]}))
    assign = {}
    for e in edges:
        assign[e] = next(k for k, c in enumerate(cl) if e[0] in c and e[1] in c)
    return JunctionForest(cl, tedges, assign)


# -- the clique-tree sweep ---------------------------------------------------


def minplus_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Min-plus convolution along the last axis, broadcasting the leading axes."""
    la, lb = a.shape[-1], b.shape[-1]
    if la < lb:
        a, b, la, lb = b, a, lb, la
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.full(lead + (la + lb - 1,), INF)
    for k in range(lb):
        np.minimum(out[..., k:k + la], a + b[..., k:k + 1], out=out[..., k:k + la])
    out[out >= FORBIDDEN] = INF
    return out


class CliqueTree:
    """A rooted tree of cliques with a variable-free virtual root.

    Parameters
    ----------
    cliques : list of vertex tuples, one per real clique
    tree_edges : undirected edges between cliques (a forest)
    extra_vertices : vertices not covered by any clique; each becomes its own
        singleton clique under the virtual root
    flip : optional per-vertex flip bits; when given, sweeps track the number of
        vertices with ``x_v XOR flip_v == 1`` on the count axis
    """

    def __init__(self, cliques: Sequence, tree_edges: Sequence = (), extra_vertices: Sequence = (),
                 flip=None):
        cl = [tuple(sorted(c)) for c in cliques] + [(int(v),) for v in extra_vertices]
        n_real = len(cliques)
        adj = {c: set() for c in range(len(cl))}
        for a, b in tree_edges:
            adj[a].add(b)
            adj[b].add(a)
        # components (real cliques) plus singletons hang below the root
        comps, seen = [], set()
        for c in range(len(cl)):
            if c in seen:
                continue
            comp, stack = [], [c]
            seen.add(c)
            while stack:
                d = stack.pop()
                comp.append(d)
                for e in adj[d]:
                    if e not in seen:
                        seen.add(e)
                        stack.append(e)
            comps.append(min(comp, key=lambda d: (min(cl[d]), cl[d])))
        comps.sort(key=lambda d: (min(cl[d]), cl[d]))
        root = len(cl)
        cl.append(())
        parent = [None] * len(cl)
        children: list[list[int]] = [[] for _ in cl]
        pre = [root]
        for r in comps:
            parent[r] = root
            children[root].append(r)
            stack = [r]
            while stack:
                d = stack.pop()
                pre.append(d)
                for e in sorted(adj[d], key=lambda e: (min(cl[e]), cl[e])):
                    if e != parent[d]:
                        parent[e] = d
                        children[d].append(e)
                        stack.append(e)
        self.cliques = cl
        self.n_real = n_real
        self.root = root
        self.parent = parent
        self.children = children
        self.preorder = pre
        self.postorder = pre[::-1]
        self.sep = [tuple(v for v in cl[c] if parent[c] is not None and v in cl[parent[c]])
                    for c in range(len(cl))]
        home = [tuple(v for v in cl[c] if v not in self.sep[c]) for c in range(len(cl))]
        self.home = home
        self.vertices = sorted(v for h in home for v in h)
        self.home_of = {v: c for c in range(len(cl)) for v in home[c]}
        self.counting = flip is not None
        self.flip = None if flip is None else np.asarray(flip, dtype=np.int8)
        # reshape targets for broadcasting a child's separator table into its parent
        self._bshape = [None] * len(cl)
        self._own_shape = [None] * len(cl)
        self._sep_axes = [None] * len(cl)
        for c in range(len(cl)):
            p = parent[c]
            if p is None:
                continue
            self._bshape[c] = tuple(2 if v in self.sep[c] else 1 for v in cl[p])
            self._own_shape[c] = tuple(2 if v in self.sep[c] else 1 for v in cl[c])
            self._sep_axes[c] = tuple(k for k, v in enumerate(cl[c]) if v not in self.sep[c])
        self._home_mask = [self._count_mask(c) for c in range(len(cl))]
        self.state_count = 0

    # -- helpers --------------------------------------------------------------

    def _count_mask(self, c: int):
        """Boolean table marking, per clique configuration, its homed-vertex count."""
        if not self.counting or not self.home[c]:
            return None
        clique = self.cliques[c]
        h = np.zeros((2,) * len(clique), dtype=np.int64)
        for v in self.home[c]:
            ax = clique.index(v)
            shape = [1] * len(clique)
            shape[ax] = 2
            bit = np.array([0, 1], dtype=np.int64) ^ int(self.flip[v])
            h = h + bit.reshape(shape)
        return h[..., None] == np.arange(len(self.home[c]) + 1)

    def _seed(self, c: int, psi: np.ndarray) -> np.ndarray:
        """Clique potential with the homed-vertex count placed on the count axis."""
        mask = self._home_mask[c]
        if mask is None:
            return psi[..., None]
        return np.where(mask, psi[..., None], INF)

    def _bcast(self, c: int, msg: np.ndarray) -> np.ndarray:
        return msg.reshape(self._bshape[c] + (msg.shape[-1],))

    def _to_parent_axes(self, c: int, tab: np.ndarray) -> np.ndarray:
        return tab.min(axis=self._sep_axes[c]) if self._sep_axes[c] else tab

    def _conv(self, a, b):
        out = minplus_conv(a, b)
        self.state_count += out.size
        return out

    # -- sweeps ---------------------------------------------------------------

    def upward(self, potentials: Sequence[np.ndarray]) -> "Sweep":
        """Leaf-to-root pass. ``potentials[c]`` has shape ``(2,)*len(clique c)``."""
        sw = Sweep(self)
        for c in self.postorder:
            psi = potentials[c] if c != self.root else np.zeros(())
            chain = [self._seed(c, np.asarray(psi, dtype=float))]
            self.state_count += chain[0].size
            for ch in self.children[c]:
                chain.append(self._conv(chain[-1], self._bcast(ch, sw.up[ch])))
            sw.prefix[c] = chain
            if c != self.root:
                sw.up[c] = self._to_parent_axes(c, chain[-1])
        return sw

    def downward(self, sw: "Sweep", root_fn: np.ndarray | None = None) -> "Sweep":
        """Root-to-leaf pass; fills clique beliefs (min-marginals).

        ``root_fn`` is added at the root as a function of the total count (for
        cardinality potentials); ``None`` means zero.
        """
        total = sw.prefix[self.root][-1]
        down_root = np.zeros(total.shape) if root_fn is None else np.asarray(root_fn, dtype=float)
        if down_root.shape != total.shape:
            raise ModelError(f"root function has length {down_root.shape}, expected {total.shape}")
        sw.down[self.root] = down_root
        for c in self.preorder:
            kids = self.children[c]
            chain = sw.prefix[c]
            d = sw.down[c]
            if c != self.root:
                d = d.reshape(self._own_shape[c] + (d.shape[-1],))
            inside = chain[-1]
            bel = saturate(inside + d).min(axis=-1)
            sw.belief[c] = bel
            self.state_count += inside.size
            if not kids:
                continue
            # suffix products of the children, so each child sees all of its siblings
            suffix = [None] * (len(kids) + 1)
            for k in range(len(kids) - 1, -1, -1):
                msg = self._bcast(kids[k], sw.up[kids[k]])
                suffix[k] = msg if suffix[k + 1] is None else self._conv(msg, suffix[k + 1])
            for k, ch in enumerate(kids):
                others = chain[k] if suffix[k + 1] is None else self._conv(chain[k], suffix[k + 1])
                lo, lc = others.shape[-1], sw.up[ch].shape[-1]
                shape = np.broadcast_shapes(others.shape[:-1], d.shape[:-1])
                r = np.empty(shape + (lc,))
                for kc in range(lc):
                    r[..., kc] = (others + d[..., kc:kc + lo]).min(axis=-1)
                self.state_count += r.size
                r = np.broadcast_to(r, (2,) * len(self.cliques[c]) + (lc,))
                # min out everything but the child's separator
                axes = tuple(a for a, v in enumerate(self.cliques[c]) if v not in self.sep[ch])
                sw.down[ch] = saturate(r.min(axis=axes) if axes else np.array(r))
        return sw


class Sweep:
    """Messages and beliefs produced by one pass over a :class:`CliqueTree`."""

    def __init__(self, tree: CliqueTree):
        self.tree = tree
        m = len(tree.cliques)
        self.up: list = [None] * m
        self.down: list = [None] * m
        self.prefix: list = [None] * m
        self.belief: list = [None] * m

    def total(self, root_fn=None) -> np.ndarray:
        """Minimum as a function of the total count (length-1 when not counting)."""
        t = self.prefix[self.tree.root][-1]
        return t if root_fn is None else saturate(t + root_fn)

    def vertex_marginal(self, v: int) -> np.ndarray:
        c = self.tree.home_of[v]
        bel = self.belief[c]
        ax = self.tree.cliques[c].index(v)
        other = tuple(a for a in range(bel.ndim) if a != ax)
        return bel.min(axis=other) if other else bel

    def pair_marginal(self, c: int, i: int, j: int) -> np.ndarray:
        bel = self.belief[c]
        clique = self.tree.cliques[c]
        ai, aj = clique.index(i), clique.index(j)
        other = tuple(a for a in range(bel.ndim) if a not in (ai, aj))
        m = bel.min(axis=other) if other else bel
        return m if ai < aj else m.T

    def enumerate_argmins(self, value: float, root_fn=None, tol: float = 1e-9,
                          limit: int | None = None) -> Iterator[dict]:
        """Yield every joint assignment (vertex -> label) attaining ``value``.

        Follows all tied back-pointers through the prefix chains; a branch is
        kept when its subtree optimum matches the required value within
        ``tol`` scaled by the magnitude of the values involved.
        """
        tree = self.tree
        total = self.total(root_fn)
        found = 0
        for k in range(total.shape[-1]):
            if not _close(total[..., k].item(), value, tol):
                continue
            for x in self._expand([(tree.root, k)], {}, tol):
                yield x
                found += 1
                if limit is not None and found >= limit:
                    return

    def _expand(self, tasks, x, tol):
        if not tasks:
            yield dict(x)
            return
        tree = self.tree
        (c, k), rest = tasks[0], tasks[1:]
        clique = tree.cliques[c]
        free = [v for v in clique if v not in x]
        chain = self.prefix[c]
        if c == tree.root:
            target = chain[-1][k]
        else:
            idx = tuple(x[v] for v in tree.sep[c])
            target = self.up[c][idx + (k,)]
        for bits in _configs(len(free)):
            for v, b in zip(free, bits):
                x[v] = b
            xc = tuple(x[v] for v in clique)
            if not _close(chain[-1][xc + (k,)], target, tol):
                continue
            for split in self._splits(c, xc, len(chain) - 1, k, chain[-1][xc + (k,)], tol):
                yield from self._expand(split + rest, x, tol)
        for v in free:
            del x[v]

    def _splits(self, c, xc, j, k, target, tol):
        """Ways to distribute count ``k`` over the first ``j`` children of ``c``."""
        tree = self.tree
        chain = self.prefix[c]
        if j == 0:
            if _close(chain[0][xc + (k,)], target, tol):
                yield []
            return
        ch = tree.children[c][j - 1]
        up = self.up[ch]
        sidx = tuple(b for v, b in zip(tree.cliques[c], xc) if v in tree.sep[ch])
        prev = chain[j - 1]
        for kc in range(up.shape[-1]):
            kp = k - kc
            if kp < 0 or kp >= prev.shape[-1]:
                continue
            a, b = prev[xc + (kp,)], up[sidx + (kc,)]
            if a >= FORBIDDEN or b >= FORBIDDEN or not _close(a + b, target, tol):
                continue
            for rest in self._splits(c, xc, j - 1, kp, a, tol):
                yield rest + [(ch, kc)]


def _close(a: float, b: float, tol: float) -> bool:
    if a >= FORBIDDEN or b >= FORBIDDEN:
        return a >= FORBIDDEN and b >= FORBIDDEN
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _configs(m: int):
    for idx in range(1 << m):
        yield tuple((idx >> (m - 1 - t)) & 1 for t in range(m))


# -- junction_min ------------------------------------------------------------


@dataclass
class JunctionResult:
    value: float
    argmin: np.ndarray
    clique_marginals: list
    vertex_marginals: dict


def clique_tree_from_forest(forest: JunctionForest, extra_vertices: Sequence = (), flip=None) -> CliqueTree:
    return CliqueTree(forest.cliques, forest.tree_edges, extra_vertices, flip)


def junction_min(tree: CliqueTree | JunctionForest, potentials: Sequence, unary: dict | None = None,
                 n: int | None = None) -> JunctionResult:
    """Exact minimum of ``sum_c potentials[c](x_c) + sum_v unary[v](x_v)``.

    ``potentials`` has one table per real clique of ``tree`` (shape
    ``(2,)*len(clique)``); singleton cliques pick up their term from ``unary``.
    Returns the minimum, the lexicographically smallest minimizer, and the
    min-marginal of every clique and vertex.
    """
    if isinstance(tree, JunctionForest):
        tree = clique_tree_from_forest(tree)
    pots = _assemble(tree, potentials, unary)
    sw = tree.downward(tree.upward(pots))
    value = float(sw.total().min())
    if value >= FORBIDDEN:
        value = INF
    verts = tree.vertices
    n = (max(verts) + 1 if verts else 0) if n is None else n
    argmin = _lex_argmin(tree, pots, value, verts, n)
    return JunctionResult(
        value, argmin,
        [sw.belief[c] for c in range(len(tree.cliques) - 1)],
        {v: sw.vertex_marginal(v) for v in verts},
    )


def _assemble(tree: CliqueTree, potentials: Sequence, unary: dict | None) -> list:
    pots = []
    for c, clique in enumerate(tree.cliques[:-1]):
        if c < tree.n_real:
            p = np.array(potentials[c], dtype=float).reshape((2,) * len(clique))
        else:
            p = np.zeros((2,))
        pots.append(p)
    pots.append(np.zeros(()))
    for v, u in (unary or {}).items():
        c = tree.home_of[v]
        ax = tree.cliques[c].index(v)
        shape = [1] * len(tree.cliques[c])
        shape[ax] = 2
        pots[c] = pots[c] + np.asarray(u, dtype=float).reshape(shape)
    return [saturate(p) for p in pots]


def _lex_argmin(tree: CliqueTree, pots: list, value: float, verts: Sequence, n: int) -> np.ndarray:
    """Lexicographically smallest minimizer by clamping vertices one at a time."""
    x = np.zeros(n, dtype=np.int8)
    if value >= FORBIDDEN:
        return x
    pots = list(pots)
    for v in sorted(verts):
        c = tree.home_of[v]
        ax = tree.cliques[c].index(v)
        trial = pots[c].copy()
        sl = [slice(None)] * trial.ndim
        sl[ax] = 1
        trial[tuple(sl)] = INF
        cand = pots[:c] + [trial] + pots[c + 1:]
        if _close(float(tree.upward(cand).total().min()), value, 1e-9):
            pots = cand
        else:
            x[v] = 1
            sl[ax] = 0
            pinned = pots[c].copy()
            pinned[tuple(sl)] = INF
            pots = pots[:c] + [pinned] + pots[c + 1:]
    return x
