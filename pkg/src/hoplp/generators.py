"""Seeded model families used by the experiments and the CLI."""
from __future__ import annotations

import numpy as np

from .exact import MAX_BRUTE_MAP, brute_force_map, iter_assignments
from .model import INF, CardinalityHop, EnergyModel, ModelError, exclusion_hop


def _attractive(c: float) -> list:
    return [[0.0, c], [c, 0.0]]


def gen_chain_exclusion(n: int, c: float, eps: float) -> EnergyModel:
    """Chain with attractive edges, unaries ``(0, eps)`` and the all-zeros assignment excluded."""
    if n < 2 or n % 2:
        raise ModelError("n must be even and at least 2")
    if c <= 0 or eps <= 0:
        raise ModelError("c and eps must be positive")
    edges = [(i, i + 1) for i in range(n - 1)]
    return EnergyModel(n, [[0.0, eps]] * n, edges, [_attractive(c)] * len(edges),
                       exclusion_hop(np.zeros(n, dtype=int), 1, n))


def avgcut_f(n: int, lam: float) -> np.ndarray:
    m = np.arange(n + 1)
    return -lam * m * (n - m)


def gen_avgcut_chain(n: int, c: float, lam: float) -> EnergyModel:
    if n < 2 or n % 2:
        raise ModelError("n must be even and at least 2")
    if c <= 0 or lam < 0:
        raise ModelError("c must be positive and lambda non-negative")
    edges = [(i, i + 1) for i in range(n - 1)]
    return EnergyModel(n, np.zeros((n, 2)), edges, [_attractive(c)] * len(edges),
                       CardinalityHop(avgcut_f(n, lam)))


def random_tree_edges(n: int, rng: np.random.Generator) -> list:
    """Uniform labelled tree on ``n`` vertices from a random Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [int(v) for v in rng.integers(0, n, size=n - 2)]
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = next(u for u in range(n) if degree[u] == 1)
        edges.append(tuple(sorted((leaf, v))))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (v for v in range(n) if degree[v] == 1)
    edges.append((u, w))
    return sorted(edges)


def gen_hamming_tree(n: int, lam: float, k: int, seed: int) -> EnergyModel:
    """Random attractive tree whose MAP is all-zeros, with a Hamming ball of radius k excluded."""
    if not 1 <= k <= n:
        raise ModelError(f"need 1 <= k <= n, got k={k}")
    rng = np.random.default_rng(seed)
    edges = random_tree_edges(n, rng)
    unary = np.zeros((n, 2))
    unary[:, 1] = rng.uniform(0.0, 1.0, size=n)
    return EnergyModel(n, unary, edges, [_attractive(lam)] * len(edges),
                       exclusion_hop(np.zeros(n, dtype=int), k, n))


def grid_edges(rows: int, cols: int) -> list:
    idx = lambda r, c: r * cols + c  # noqa: E731
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
    return sorted(edges)


def count_profile(model: EnergyModel) -> np.ndarray:
    """Minimum unary+pairwise energy among assignments with exactly ``m`` ones."""
    if model.n > MAX_BRUTE_MAP:
        raise ModelError(f"count profile needs enumeration, limited to n <= {MAX_BRUTE_MAP}")
    prof = np.full(model.n + 1, INF)
    for xs in iter_assignments(model.n):
        e = model.energies(xs, include_hop=False)
        np.minimum.at(prof, xs.sum(axis=1), e)
    return prof


def tune_avgcut_lambda(base: EnergyModel, tol: float = 1e-9) -> float:
    """Largest lambda for which the average-cut optimum of ``base`` is zero.

    With ``C(m)`` the cheapest cut having ``m`` ones, the optimum is
    ``min_m C(m) - lambda m (n - m)``; it stays at zero (the uncut all-ones
    assignment) exactly up to ``lambda* = min_{0<m<n} C(m) / (m (n - m))``.
    """
    n = base.n
    prof = count_profile(base)
    m = np.arange(1, n)
    ok = prof[1:n] < INF
    if not ok.any():
        raise ModelError("no balanced assignment is allowed; cannot tune lambda")
    lam = float((prof[1:n][ok] / (m[ok] * (n - m[ok]))).min())
    _, e = brute_force_map(base.with_hop(CardinalityHop(avgcut_f(n, lam))))
    if abs(e) > tol:
        raise ModelError(f"lambda tuning failed: optimum {e!r} is not zero")
    return lam


def gen_avgcut_grid(rows: int, cols: int, seed: int, lam: float | None = None) -> EnergyModel:
    """4-connected grid with random attractive costs in (0, 1], x_0 pinned to 1, average-cut HOP.

    Without ``lam`` the reward is tuned so that the optimal energy is zero
    (needs the exact oracle, so rows*cols <= 25).
    """
    n = rows * cols
    if lam is None and n > MAX_BRUTE_MAP:
        raise ModelError(f"lambda auto-tuning needs rows*cols <= {MAX_BRUTE_MAP}; pass lambda explicitly")
    rng = np.random.default_rng(seed)
    edges = grid_edges(rows, cols)
    costs = 1.0 - rng.random(len(edges))
    unary = np.zeros((n, 2))
    unary[0, 0] = INF
    base = EnergyModel(n, unary, edges, [_attractive(c) for c in costs])
    if lam is None:
        lam = tune_avgcut_lambda(base)
    return base.with_hop(CardinalityHop(avgcut_f(n, lam)))
