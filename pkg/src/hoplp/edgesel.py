"""Choosing the consistency set S: spanning tree start and weak-cycle-agreement growth."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .dual import (
    DualState,
    SolveResult,
    SolverConfig,
    clamp,
    reparameterized_pairwise,
    solve,
    warm_state,
)
from .exact import treewidth_upper_bound
from .hop import ArgminSet, EdgeSet, hop_min
from .model import FORBIDDEN, EnergyModel, ModelError

log = logging.getLogger(__name__)

WCA_EPS = 1e-7


@dataclass
class EdgeScore:
    edge: tuple
    wca: float
    spanning_weight: float
    admissible: bool


@dataclass
class SelectionRecord:
    round: int
    edges_in_S: int
    edge_added: tuple | None
    wca: float | None
    treewidth_bound: int
    converged_bound: float


@dataclass
class SelectionTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""

    def bounds(self) -> list:
        out = []
        for r in self.records:
            if not out or out[-1][0] != r.round:
                out.append((r.round, r.converged_bound))
        return [b for _, b in out]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "edges_in_S", "edge_added", "wca", "treewidth_bound", "converged_bound"])
        for r in self.records:
            w.writerow([r.round, r.edges_in_S,
                        "" if r.edge_added is None else f"{r.edge_added[0]}-{r.edge_added[1]}",
                        "" if r.wca is None else repr(float(r.wca)),
                        r.treewidth_bound, repr(float(r.converged_bound))])
        return buf.getvalue()


def spanning_weights(model: EnergyModel) -> np.ndarray:
    """``max(theta_ij) - min(theta_ij)`` per edge (forbidden entries count as the largest finite + 1)."""
    t = model.pairwise.reshape(len(model.edges), 4)
    out = np.zeros(len(model.edges))
    for e, row in enumerate(t):
        fin = row[row < FORBIDDEN]
        hi = fin.max() + 1.0 if (row >= FORBIDDEN).any() else fin.max()
        out[e] = hi - fin.min()
    return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def initial_tree(model: EnergyModel) -> EdgeSet:
    """Maximum-weight spanning forest under :func:`spanning_weights` (Kruskal)."""
    w = spanning_weights(model)
    order = sorted(range(len(model.edges)), key=lambda e: (-w[e], model.edges[e]))
    uf = _UnionFind(model.n)
    chosen = [model.edges[e] for e in order if uf.union(*model.edges[e])]
    return EdgeSet.for_model(model, chosen)


def wca_score(argmins: ArgminSet, table: np.ndarray, edge: tuple) -> float:
    """Weak cycle agreement of ``edge`` against the HOP minimizers.

    Minimum of the reparameterized edge table over the minimizers' values of
    ``(x_i, x_j)``, minus the table's unconstrained minimum.  With a truncated
    argmin set the score is optimistic: it can only overstate the true value.
    """
    if not len(argmins):
        raise ModelError("WCA needs a non-empty argmin set")
    i, j = edge
    xs = argmins.as_array()
    t = clamp(table)
    return float(t[xs[:, i], xs[:, j]].min() - t.min())


def _absorbed_state(model: EnergyModel, es: EdgeSet, st: DualState, picked: list,
                    th_ij: np.ndarray) -> tuple[EdgeSet, np.ndarray, np.ndarray]:
    """HOP messages for ``S + picked`` that fold each picked edge table into the HOP term."""
    ext = es.extended(picked)
    d_edge = np.zeros((len(ext.edges), 2, 2))
    d_node = np.zeros((len(ext.singletons), 2))
    old = {e: k for k, e in enumerate(es.edges)}
    for k, e in enumerate(ext.edges):
        if e in old:
            d_edge[k] = st.delta_edge[old[e]]
        else:
            d_edge[k] = -clamp(th_ij[model.edge_index[e]])
    for k_old, v in enumerate(es.singletons):
        d = st.delta_node[k_old]
        if v in ext.singletons:
            d_node[ext.singletons.index(v)] = d
            continue
        k, e = next((k, e) for k, e in enumerate(ext.edges) if v in e and e not in old)
        d_edge[k] += d[:, None] if e[0] == v else d[None, :]
    return ext, d_edge, d_node


def score_edges(model: EnergyModel, es: EdgeSet, argmins: ArgminSet, th_ij: np.ndarray,
                exclude: set, tw_max: int | None) -> list:
    w = spanning_weights(model)
    scores = []
    for e, edge in enumerate(model.edges):
        if edge in exclude:
            continue
        if tw_max is None:
            ok = True
        else:
            ok = treewidth_upper_bound(list(exclude) + [edge]).width <= tw_max
        wca = wca_score(argmins, th_ij[e], edge) if ok else 0.0
        scores.append(EdgeScore(edge, wca, float(w[e]), ok))
    return scores


def select_and_add(model: EnergyModel, es: EdgeSet, state: DualState, argmins: ArgminSet,
                   k: int = 8, tw_max: int | None = 6, wca_eps: float = WCA_EPS,
                   m_max: int | None = None) -> tuple[EdgeSet, list]:
    """Add up to ``k`` edges with the largest positive WCA, re-scoring after each pick.

    Returns the grown edge set and ``(edge, wca, truncated)`` for every pick.
    """
    th_ij = reparameterized_pairwise(model, es, state)
    picked, picks = [], []
    current = argmins
    m_max = argmins.m_max if m_max is None else m_max
    for _ in range(k):
        in_s = set(es.edges) | set(picked)
        scores = [s for s in score_edges(model, es, current, th_ij, in_s, tw_max) if s.admissible]
        thresh = 10 * wca_eps if current.truncated else wca_eps
        best = max((s for s in scores if s.wca > thresh), key=lambda s: (s.wca, [-v for v in s.edge]),
                   default=None)
        if best is None:
            break
        if current.truncated:
            log.info("argmin set truncated at %d; WCA of %s is optimistic", current.m_max, best.edge)
        picked.append(best.edge)
        picks.append((best.edge, best.wca, current.truncated))
        if len(picked) < k:
            ext, d_edge, d_node = _absorbed_state(model, es, state, picked, th_ij)
            _, current = hop_min(model.hop, ext, d_edge, d_node, m_max=m_max)
    new_es = es.extended(picked) if picked else es
    return new_es, picks


def tighten_loop(model: EnergyModel, k: int = 8, tw_max: int | None = 6, max_rounds: int = 50,
                 config: SolverConfig | None = None, wca_eps: float = WCA_EPS,
                 initial: EdgeSet | None = None) -> tuple[EdgeSet, SelectionTrace, SolveResult]:
    """Spanning tree start, then alternate solving LP_S and WCA edge additions."""
    cfg = config or SolverConfig()
    es = initial_tree(model) if initial is None else initial
    trace = SelectionTrace()
    state = None
    result = None
    for rnd in range(max_rounds):
        result = solve(model, es, cfg, state, None if result is None else result.decoded)
        base = dict(round=rnd, edges_in_S=len(es.edges), treewidth_bound=es.tw_bound,
                    converged_bound=result.bound)
        if result.certificate:
            trace.records.append(SelectionRecord(edge_added=None, wca=None, **base))
            trace.stop_reason = "certified"
            break
        if result.hop_argmins is None or not len(result.hop_argmins):
            trace.records.append(SelectionRecord(edge_added=None, wca=None, **base))
            trace.stop_reason = "no HOP minimizers"
            break
        new_es, picks = select_and_add(model, es, result.final_state, result.hop_argmins,
                                       k, tw_max, wca_eps, cfg.m_max)
        if not picks:
            trace.records.append(SelectionRecord(edge_added=None, wca=None, **base))
            trace.stop_reason = "WCA fixed point, gap positive"
            break
        for edge, wca, _ in picks:
            trace.records.append(SelectionRecord(edge_added=edge, wca=wca, **base))
        state = warm_state(model, es, result.final_state, new_es)
        es = new_es
    else:
        trace.stop_reason = "max rounds"
    return es, trace, result
