"""Block coordinate ascent on the dual of the edge-consistency LP.

Dual variables:

* ``lam[e, 0]`` / ``lam[e, 1]`` -- edge-to-node messages of model edge ``e = (i, j)``
  towards ``i`` and ``j``;
* ``delta_edge[k]`` -- HOP-to-edge message for the ``k``-th edge of ``S``;
* ``delta_node[k]`` -- HOP-to-node message for the ``k``-th vertex not covered by ``S``.

Reparameterization::

    th_i  = theta_i  + sum_{e ~ i} lam[e -> i]          (+ delta_i   if i uncovered)
    th_ij = theta_ij - lam[e -> i] - lam[e -> j]        (+ delta_ij  if ij in S)
    th_a  = theta_a  - sum_S delta_ij - sum_uncovered delta_i

and the lower bound is ``B = sum min th_i + sum min th_ij + min th_a``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .exact import CliqueTree, junction_min
from .hop import (
    ArgminSet,
    EdgeSet,
    M_MAX,
    _message_potentials,
    hop_min,
    hop_min_marginals,
)
from .model import (
    FORBIDDEN,
    INF,
    CardinalityHop,
    EnergyModel,
    InfeasibleError,
    PatternHop,
    as_assignment,
    saturate,
)

log = logging.getLogger(__name__)

#: margin added above the largest finite entry when a forbidden entry is clamped
CLAMP_MARGIN = 1e6


@dataclass
class SolverConfig:
    max_sweeps: int = 2000
    tol_bound: float = 1e-8
    cert_tol: float = 1e-6
    m_max: int = M_MAX
    decode_every: int = 5   # full primal decoding cadence, in sweeps


@dataclass
class DualState:
    lam: np.ndarray
    delta_edge: np.ndarray
    delta_node: np.ndarray

    @classmethod
    def zeros(cls, model: EnergyModel, es: EdgeSet) -> "DualState":
        return cls(np.zeros((len(model.edges), 2, 2)),
                   np.zeros((len(es.edges), 2, 2)),
                   np.zeros((len(es.singletons), 2)))

    def copy(self) -> "DualState":
        return DualState(self.lam.copy(), self.delta_edge.copy(), self.delta_node.copy())

    def check(self, model: EnergyModel, es: EdgeSet):
        assert self.lam.shape == (len(model.edges), 2, 2)
        assert self.delta_edge.shape == (len(es.edges), 2, 2)
        assert self.delta_node.shape == (len(es.singletons), 2)
        for a in (self.lam, self.delta_edge, self.delta_node):
            assert np.isfinite(a).all() and (np.abs(a) < FORBIDDEN).all()


def clamp(table: np.ndarray) -> np.ndarray:
    """Replace forbidden entries by ``largest finite entry + CLAMP_MARGIN``."""
    t = np.array(table, dtype=float)
    bad = t >= FORBIDDEN
    if bad.all():
        raise InfeasibleError("a block has no allowed configuration")
    if bad.any():
        t[bad] = t[~bad].max() + CLAMP_MARGIN
    return t


def _edge_array(model: EnergyModel) -> np.ndarray:
    return np.asarray(model.edges, dtype=np.int64).reshape(-1, 2)


def _message_sums(model: EnergyModel, es: EdgeSet, st: DualState) -> np.ndarray:
    """Finite part of the reparameterized unaries (everything but ``theta_i``)."""
    acc = np.zeros((model.n, 2))
    e = _edge_array(model)
    if len(e):
        np.add.at(acc, e[:, 0], st.lam[:, 0])
        np.add.at(acc, e[:, 1], st.lam[:, 1])
    if es.singletons:
        acc[list(es.singletons)] += st.delta_node
    return acc


def _s_positions(model: EnergyModel, es: EdgeSet) -> np.ndarray:
    """Index into ``delta_edge`` for every model edge, or -1."""
    pos = np.full(len(model.edges), -1, dtype=np.int64)
    for k, e in enumerate(es.edges):
        pos[model.edge_index[e]] = k
    return pos


def reparameterized_unary(model: EnergyModel, es: EdgeSet, st: DualState) -> np.ndarray:
    return saturate(model.unary + _message_sums(model, es, st))


def reparameterized_pairwise(model: EnergyModel, es: EdgeSet, st: DualState) -> np.ndarray:
    t = model.pairwise - st.lam[:, 0][:, :, None] - st.lam[:, 1][:, None, :]
    pos = _s_positions(model, es)
    inside = pos >= 0
    t[inside] += st.delta_edge[pos[inside]]
    return saturate(t)


def reparameterized_total(model: EnergyModel, es: EdgeSet, st: DualState, xs: np.ndarray) -> np.ndarray:
    """Sum of all reparameterized terms on a batch of assignments."""
    from .exact import reparameterized_hop_values

    xs = np.asarray(xs, dtype=np.int8)
    th_i = reparameterized_unary(model, es, st)
    th_ij = reparameterized_pairwise(model, es, st)
    tot = th_i[np.arange(model.n), xs].sum(axis=-1)
    e = _edge_array(model)
    if len(e):
        tot = tot + th_ij[np.arange(len(e)), xs[:, e[:, 0]], xs[:, e[:, 1]]].sum(axis=-1)
    tot = tot + reparameterized_hop_values(model.hop, xs, es.edges, st.delta_edge,
                                           es.singletons, st.delta_node)
    return saturate(tot)


def hop_min_value(model: EnergyModel, es: EdgeSet, st: DualState) -> float:
    """``min_x th_a(x)`` without enumerating minimizers."""
    hop = model.hop
    if isinstance(hop, CardinalityHop):
        tree = es.tree(hop.flip_mask)
        sw = tree.upward(_message_potentials(es, tree, st.delta_edge, st.delta_node))
        value = float(sw.total(hop.f).min())
    elif isinstance(hop, PatternHop):
        tree = es.tree()
        base = _message_potentials(es, tree, st.delta_edge, st.delta_node)
        from .hop import _with_unary
        value = min(float(tree.upward(_with_unary(tree, base, w)).total().min())
                    for w in hop.patterns)
    else:
        value = hop_min(hop, es, st.delta_edge, st.delta_node, m_max=0)[0]
    if value >= FORBIDDEN:
        raise InfeasibleError("the reparameterized HOP forbids every assignment")
    return value


def dual_bound(model: EnergyModel, es: EdgeSet, st: DualState) -> float:
    th_i = reparameterized_unary(model, es, st)
    th_ij = reparameterized_pairwise(model, es, st)
    b = th_i.min(axis=1).sum()
    if len(th_ij):
        b += th_ij.reshape(-1, 4).min(axis=1).sum()
    if b >= FORBIDDEN:
        raise InfeasibleError("a unary or pairwise term forbids all of its labels")
    return float(b + hop_min_value(model, es, st))


# -- block updates -------------------------------------------------------------


def update_pairwise_block(model: EnergyModel, es: EdgeSet, st: DualState, e: int,
                          msg_sums: np.ndarray | None = None, s_pos: np.ndarray | None = None) -> None:
    """MPLP edge update for model edge ``e``, in place.

    ``msg_sums`` (from :func:`_message_sums`) is kept current when given.
    """
    i, j = model.edges[e]
    if msg_sums is None:
        msg_sums = _message_sums(model, es, st)
    if s_pos is None:
        s_pos = _s_positions(model, es)
    eta_i = model.unary[i] + msg_sums[i] - st.lam[e, 0]
    eta_j = model.unary[j] + msg_sums[j] - st.lam[e, 1]
    base = model.pairwise[e]
    if s_pos[e] >= 0:
        base = base + st.delta_edge[s_pos[e]]
    new_i, new_j = _split_block(base, eta_i, eta_j)
    msg_sums[i] += new_i - st.lam[e, 0]
    msg_sums[j] += new_j - st.lam[e, 1]
    st.lam[e, 0] = new_i
    st.lam[e, 1] = new_j


def _split_block(base: np.ndarray, eta_i: np.ndarray, eta_j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """New edge-to-node messages for one edge block, exact with forbidden entries.

    ``base`` is the edge table (with its HOP message), ``eta_*`` the endpoint
    unaries without this edge's messages.  Allowed labels get half of the
    joint min-marginal.  Messages on labels that are forbidden anyway are
    chosen so the corresponding rows of the edge table sit a margin above
    everything else and never decide its minimum.
    """
    g = base + eta_i[:, None] + eta_j[None, :]
    if g.max() < FORBIDDEN:
        return 0.5 * g.min(axis=1) - eta_i, 0.5 * g.min(axis=0) - eta_j
    g, base = saturate(g), saturate(base)
    eta_i, eta_j = saturate(eta_i), saturate(eta_j)
    ok = g < FORBIDDEN
    if not ok.any():
        raise InfeasibleError("an edge block has no allowed configuration")
    r = np.where(ok, g, np.inf).min(axis=1)
    c = np.where(ok, g, np.inf).min(axis=0)
    fi, fj = eta_i < FORBIDDEN, eta_j < FORBIDDEN
    new_i = np.zeros(2)
    new_j = np.zeros(2)
    # labels with a finite unary but no allowed partner: push the unary up instead
    ri, cj = np.isfinite(r), np.isfinite(c)
    new_i[fi & ri] = 0.5 * r[fi & ri] - eta_i[fi & ri]
    new_j[fj & cj] = 0.5 * c[fj & cj] - eta_j[fj & cj]
    if (fi & ~ri).any():
        top = (0.5 * r[ri]).max() + CLAMP_MARGIN
        new_i[fi & ~ri] = top - eta_i[fi & ~ri]
    if (fj & ~cj).any():
        top = (0.5 * c[cj]).max() + CLAMP_MARGIN
        new_j[fj & ~cj] = top - eta_j[fj & ~cj]
    fin = base < FORBIDDEN
    if not (fi.all() and fj.all()):
        rows = fi
        t = base - new_i[:, None] - new_j[None, :]
        ceiling = t[fin & rows[:, None] & fj[None, :]].max(initial=0.0) + CLAMP_MARGIN
        for b in np.flatnonzero(~fj):
            sel = fin[:, b] & rows
            if sel.any():
                new_j[b] = (base[sel, b] - new_i[sel]).min() - ceiling
        for a in np.flatnonzero(~fi):
            sel = fin[a]
            if sel.any():
                new_i[a] = (base[a, sel] - new_j[sel]).min() - ceiling
    return new_i, new_j


def _push_unaries(model: EnergyModel, es: EdgeSet, st: DualState) -> None:
    """Move each covered vertex's reparameterized unary into its S-edges.

    Only edge-to-node messages change; the bound cannot decrease because a sum
    of minima never exceeds the minimum of the sum.
    """
    if not es.edges:
        return
    th_i = reparameterized_unary(model, es, st)
    deg = np.zeros(model.n)
    for i, j in es.edges:
        deg[i] += 1
        deg[j] += 1
    share = {v: clamp(th_i[v]) / deg[v] for v in es.covered}
    for i, j in es.edges:
        e = model.edge_index[(i, j)]
        st.lam[e, 0] -= share[i]
        st.lam[e, 1] -= share[j]


def update_hop_block(model: EnergyModel, es: EdgeSet, st: DualState) -> None:
    """Min-marginal-splitting update of every HOP message at once, in place."""
    n_blocks = len(es.edges) + len(es.singletons)
    if n_blocks == 0:
        return
    _push_unaries(model, es, st)
    lam_only = DualState(st.lam, np.zeros_like(st.delta_edge), np.zeros_like(st.delta_node))
    eta_edge = np.empty_like(st.delta_edge)
    eta_node = np.empty_like(st.delta_node)
    if len(es.edges):
        th_ij = reparameterized_pairwise(model, es, lam_only)
        for k, edge in enumerate(es.edges):
            eta_edge[k] = clamp(th_ij[model.edge_index[edge]])
    if es.singletons:
        th_i = reparameterized_unary(model, es, lam_only)
        for k, v in enumerate(es.singletons):
            eta_node[k] = clamp(th_i[v])
    mm = hop_min_marginals(model.hop, es, -eta_edge, -eta_node)
    for k in range(len(es.edges)):
        st.delta_edge[k] = clamp(mm.edge[k]) / n_blocks - eta_edge[k]
    for k in range(len(es.singletons)):
        st.delta_node[k] = clamp(mm.node[k]) / n_blocks - eta_node[k]


# -- decoding and the solve loop --------------------------------------------------


def _structure_argmin(model: EnergyModel, es: EdgeSet, th_i: np.ndarray, th_ij: np.ndarray) -> np.ndarray:
    """Argmin of the S-structured part (S edges plus all unaries) of the reparameterization."""
    tree: CliqueTree = es.tree()
    pots = [np.zeros((2,) * len(c)) for c in tree.cliques[:-1]] + [np.zeros(())]
    for (i, j) in es.edges:
        c = es.forest.edge_clique[(i, j)]
        clique = tree.cliques[c]
        shape = [1] * len(clique)
        shape[clique.index(i)] = 2
        shape[clique.index(j)] = 2
        pots[c] = pots[c] + th_ij[model.edge_index[(i, j)]].reshape(shape)
    for c in range(len(tree.cliques) - 1):
        clique = tree.cliques[c]
        for v in tree.home[c]:
            shape = [1] * len(clique)
            shape[clique.index(v)] = 2
            pots[c] = pots[c] + th_i[v].reshape(shape)
    pots = [saturate(p) for p in pots]
    sw = tree.upward(pots)
    value = float(sw.total().min())
    x = np.argmin(th_i, axis=1).astype(np.int8)
    if value < FORBIDDEN:
        for xd in sw.enumerate_argmins(value, tol=1e-7, limit=1):
            for v, b in xd.items():
                x[v] = b
    return x


def _best(model: EnergyModel, candidates) -> tuple[np.ndarray, float]:
    cands = np.unique(np.array(candidates, dtype=np.int8).reshape(len(candidates), model.n), axis=0)
    energies = model.energies(cands)
    k = int(np.argmin(energies))  # np.unique sorts rows, so this is the lexicographic tie-break
    return cands[k], float(energies[k])


def decode(model: EnergyModel, es: EdgeSet, st: DualState, argmins: ArgminSet | None = None):
    """Best of the unary, HOP-argmin and structured candidates under the true energy."""
    th_i = reparameterized_unary(model, es, st)
    th_ij = reparameterized_pairwise(model, es, st)
    cands = [np.argmin(th_i, axis=1), _structure_argmin(model, es, th_i, th_ij)]
    if argmins is None:
        try:
            argmins = hop_min(model.hop, es, st.delta_edge, st.delta_node, m_max=1)[1]
        except InfeasibleError:
            argmins = None
    if argmins is not None and len(argmins):
        cands.append(argmins.assignments[0])
    return _best(model, cands)


@dataclass
class SolveResult:
    bound_trace: list
    final_state: DualState
    decoded: np.ndarray
    decoded_energy: float
    bound: float
    certificate: bool
    status: str
    hop_argmins: ArgminSet | None = None
    edge_set: EdgeSet | None = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return self.decoded_energy - self.bound

    @property
    def sweeps(self) -> int:
        return len(self.bound_trace) - 1

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep", "bound"])
        for k, b in enumerate(self.bound_trace):
            w.writerow([k, repr(float(b))])
        return buf.getvalue()

    def report(self) -> dict:
        infeasible = self.bound >= FORBIDDEN
        return {
            "status": self.status,
            "bound": None if infeasible else self.bound,
            "decoded": [int(v) for v in self.decoded],
            "energy": "inf" if self.decoded_energy >= FORBIDDEN else self.decoded_energy,
            "gap": None if infeasible or self.decoded_energy >= FORBIDDEN else self.gap,
            "certificate": self.certificate,
            "sweeps": self.sweeps,
            "edges_in_S": [list(e) for e in self.edge_set.edges] if self.edge_set else None,
            "trace_csv": self.trace_csv(),
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=1)


def warm_state(model: EnergyModel, old_es: EdgeSet, old: DualState, new_es: EdgeSet) -> DualState:
    """Carry a dual state over to a superset ``new_es`` without changing the reparameterization.

    Messages on edges already in ``S`` are kept and new HOP-to-edge messages start
    at zero.  A vertex that stops being a singleton hands its HOP message to the
    first new edge covering it, with the matching edge-to-node message shifted so
    that every reparameterized term (and hence the bound) is unchanged.
    """
    st = DualState.zeros(model, new_es)
    st.lam[:] = old.lam
    old_pos = {e: k for k, e in enumerate(old_es.edges)}
    for k, e in enumerate(new_es.edges):
        if e in old_pos:
            st.delta_edge[k] = old.delta_edge[old_pos[e]]
    new_single = set(new_es.singletons)
    for k_old, v in enumerate(old_es.singletons):
        d = old.delta_node[k_old]
        if v in new_single:
            st.delta_node[new_es.singletons.index(v)] = d
            continue
        k, e = next((k, e) for k, e in enumerate(new_es.edges) if v in e and e not in old_pos)
        side = 0 if e[0] == v else 1
        if side == 0:
            st.delta_edge[k] += d[:, None]
        else:
            st.delta_edge[k] += d[None, :]
        st.lam[model.edge_index[e], side] += d
    return st


def solve(model: EnergyModel, es: EdgeSet, config: SolverConfig | None = None,
          state: DualState | None = None, incumbent=None) -> SolveResult:
    """Run sweeps (all edge blocks ascending, then the HOP block) until the bound settles.

    ``incumbent`` is an assignment known from elsewhere (e.g. an earlier
    round); it competes with the decoded candidates for the certificate.
    """
    cfg = config or SolverConfig()
    st = DualState.zeros(model, es) if state is None else state.copy()
    st.check(model, es)
    s_pos = _s_positions(model, es)
    trace = [dual_bound(model, es, st)]
    status = "max_sweeps"
    x, energy = decode(model, es, st)
    if incumbent is not None:
        x, energy = _best(model, [x, as_assignment(incumbent, model.n)])
    if energy - trace[-1] <= cfg.cert_tol:
        status = "certified"
    for sweep in range(cfg.max_sweeps):
        if status == "certified":
            break
        sums = _message_sums(model, es, st)
        for e in range(len(model.edges)):
            update_pairwise_block(model, es, st, e, sums, s_pos)
        update_hop_block(model, es, st)
        b = dual_bound(model, es, st)
        if b < trace[-1] - 1e-9:
            log.warning("bound decreased by %.3g in sweep %d", trace[-1] - b, sweep + 1)
        trace.append(b)
        settled = abs(b - trace[-2]) < cfg.tol_bound
        if settled or (sweep + 1) % cfg.decode_every == 0 or energy - b <= cfg.cert_tol:
            x_new, e_new = decode(model, es, st)
            if e_new < energy or (e_new == energy and tuple(x_new) < tuple(x)):
                x, energy = x_new, e_new
        if energy - b <= cfg.cert_tol:
            status = "certified"
        elif settled:
            status = "stalled"
            break
    bound = trace[-1]
    try:
        _, argmins = hop_min(model.hop, es, st.delta_edge, st.delta_node, m_max=cfg.m_max)
    except InfeasibleError:
        argmins = None
    if argmins is not None and len(argmins):
        x2, e2 = _best(model, [x, argmins.assignments[0]])
        if e2 < energy:
            x, energy = x2, e2
    cert = energy - bound <= cfg.cert_tol and bound < FORBIDDEN
    if cert:
        status = "certified"
    return SolveResult(trace, st, x, energy, bound, cert, status, argmins, es)
