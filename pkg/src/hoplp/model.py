"""Energy models over binary variables with one high-order potential.

The energy of an assignment ``x`` is::

    E(x) = sum_i theta_i(x_i) + sum_{ij} theta_ij(x_i, x_j) + theta_alpha(x)

Infinite energies are stored as the finite sentinel :data:`INF` and every
addition saturates at it, so message arithmetic never meets ``inf - inf``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

INF = 1e15
#: anything at or above this is treated as forbidden
FORBIDDEN = 1e14


class ModelError(ValueError):
    """Malformed model, assignment or model document."""


class InfeasibleError(RuntimeError):
    """Every assignment is forbidden (the minimum sits at the sentinel)."""


def saturate(a):
    """Map every value at or above :data:`FORBIDDEN` to :data:`INF`."""
    if isinstance(a, (float, int, np.floating, np.integer)):
        return INF if a >= FORBIDDEN else float(a)
    a = np.asarray(a, dtype=float)
    return np.where(a >= FORBIDDEN, INF, a)


def is_forbidden(a):
    return np.asarray(a) >= FORBIDDEN


def _extended(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if np.isnan(arr).any():
        raise ModelError(f"{what}: NaN energy")
    if np.isneginf(arr).any():
        raise ModelError(f"{what}: negative infinity is not allowed")
    arr[arr >= FORBIDDEN] = INF
    arr.setflags(write=False)
    return arr


def as_assignment(x, n: int) -> np.ndarray:
    """Validate ``x`` as a vector of ``n`` binary labels."""
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ModelError(f"assignment length {arr.shape} does not match n={n}")
    if not np.isin(arr, (0, 1)).all():
        raise ModelError("assignment entries must be 0 or 1")
    return arr.astype(np.int8)


# -- high-order potentials ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class CardinalityHop:
    """``theta_alpha(x) = f(sum_i x_i XOR flip_mask_i)``."""

    f: np.ndarray
    flip_mask: np.ndarray

    def __init__(self, f, flip_mask=None):
        f = _extended(f, "cardinality f")
        if f.ndim != 1 or f.size < 1:
            raise ModelError("cardinality f must be a non-empty vector")
        if (f >= INF).all():
            raise ModelError("cardinality f needs at least one finite entry")
        n = f.size - 1
        if flip_mask is None:
            flip_mask = np.zeros(n, dtype=np.int8)
        flip = np.asarray(flip_mask)
        if flip.shape != (n,) or not np.isin(flip, (0, 1)).all():
            raise ModelError(f"flip_mask must be {n} bits")
        flip = flip.astype(np.int8)
        flip.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "flip_mask", flip)

    @property
    def n(self) -> int:
        return self.f.size - 1

    def values(self, xs: np.ndarray) -> np.ndarray:
        counts = (xs ^ self.flip_mask).sum(axis=-1)
        return self.f[counts]

    def __eq__(self, other):
        return (isinstance(other, CardinalityHop)
                and np.array_equal(self.f, other.f)
                and np.array_equal(self.flip_mask, other.flip_mask))


@dataclass(frozen=True, eq=False)
class PatternHop:
    """``theta_alpha(x) = min_k sum_i w^(k)_i x_i`` (lower envelope of K linear terms)."""

    patterns: np.ndarray

    def __init__(self, patterns):
        w = np.array(patterns, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1:
            raise ModelError("pattern HOP needs K >= 1 weight vectors")
        if not np.isfinite(w).all() or (np.abs(w) >= FORBIDDEN).any():
            raise ModelError("pattern weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "patterns", w)

    @property
    def n(self) -> int:
        return self.patterns.shape[1]

    def values(self, xs: np.ndarray) -> np.ndarray:
        return (xs @ self.patterns.T).min(axis=-1)

    def __eq__(self, other):
        return isinstance(other, PatternHop) and np.array_equal(self.patterns, other.patterns)


@dataclass(frozen=True, eq=False)
class TableHop:
    """Explicit table over all ``2**n`` assignments; index bit ``n-1-i`` is ``x_i``.

    Only meant for oracles and tests (n <= 20).
    """

    table: np.ndarray

    def __init__(self, values):
        t = _extended(values, "table HOP")
        n = int(round(np.log2(max(t.size, 1))))
        if t.ndim != 1 or t.size != 2 ** n or n > 20:
            raise ModelError("table HOP must have exactly 2**n entries (n <= 20)")
        object.__setattr__(self, "table", t)

    @property
    def n(self) -> int:
        return int(round(np.log2(self.table.size)))

    def values(self, xs: np.ndarray) -> np.ndarray:
        n = xs.shape[-1]
        weights = 1 << np.arange(n - 1, -1, -1)
        return self.table[(xs.astype(np.int64) * weights).sum(axis=-1)]

    def __eq__(self, other):
        return isinstance(other, TableHop) and np.array_equal(self.table, other.table)


Hop = Union[CardinalityHop, PatternHop, TableHop]


def hop_value(hop: Hop, x) -> float:
    """Value of the HOP at a single assignment."""
    x = as_assignment(x, hop.n)
    return float(hop.values(x[None, :])[0])


def zero_hop(n: int) -> CardinalityHop:
    return CardinalityHop(np.zeros(n + 1))


def exclusion_hop(x_star, k: int, n: int) -> CardinalityHop:
    """Forbid every assignment within Hamming distance ``< k`` of ``x_star``."""
    x_star = as_assignment(x_star, n)
    if not 1 <= k <= n:
        raise ModelError(f"exclusion radius must satisfy 1 <= k <= n, got k={k}, n={n}")
    f = np.where(np.arange(n + 1) < k, INF, 0.0)
    return CardinalityHop(f, flip_mask=x_star)


# -- the model ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnergyModel:
    n: int
    unary: np.ndarray
    edges: tuple
    pairwise: np.ndarray
    hop: Hop
    edge_index: dict = field(repr=False)

    def __init__(self, n: int, unary, edges: Sequence, pairwise, hop: Hop | None = None):
        n = int(n)
        if n < 1:
            raise ModelError("n must be positive")
        unary = _extended(unary, "unary")
        if unary.shape != (n, 2):
            raise ModelError(f"unary must have shape ({n}, 2), got {unary.shape}")
        edges = tuple((int(i), int(j)) for i, j in edges)
        pairwise = _extended(np.reshape(pairwise, (len(edges), 2, 2)), "pairwise")
        index = {}
        for e, (i, j) in enumerate(edges):
            if not 0 <= i < j < n:
                raise ModelError(f"edge {e} = ({i}, {j}) violates 0 <= i < j < n={n}")
            if (i, j) in index:
                raise ModelError(f"duplicate edge ({i}, {j})")
            index[(i, j)] = e
        hop = zero_hop(n) if hop is None else hop
        if hop.n != n:
            raise ModelError(f"HOP is over {hop.n} variables, model has {n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "pairwise", pairwise)
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "edge_index", index)

    def __eq__(self, other):
        return (isinstance(other, EnergyModel)
                and self.n == other.n
                and self.edges == other.edges
                and np.array_equal(self.unary, other.unary)
                and np.array_equal(self.pairwise, other.pairwise)
                and self.hop == other.hop)

    def with_hop(self, hop: Hop) -> "EnergyModel":
        return EnergyModel(self.n, self.unary, self.edges, self.pairwise, hop)

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def energies(self, xs: np.ndarray, include_hop: bool = True) -> np.ndarray:
        """Vectorised energy of a batch of assignments, shape ``(B, n)``."""
        xs = np.asarray(xs, dtype=np.int8)
        total = self.unary[np.arange(self.n), xs].sum(axis=-1)
        if self.edges:
            e = np.asarray(self.edges)
            xi, xj = xs[:, e[:, 0]], xs[:, e[:, 1]]
            total = total + self.pairwise[np.arange(len(e)), xi, xj].sum(axis=-1)
        if include_hop:
            total = total + self.hop.values(xs)
        return saturate(total)


def evaluate_energy(model: EnergyModel, x) -> float:
    x = as_assignment(x, model.n)
    return float(model.energies(x[None, :])[0])


# -- JSON model format -------------------------------------------------------


def _enc(v: float):
    return "inf" if v >= FORBIDDEN else float(v)


def _dec(v, where: str) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        raise ModelError(f"{where}: expected a number or \"inf\", got {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _dec_list(seq, length: int | None, where: str) -> list[float]:
    if not isinstance(seq, list):
        raise ModelError(f"{where}: expected an array")
    if length is not None and len(seq) != length:
        raise ModelError(f"{where}: expected {length} entries, got {len(seq)}")
    return [_dec(v, f"{where}[{k}]") for k, v in enumerate(seq)]


def model_to_dict(model: EnergyModel) -> dict:
    hop = model.hop
    if isinstance(hop, CardinalityHop):
        h = {"type": "cardinality", "f": [_enc(v) for v in hop.f],
             "flip_mask": [int(b) for b in hop.flip_mask]}
    elif isinstance(hop, PatternHop):
        h = {"type": "pattern", "patterns": [[float(v) for v in row] for row in hop.patterns]}
    else:
        h = {"type": "table", "values": [_enc(v) for v in hop.table]}
    return {
        "n": model.n,
        "unary": [[_enc(a), _enc(b)] for a, b in model.unary],
        "edges": [{"i": i, "j": j, "theta": [[_enc(v) for v in row] for row in t]}
                  for (i, j), t in zip(model.edges, model.pairwise)],
        "hop": h,
    }


def write_model(model: EnergyModel) -> str:
    return json.dumps(model_to_dict(model), indent=1)


def model_from_dict(doc) -> EnergyModel:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("n", "unary", "edges", "hop"):
        if key not in doc:
            raise ModelError(f"missing field {key!r}")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ModelError(f"n: expected a positive integer, got {n!r}")
    if not isinstance(doc["unary"], list) or len(doc["unary"]) != n:
        raise ModelError(f"unary: expected {n} pairs")
    unary = [_dec_list(p, 2, f"unary[{i}]") for i, p in enumerate(doc["unary"])]

    if not isinstance(doc["edges"], list):
        raise ModelError("edges: expected an array")
    edges, tables = [], []
    for e, item in enumerate(doc["edges"]):
        where = f"edges[{e}]"
        if not isinstance(item, dict) or not {"i", "j", "theta"} <= item.keys():
            raise ModelError(f"{where}: expected an object with i, j, theta")
        i, j = item["i"], item["j"]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (i, j)):
            raise ModelError(f"{where}: indices must be integers")
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"{where}: index out of range for n={n}: ({i}, {j})")
        if i >= j:
            raise ModelError(f"{where}: expected i < j, got ({i}, {j})")
        if not (isinstance(item["theta"], list) and len(item["theta"]) == 2):
            raise ModelError(f"{where}.theta: expected a 2x2 table")
        edges.append((i, j))
        tables.append([_dec_list(r, 2, f"{where}.theta[{a}]") for a, r in enumerate(item["theta"])])

    h = doc["hop"]
    if isinstance(h, list):
        raise ModelError("hop: exactly one HOP per model is supported")
    if not isinstance(h, dict) or "type" not in h:
        raise ModelError("hop: expected an object with a type")
    kind = h["type"]
    if kind == "cardinality":
        f = _dec_list(h.get("f"), n + 1, "hop.f")
        mask = h.get("flip_mask")
        if mask is not None and (not isinstance(mask, list) or len(mask) != n
                                 or any(b not in (0, 1) for b in mask)):
            raise ModelError(f"hop.flip_mask: expected {n} bits")
        hop = CardinalityHop(f, mask)
    elif kind == "pattern":
        pats = h.get("patterns")
        if not isinstance(pats, list) or not pats:
            raise ModelError("hop.patterns: expected a non-empty array")
        hop = PatternHop([_dec_list(p, n, f"hop.patterns[{k}]") for k, p in enumerate(pats)])
    elif kind == "table":
        if n > 20:
            raise ModelError("hop.values: table HOPs are limited to n <= 20")
        hop = TableHop(_dec_list(h.get("values"), 2 ** n, "hop.values"))
    else:
        raise ModelError(f"hop.type: unknown HOP type {kind!r}")

    return EnergyModel(n, unary, edges, tables, hop)


def read_model(text: str) -> EnergyModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(doc)
