"""Globally optimal mode selection / BS association by bipartite matching.

Left side: M transmitters followed by B virtual vertices. Right side: B BS
slots (BS j duplicated b_j times) followed by the M receivers. A
transmitter connects to every slot and to its own receiver; virtual
vertices connect to every receiver with zero weight. Virtual vertices also
get zero-weight completion edges to the BS slots so that a slot may stay
empty; without them every slot would have to be filled by a transmitter.
A maximum-weight perfect matching of this graph is an optimal assignment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import UtilityMatrix

# user left unassigned (only produced by the cellular-only variant)
UNASSIGNED = -1

BRUTE_FORCE_MAX_USERS = 10


class NegativeWeightError(ValueError):
    """Utilities must be shifted to be non-negative before graph construction."""


class MatchingError(RuntimeError):
    """No perfect matching found; the graph construction guarantees one exists."""


def as_loads(loads, num_bs: int | None = None) -> np.ndarray:
    b = np.asarray(loads)
    if b.ndim == 0 and num_bs is not None:
        b = np.full(num_bs, b)
    if b.ndim != 1 or (num_bs is not None and b.shape[0] != num_bs):
        raise ValueError(f"need one load per BS, got shape {b.shape}")
    if not np.all(b == np.round(b)) or np.any(b < 0):
        raise ValueError("loads must be non-negative integers")
    return b.astype(int)


def _matrix(u) -> np.ndarray:
    return u.u if isinstance(u, UtilityMatrix) else np.asarray(u, dtype=float)


def objective(u, assoc) -> float:
    """Sum of u[i, a_i] over assigned users."""
    u = _matrix(u)
    a = np.asarray(assoc)
    on = a >= 0
    return float(np.sum(u[np.nonzero(on)[0], a[on]]))


@dataclass(frozen=True)
class Assignment:
    """Per-user association: 0 = D2D, j = BS j, -1 = unassigned."""
    assoc: np.ndarray
    value: float
    num_bs: int

    @classmethod
    def from_assoc(cls, u, assoc) -> "Assignment":
        um = _matrix(u)
        a = np.asarray(assoc, dtype=int)
        if a.shape != (um.shape[0],):
            raise ValueError("need one association per user")
        if np.any(a < UNASSIGNED) or np.any(a > um.shape[1] - 1):
            raise ValueError("association index out of range")
        return cls(a, objective(um, a), um.shape[1] - 1)

    @property
    def num_users(self) -> int:
        return self.assoc.shape[0]

    @property
    def x(self) -> np.ndarray:
        """Binary (M, N+1) association matrix."""
        x = np.zeros((self.num_users, self.num_bs + 1), dtype=int)
        on = self.assoc >= 0
        x[np.nonzero(on)[0], self.assoc[on]] = 1
        return x

    def bs_loads(self) -> np.ndarray:
        """Number of users on each BS 1..N."""
        return np.bincount(self.assoc[self.assoc >= 1] - 1, minlength=self.num_bs)

    @property
    def d2d_fraction(self) -> float:
        return float(np.mean(self.assoc == 0))

    def violations(self, loads) -> list[str]:
        """Constraint violations; empty when the assignment is feasible."""
        out = []
        x = self.x
        if np.any((x != 0) & (x != 1)):
            out.append("x not binary")
        per_user = x.sum(axis=1)
        if np.any(per_user > 1):
            out.append(f"users with >1 association: {np.nonzero(per_user > 1)[0].tolist()}")
        b = as_loads(loads, self.num_bs)
        over = np.nonzero(x[:, 1:].sum(axis=0) > b)[0]
        if over.size:
            out.append(f"BS over capacity: {(over + 1).tolist()}")
        return out

    def is_feasible(self, loads) -> bool:
        return not self.violations(loads)


@dataclass(frozen=True)
class BipartiteGraph:
    """Dense form of the balanced bipartite graph.

    ``weight[r, c]`` is the edge weight between left vertex r and right
    vertex c, -inf where no edge exists. ``completion`` flags the
    virtual->slot completion edges, which are kept apart from the
    construction edges in ``edge_mask``.
    """
    num_users: int
    loads: np.ndarray
    slot_bs: np.ndarray  # BS index (1..N) of each slot
    weight: np.ndarray
    edge_mask: np.ndarray
    completion: np.ndarray
    shift: float = 0.0
    d2d: bool = True

    @property
    def size(self) -> int:
        return self.weight.shape[0]

    @property
    def num_slots(self) -> int:
        return self.slot_bs.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.edge_mask.sum())

    @property
    def num_completion_edges(self) -> int:
        return int(self.completion.sum())

    def left_kind(self, r: int) -> str:
        return "tx" if r < self.num_users else "virtual"

    def right_kind(self, c: int) -> str:
        return "slot" if c < self.num_slots else "rx"


def shift_constant(u) -> float:
    """Constant that makes every utility non-negative (0 if already so)."""
    lo = float(np.min(_matrix(u)))
    return -lo if lo < 0 else 0.0


def build_graph(u, loads, *, shift: float = 0.0, d2d: bool = True) -> BipartiteGraph:
    """Build the balanced weighted bipartite graph for utilities ``u``.

    ``shift`` is added to every transmitter edge. With ``d2d=False`` the
    tx->rx edge stands for "unassigned" and carries weight 0 (+ shift).
    """
    um = _matrix(u)
    m, n1 = um.shape
    b = as_loads(loads, n1 - 1)
    w_real = um + shift
    if not d2d:
        w_real = w_real.copy()
        w_real[:, 0] = shift
    if np.any(w_real < 0):
        raise NegativeWeightError(
            f"negative utility {float(np.min(w_real))}; pass shift={shift_constant(um)}")

    slot_bs = np.repeat(np.arange(1, n1), b)
    nb = slot_bs.shape[0]
    size = m + nb
    weight = np.full((size, size), -np.inf)
    edge = np.zeros((size, size), dtype=bool)
    completion = np.zeros((size, size), dtype=bool)

    weight[:m, :nb] = w_real[:, slot_bs]
    edge[:m, :nb] = True
    rx = nb + np.arange(m)
    weight[np.arange(m), rx] = w_real[:, 0]
    edge[np.arange(m), rx] = True
    weight[m:, nb:] = 0.0
    edge[m:, nb:] = True
    weight[m:, :nb] = 0.0
    completion[m:, :nb] = True
    return BipartiteGraph(m, b, slot_bs, weight, edge, completion, shift, d2d)


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square cost matrix.

    Shortest augmenting path with vertex potentials, O(n^3). ``inf``
    entries are forbidden edges. Returns ``col`` with ``col[r]`` the column
    matched to row r.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError("cost matrix must be square")
    if n == 0:
        return np.zeros(0, dtype=int)
    # 1-based columns, column 0 is the virtual root
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=int)  # row (1-based) matched to column j, 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            if not np.isfinite(delta):
                raise MatchingError("no perfect matching over finite-cost edges")
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col = np.empty(n, dtype=int)
    col[owner[1:] - 1] = np.arange(n)
    return col


def solve(graph: BipartiteGraph, u=None) -> Assignment:
    """Assignment induced by a maximum-weight perfect matching of ``graph``.

    ``u`` (the unshifted utilities) is used to report the objective; when
    omitted it is recovered from the graph weights.
    """
    col = hungarian(-graph.weight)
    m, nb = graph.num_users, graph.num_slots
    if not np.all(np.isfinite(graph.weight[np.arange(graph.size), col])):
        raise MatchingError("matching uses a non-edge")
    tx_col = col[:m]
    assoc = np.empty(m, dtype=int)
    on_slot = tx_col < nb
    assoc[on_slot] = graph.slot_bs[tx_col[on_slot]]
    on_rx = ~on_slot
    if np.any(tx_col[on_rx] - nb != np.nonzero(on_rx)[0]):
        raise MatchingError("transmitter matched to a foreign receiver")
    assoc[on_rx] = 0 if graph.d2d else UNASSIGNED
    if u is None:
        n = graph.loads.shape[0]
        u = np.zeros((m, n + 1))
        if graph.d2d:
            u[:, 0] = graph.weight[np.arange(m), nb + np.arange(m)] - graph.shift
        for j in range(1, n + 1):
            slots = np.nonzero(graph.slot_bs == j)[0]
            if slots.size:
                u[:, j] = graph.weight[:m, slots[0]] - graph.shift
    return Assignment.from_assoc(u, assoc)


def solve_p1(u, loads, *, d2d: bool = True) -> Assignment:
    """Shift if needed, build the graph and solve. ``d2d=False`` gives cellular-only."""
    um = _matrix(u)
    s = shift_constant(um if d2d else um[:, 1:])
    return solve(build_graph(um, loads, shift=s, d2d=d2d), um)


def brute_force(u, loads, *, chunk: int = 1 << 16) -> Assignment:
    """Exhaustive search over all (N+1)**M associations.

    Ties go to the lexicographically smallest association vector.
    """
    um = _matrix(u)
    m, n1 = um.shape
    if m > BRUTE_FORCE_MAX_USERS:
        raise ValueError(f"brute force refused for M={m} > {BRUTE_FORCE_MAX_USERS}")
    b = as_loads(loads, n1 - 1)
    total = n1 ** m
    powers = n1 ** np.arange(m - 1, -1, -1)
    best_val, best = -np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // powers[None, :]) % n1  # user 0 most significant
        vals = np.zeros(idx.shape[0])
        for i in range(m):
            vals += um[i, digits[:, i]]
        ok = np.ones(idx.shape[0], dtype=bool)
        for j in range(1, n1):
            ok &= (digits == j).sum(axis=1) <= b[j - 1]
        if not ok.any():
            continue
        vals = np.where(ok, vals, -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best = vals[k], digits[k]
    assert best is not None  # all-D2D is always feasible
    return Assignment.from_assoc(um, best)

