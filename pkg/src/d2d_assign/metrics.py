"""SINR of every (user, association) pair and the utility weight matrix.

Column 0 of every per-user array is the D2D link (tx_i -> rx_i); columns
1..N are the base stations. Interference on any link comes from all other
transmitters, whatever mode they end up in, so the matrix does not depend
on the assignment.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization

RATE = "rate"
PROPORTIONAL_FAIRNESS = "weighted_proportional_fairness"
ENERGY_EFFICIENCY = "energy_efficiency"
UTILITY_KINDS = (RATE, PROPORTIONAL_FAIRNESS, ENERGY_EFFICIENCY)

_ALIASES = {"pf": PROPORTIONAL_FAIRNESS, "ee": ENERGY_EFFICIENCY}

PF_RATE_FLOOR = 1e-9


class DegenerateUtilityError(ValueError):
    """Log of a zero rate under proportional fairness."""

    def __init__(self, msg, user=None, assoc=None):
        super().__init__(msg)
        self.user = user
        self.assoc = assoc


def canonical_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in UTILITY_KINDS:
        raise ValueError(f"unknown utility kind {kind!r}")
    return kind


@dataclass(frozen=True)
class UtilityMatrix:
    u: np.ndarray  # (M, N+1)
    kind: str = RATE
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2 or u.shape[1] < 1:
            raise ValueError(f"utility matrix must be 2-D with >= 1 column, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("utility matrix has non-finite entries")
        if self.kind == RATE and np.any(u < 0):
            raise ValueError("rate utilities must be non-negative")
        object.__setattr__(self, "u", u)

    @property
    def num_users(self) -> int:
        return self.u.shape[0]

    @property
    def num_bs(self) -> int:
        return self.u.shape[1] - 1

    @classmethod
    def from_array(cls, u, kind: str = RATE) -> "UtilityMatrix":
        return cls(np.asarray(u, dtype=float), kind)


def rate(sinr):
    """Shannon rate log2(1 + sinr) in bit/s/Hz (unit bandwidth)."""
    return np.log1p(np.asarray(sinr, dtype=float)) / np.log(2.0)


def sinr(i: int, j: int, realization: ChannelRealization, powers, n0: float) -> float:
    """SINR of user ``i`` on association ``j`` (0 = D2D, 1..N = BS j)."""
    g, h = realization.g, realization.h
    m, n = g.shape
    if not 0 <= i < m:
        raise IndexError(f"user index {i} out of range [0, {m})")
    if not 0 <= j <= n:
        raise IndexError(f"association index {j} out of range [0, {n}]")
    p = np.asarray(powers, dtype=float)
    others = np.arange(m) != i
    if j == 0:
        signal = p[i] * h[i, i]
        interference = np.sum(p[others] * h[others, i])
    else:
        signal = p[i] * g[i, j - 1]
        interference = np.sum(p[others] * g[others, j - 1])
    return float(signal / (interference + n0))


def sinr_matrix(realization: ChannelRealization, powers, n0: float) -> np.ndarray:
    """(M, N+1) SINRs for all users and associations at once."""
    g, h = realization.g, realization.h
    p = np.asarray(powers, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    rx_g = p[:, None] * g  # received power of tx_i at BS j
    d2d_rx = p[:, None] * h  # received power of tx_i at rx_k
    own_d2d = np.diag(d2d_rx)
    # sum over k != i directly; total-minus-own loses precision when own term dominates
    m = g.shape[0]
    mask = ~np.eye(m, dtype=bool)
    interf_d2d = np.array([d2d_rx[mask[:, k], k].sum() for k in range(m)])
    interf_bs = np.empty_like(rx_g)
    for i in range(m):
        interf_bs[i] = rx_g[mask[i]].sum(axis=0)
    out = np.empty((m, g.shape[1] + 1))
    out[:, 0] = own_d2d / (interf_d2d + n0)
    out[:, 1:] = rx_g / (interf_bs + n0)
    return out


def utility(sinr_value, kind: str = RATE, p_i: float = 1.0, w_i: float = 1.0):
    """Map a linear SINR to a utility value.

    rate -> log2(1+sinr); weighted_proportional_fairness -> w_i * ln(rate);
    energy_efficiency -> rate / p_i.
    """
    kind = canonical_kind(kind)
    s = np.asarray(sinr_value, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")
    r = rate(s)
    if kind == RATE:
        out = r
    elif kind == ENERGY_EFFICIENCY:
        if np.any(np.asarray(p_i) <= 0):
            raise ValueError("energy efficiency needs p_i > 0")
        out = r / p_i
    else:
        if np.any(r <= 0):
            raise DegenerateUtilityError("proportional fairness undefined at zero rate")
        out = w_i * np.log(r)
    return float(out) if np.ndim(out) == 0 else out


def build_utility_matrix(realization: ChannelRealization, powers, n0: float,
                         kind: str = RATE, weights=None,
                         rate_floor: Optional[float] = None) -> UtilityMatrix:
    """Dense utility matrix u[i, j] for i in users and j in {D2D, BS 1..N}.

    ``rate_floor`` only matters for proportional fairness: when given, rates
    below it are raised to it instead of raising DegenerateUtilityError.
    """
    kind = canonical_kind(kind)
    s = sinr_matrix(realization, powers, n0)
    m = s.shape[0]
    p = np.asarray(powers, dtype=float)
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,) or p.shape != (m,):
        raise ValueError("powers and weights need one entry per user")

    if kind == PROPORTIONAL_FAIRNESS:
        r = rate(s)
        if rate_floor is not None:
            r = np.maximum(r, rate_floor)
        bad = np.argwhere(r <= 0)
        if bad.size:
            i, j = bad[0]
            raise DegenerateUtilityError(
                f"zero rate for user {i}, association {j} under proportional fairness",
                user=int(i), assoc=int(j))
        u = w[:, None] * np.log(r)
    elif kind == ENERGY_EFFICIENCY:
        u = np.column_stack([utility(s[:, j], kind, p) for j in range(s.shape[1])])
    else:
        u = rate(s)
    return UtilityMatrix(u, kind, None if weights is None else w)
