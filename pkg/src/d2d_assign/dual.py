"""Distributed price-based algorithm for mode selection and BS association.

Each BS j posts a congestion price lambda_j >= 0 (D2D is free). Every user
picks the association with the largest surplus u_ij - lambda_j, then each
BS moves its price along the subgradient of its load constraint. Prices
are arrays of length N (BSs only); the D2D price is implicitly zero.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mwbm import Assignment, _matrix, as_loads

STALL_WINDOW = 50
STALL_TOL = 1e-6


def _full_prices(prices, num_bs: int) -> np.ndarray:
    lam = np.asarray(prices, dtype=float)
    if lam.shape != (num_bs,):
        raise ValueError(f"need {num_bs} BS prices, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("prices must be non-negative")
    return np.concatenate(([0.0], lam))


def best_response(u_row, prices) -> int:
    """argmax_j (u_row[j] - lambda_j) over {D2D, BS 1..N}.

    Ties go to D2D, then to the smallest BS index.
    """
    u_row = np.asarray(u_row, dtype=float)
    surplus = u_row - _full_prices(prices, u_row.shape[0] - 1)
    return int(np.argmax(surplus))  # first maximum


def best_responses(u, prices) -> np.ndarray:
    """Vectorized ``best_response`` for every user."""
    um = _matrix(u)
    return np.argmax(um - _full_prices(prices, um.shape[1] - 1), axis=1)


def price_update(lam: float, load: float, capacity: float, step: float) -> float:
    """Projected subgradient step max(lam - step * (capacity - load), 0)."""
    if step <= 0:
        raise ValueError("step size must be positive")
    if lam < 0:
        raise ValueError("price must be non-negative")
    return max(lam - step * (capacity - load), 0.0)


def dual_value(u, loads, prices) -> float:
    """Dual function g(lambda) = sum_i max_j (u_ij - lambda_j) + sum_j lambda_j b_j."""
    um = _matrix(u)
    b = as_loads(loads, um.shape[1] - 1)
    lam = _full_prices(prices, um.shape[1] - 1)
    return float(np.sum(np.max(um - lam, axis=1)) + np.dot(lam[1:], b))


def repair_feasibility(raw, u, loads, prices=None) -> Assignment:
    """Turn per-user best responses into a load-feasible assignment.

    Over-capacity BSs keep their b_j users with the largest surplus
    (ties: smaller user index). Evicted users, taken in decreasing surplus
    order, move to their best remaining option among D2D and BSs that still
    have room. Users at BSs within capacity are left alone.
    """
    um = _matrix(u)
    m, n1 = um.shape
    b = as_loads(loads, n1 - 1)
    lam = _full_prices(np.zeros(n1 - 1) if prices is None else prices, n1 - 1)
    assoc = np.array(raw, dtype=int)
    if assoc.shape != (m,) or np.any(assoc < 0) or np.any(assoc >= n1):
        raise ValueError("raw must assign every user to some j in 0..N")
    surplus = um - lam

    evicted = []
    for j in range(1, n1):
        users = np.nonzero(assoc == j)[0]
        if users.size <= b[j - 1]:
            continue
        # stable sort on -surplus keeps smaller index first among ties
        order = users[np.argsort(-surplus[users, j], kind="stable")]
        for i in order[b[j - 1]:]:
            evicted.append((surplus[i, j], i))
            assoc[i] = -1
    if not evicted:
        return Assignment.from_assoc(um, assoc)

    evicted.sort(key=lambda e: (-e[0], e[1]))
    load = np.bincount(assoc[assoc >= 1] - 1, minlength=n1 - 1)
    for _, i in evicted:
        open_ = np.concatenate(([True], load < b))
        cand = np.where(open_, surplus[i], -np.inf)
        j = int(np.argmax(cand))
        assoc[i] = j
        if j:
            load[j - 1] += 1
    return Assignment.from_assoc(um, assoc)


@dataclass
class StepSchedule:
    """Step size rule: ``diminishing`` (eps0 / sqrt(t)) or ``constant`` (eps0).

    ``eps0=None`` means 0.1 times the largest absolute utility.
    """
    kind: str = "diminishing"
    eps0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("diminishing", "constant"):
            raise ValueError(f"unknown step schedule {self.kind!r}")
        if self.eps0 is not None and self.eps0 <= 0:
            raise ValueError("eps0 must be positive")

    def initial(self, u: np.ndarray) -> float:
        if self.eps0 is not None:
            return self.eps0
        scale = float(np.max(np.abs(u))) if u.size else 0.0
        return 0.1 * scale if scale > 0 else 0.1

    def step(self, eps0: float, t: int) -> float:
        return eps0 / math.sqrt(t) if self.kind == "diminishing" else eps0


@dataclass
class IterationRecord:
    iteration: int
    dual_value: float
    primal_value: float
    loads: np.ndarray
    prices: np.ndarray


@dataclass
class DualRunResult:
    assignment: Assignment
    raw_assignment: Assignment
    prices: np.ndarray
    best_dual_value: float
    primal_value: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def duality_gap(self) -> float:
        return self.best_dual_value - self.primal_value

    def history_csv(self) -> str:
        """Per-iteration history as CSV text."""
        n = self.prices.shape[0]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "dual_value", "primal_value"]
                   + [f"load_{j}" for j in range(1, n + 1)]
                   + [f"price_{j}" for j in range(1, n + 1)])
        for rec in self.history:
            w.writerow([rec.iteration, repr(rec.dual_value), repr(rec.primal_value)]
                       + [int(x) for x in rec.loads] + [repr(float(x)) for x in rec.prices])
        return buf.getvalue()


def run(u, loads, schedule: StepSchedule | None = None, max_iter: int = 1000,
        stall_tol: float = STALL_TOL, stall_window: int = STALL_WINDOW,
        keep_history: bool = True) -> DualRunResult:
    """Synchronous price iterations with primal recovery.

    Every round all users best-respond to the same prices, then all BSs
    update. The returned assignment is the best repaired iterate; the run
    stops early when the dual bound meets that primal value, or when the
    best dual value improves by less than ``stall_tol`` (relative) over
    ``stall_window`` rounds.
    """
    um = _matrix(u)
    if not np.all(np.isfinite(um)):
        raise ValueError("utility matrix has non-finite entries")
    m, n1 = um.shape
    b = as_loads(loads, n1 - 1)
    schedule = schedule or StepSchedule()
    eps0 = schedule.initial(um)

    lam = np.zeros(n1 - 1)
    best_dual = math.inf
    best_duals = []
    best = best_raw = None
    history = []
    t = 0
    for t in range(1, max_iter + 1):
        raw = best_responses(um, lam)
        g = dual_value(um, b, lam)
        best_dual = min(best_dual, g)
        best_duals.append(best_dual)
        load = np.bincount(raw[raw >= 1] - 1, minlength=n1 - 1)

        fixed = repair_feasibility(raw, um, b, lam)
        if best is None or fixed.value > best.value:
            best, best_raw = fixed, raw
        if keep_history:
            history.append(IterationRecord(t, g, fixed.value, load, lam.copy()))

        scale = max(1.0, abs(best_dual))
        if best_dual - best.value <= 1e-12 * scale:
            break
        if t > stall_window and best_duals[-stall_window - 1] - best_dual < stall_tol * scale:
            break
        step = schedule.step(eps0, t)
        lam = np.maximum(lam - step * (b - load), 0.0)

    return DualRunResult(
        assignment=best,
        raw_assignment=Assignment.from_assoc(um, best_raw),
        prices=lam,
        best_dual_value=best_dual,
        primal_value=best.value,
        iterations=t,
        history=history,
    )
