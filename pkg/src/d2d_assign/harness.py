"""Monte-Carlo experiments comparing the association algorithms.

Every trial draws one topology and one set of channel gains, seeded by the
trial index, and reuses them for every sweep value and every algorithm
(common random numbers).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dual
from .channel import SimConfig, realize
from .metrics import PF_RATE_FLOOR, RATE, build_utility_matrix, canonical_kind
from .mwbm import Assignment, solve_p1

ALGORITHMS = ("mwbm", "dual", "cellular", "d2d")
SWEEPS = ("load", "power")
CSV_HEADER = ["sweep", "algorithm", "mean_tpu", "stderr", "d2d_frac", "mean_gap", "ms_per_trial"]
THREADS_ENV = "D2D_ASSIGN_THREADS"


class InfeasibleAssignmentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    config: SimConfig = field(default_factory=SimConfig)
    algorithms: tuple = ("mwbm", "dual")
    utility: str = RATE
    sweep: str = "load"
    sweep_values: tuple = (10,)
    trials: int = 200
    load: int = 10  # per-BS capacity used when sweeping power
    out: Optional[str] = None
    fmt: str = "csv"
    timing: bool = True
    dual_max_iter: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "utility", canonical_kind(self.utility))
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        v = self.sweep_values
        if not v or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep values must be non-empty and strictly increasing")
        if self.sweep == "load" and any(x < 0 or x != int(x) for x in v):
            raise ValueError("load sweep values must be non-negative integers")
        if self.fmt not in ("csv", "json", "table"):
            raise ValueError(f"unknown format {self.fmt!r}")


@dataclass
class TrialOutcome:
    """One (trial, sweep value, algorithm) result."""
    trial: int
    sweep_value: float
    algorithm: str
    value: float
    d2d_fraction: float
    bs_loads: np.ndarray
    gap: Optional[float]
    seconds: float
    assignment: Assignment


@dataclass
class ResultRow:
    sweep_value: float
    algorithm: str
    mean_tpu: float
    stderr: float
    d2d_frac: float
    mean_load: list
    mean_gap: Optional[float]
    ms_per_trial: Optional[float]

    def as_dict(self) -> dict:
        return {
            "sweep": self.sweep_value, "algorithm": self.algorithm,
            "mean_tpu": self.mean_tpu, "stderr": self.stderr, "d2d_frac": self.d2d_frac,
            "mean_load": self.mean_load, "mean_gap": self.mean_gap,
            "ms_per_trial": self.ms_per_trial,
        }


def _solve(alg: str, u, loads, spec: ExperimentSpec):
    if alg == "mwbm":
        return solve_p1(u, loads), None
    if alg == "cellular":
        return solve_p1(u, loads, d2d=False), None
    if alg == "d2d":
        return Assignment.from_assoc(u, np.zeros(u.num_users, dtype=int)), None
    res = dual.run(u, loads, max_iter=spec.dual_max_iter, keep_history=False)
    return res.assignment, res.duality_gap


def run_trial(spec: ExperimentSpec, trial: int) -> list[TrialOutcome]:
    cfg = spec.config
    _, ch = realize(cfg, trial)
    out = []
    u = None
    for sv in spec.sweep_values:
        if spec.sweep == "power" or u is None:
            power_db = sv if spec.sweep == "power" else cfg.tx_power_db
            powers = np.full(cfg.num_users, 10.0 ** (power_db / 10.0))
            u = build_utility_matrix(ch, powers, cfg.noise_power, spec.utility,
                                     rate_floor=PF_RATE_FLOOR)
        load = int(sv) if spec.sweep == "load" else spec.load
        loads = np.full(cfg.num_bs, load)
        for alg in spec.algorithms:
            t0 = time.perf_counter()
            try:
                a, gap = _solve(alg, u, loads, spec)
            except Exception as exc:
                raise RuntimeError(f"trial {trial}, {spec.sweep}={sv}, {alg}: {exc}") from exc
            dt = time.perf_counter() - t0
            problems = a.violations(loads)
            if problems:
                raise InfeasibleAssignmentError(
                    f"trial {trial}, {spec.sweep}={sv}, {alg}: {'; '.join(problems)}")
            out.append(TrialOutcome(trial, sv, alg, a.value, a.d2d_fraction, a.bs_loads(),
                                    gap, dt, a))
    return out


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_trials(spec: ExperimentSpec) -> list[TrialOutcome]:
    """All per-trial outcomes, ordered by trial index."""
    workers = min(_workers(), spec.trials)
    if workers == 1:
        per_trial = [run_trial(spec, t) for t in range(spec.trials)]
    else:
        with ProcessPoolExecutor(workers) as pool:
            per_trial = list(pool.map(run_trial, [spec] * spec.trials, range(spec.trials)))
    return [o for outs in per_trial for o in outs]


def aggregate(outcomes: list[TrialOutcome], timing: bool = True) -> list[ResultRow]:
    groups: dict = {}
    for o in sorted(outcomes, key=lambda o: o.trial):
        groups.setdefault((o.sweep_value, o.algorithm), []).append(o)
    rows = []
    for (sv, alg), grp in groups.items():
        m = grp[0].assignment.num_users
        tpu = np.array([o.value for o in grp]) / m
        n = tpu.size
        gaps = [o.gap for o in grp if o.gap is not None]
        rows.append(ResultRow(
            sweep_value=sv,
            algorithm=alg,
            mean_tpu=float(np.mean(tpu)),
            stderr=float(np.std(tpu, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            d2d_frac=float(np.mean([o.d2d_fraction for o in grp])),
            mean_load=np.mean([o.bs_loads for o in grp], axis=0).tolist(),
            mean_gap=float(np.mean(gaps)) if gaps else None,
            ms_per_trial=1e3 * float(np.mean([o.seconds for o in grp])) if timing else None,
        ))
    return _sorted(rows)


def _sorted(rows):
    return sorted(rows, key=lambda r: (r.sweep_value, r.algorithm))


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    rows = aggregate(run_trials(spec), timing=spec.timing)
    if spec.out:
        write_rows(rows, spec.out, spec.fmt, spec)
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in _sorted(rows):
        w.writerow([_fmt(r.sweep_value), r.algorithm, _fmt(r.mean_tpu), _fmt(r.stderr),
                    _fmt(r.d2d_frac), _fmt(r.mean_gap), _fmt(r.ms_per_trial)])
    return buf.getvalue()


def to_json(rows, spec: ExperimentSpec | None = None) -> str:
    doc = {"rows": [r.as_dict() for r in _sorted(rows)]}
    if spec is not None:
        doc["spec"] = {
            "config": spec.config.to_dict(), "algorithms": list(spec.algorithms),
            "utility": spec.utility, "sweep": spec.sweep,
            "sweep_values": list(spec.sweep_values), "trials": spec.trials, "load": spec.load,
        }
    return json.dumps(doc, indent=2) + "\n"


def summarize(rows) -> str:
    """Aligned text table, one line per (sweep value, algorithm)."""
    if not rows:
        raise ValueError("no rows to summarize")
    header = ["sweep", "algorithm", "tpu", "stderr", "d2d_frac", "gap", "ms/trial"]
    lines = [header]
    for r in _sorted(rows):
        lines.append([
            f"{r.sweep_value:g}", r.algorithm, f"{r.mean_tpu:.6f}", f"{r.stderr:.6f}",
            f"{r.d2d_frac:.4f}", "-" if r.mean_gap is None else f"{r.mean_gap:.3g}",
            "-" if r.ms_per_trial is None else f"{r.ms_per_trial:.2f}",
        ])
    widths = [max(len(row[k]) for row in lines) for k in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in lines) + "\n"


def render(rows, fmt: str, spec: ExperimentSpec | None = None) -> str:
    if fmt == "csv":
        return to_csv(rows)
    if fmt == "json":
        return to_json(rows, spec)
    return summarize(rows)


def write_rows(rows, path, fmt: str, spec: ExperimentSpec | None = None) -> None:
    Path(path).write_text(render(rows, fmt, spec))
