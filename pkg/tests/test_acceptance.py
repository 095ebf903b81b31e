"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, random_instance
from d2d_assign import dual
from d2d_assign.channel import SimConfig, path_loss, rayleigh_power, realize, shadowing
from d2d_assign.harness import ExperimentSpec, run_trials
from d2d_assign.metrics import build_utility_matrix
from d2d_assign.mwbm import brute_force, build_graph, solve, solve_p1

SETUP = SimConfig(num_users=50, num_bs=4, tx_power_db=-5.0, seed=2015)
LOAD = 10
TRIALS = 200

# every assignment produced by criteria 1-5 goes through _check
_checked = {"count": 0, "violations": []}


def _check(assignment, loads, where):
    _checked["count"] += 1
    problems = assignment.violations(loads)
    if problems:
        _checked["violations"].append(f"{where}: {problems}")


def _report(name, ok, detail):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def setup2():
    spec = ExperimentSpec(config=SETUP, algorithms=("mwbm", "dual"), sweep_values=(LOAD,),
                          trials=TRIALS)
    t0 = time.perf_counter()
    outs = run_trials(spec)
    elapsed = time.perf_counter() - t0
    for o in outs:
        _check(o.assignment, [LOAD] * 4, f"setup2 trial {o.trial} {o.algorithm}")
    return outs, elapsed


def test_c01_oracle_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    n = 500
    for k in range(n):
        u, b = random_instance(rng, max_users=8, max_bs=3, max_load=2, hi=20)
        a = solve(build_graph(u, b), u)
        _check(a, b, f"c1 instance {k}")
        if a.value != brute_force(u, b).value:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    _report("C1 oracle equivalence", mismatches == 0 and elapsed < 10,
            f"{mismatches} mismatches over {n} instances in {elapsed:.1f}s (limit 10s)")


def test_c02_duality_gap(setup2):
    outs, elapsed = setup2
    mw = np.mean([o.value for o in outs if o.algorithm == "mwbm"])
    du = np.mean([o.value for o in outs if o.algorithm == "dual"])
    ratio = du / mw
    _report("C2 dual vs optimal throughput", ratio >= 0.995 and elapsed < 120,
            f"dual/mwbm = {ratio:.6f} (need >= 0.995) over {TRIALS} trials, {elapsed:.1f}s")


def test_c03_load_monotonicity():
    loads = (2, 4, 6, 8, 10, 12)
    spec = ExperimentSpec(config=SETUP, algorithms=("mwbm",), sweep_values=loads, trials=TRIALS)
    outs = run_trials(spec)
    per = {}
    for o in outs:
        _check(o.assignment, [int(o.sweep_value)] * 4, f"c3 trial {o.trial} b={o.sweep_value}")
        per.setdefault(o.trial, {})[o.sweep_value] = o.value
    violations = sum(
        1 for vals in per.values()
        for lo, hi in zip(loads, loads[1:]) if vals[hi] < vals[lo])
    _report("C3 load monotonicity", violations == 0,
            f"{violations} per-trial violations over {len(per)} trials x {len(loads)} loads")


def test_c04_power_saturation():
    grid = tuple(float(p) for p in np.arange(-20, 21, 5))
    spec = ExperimentSpec(config=SETUP, algorithms=("mwbm",), sweep="power",
                          sweep_values=grid, trials=TRIALS, load=LOAD)
    outs = run_trials(spec)
    sums = dict.fromkeys(grid, 0.0)
    for o in outs:
        _check(o.assignment, [LOAD] * 4, f"c4 trial {o.trial} p={o.sweep_value}")
        sums[o.sweep_value] += o.value / SETUP.num_users
    mean = np.array([sums[p] / TRIALS for p in grid])
    half = len(grid) // 2
    bottom = (mean[half] - mean[0]) / half
    top = (mean[-1] - mean[half]) / (len(grid) - 1 - half)
    _report("C4 power saturation", top < bottom,
            f"mean increment per step: bottom half {bottom:.3e}, top half {top:.3e}")


def test_c05_d2d_dominance(setup2):
    outs, _ = setup2
    frac = np.mean([o.d2d_fraction for o in outs if o.algorithm == "mwbm"])
    _report("C5 D2D dominance", frac > 0.5, f"mean MWBM D2D fraction {frac:.3f} (need > 0.5)")


def test_c06_constraint_invariants(setup2):
    n, bad = _checked["count"], _checked["violations"]
    _report("C6 constraint invariants", n > 0 and not bad,
            f"{n} assignments checked, {len(bad)} violations" + (f": {bad[:3]}" if bad else ""))


def test_c07_weak_duality():
    # shadow copies: first 8 users of each setup-(2) realization, capacity 1 per BS
    worst = np.inf
    iterates = 0
    loads = np.ones(4, dtype=int)
    for trial in range(TRIALS):
        _, ch = realize(SETUP, trial)
        u = build_utility_matrix(ch, SETUP.powers(), SETUP.noise_power).u[:8]
        opt = brute_force(u, loads).value
        res = dual.run(u, loads, max_iter=300)
        for rec in res.history:
            worst = min(worst, rec.dual_value - opt)
            iterates += 1
    _report("C7 weak duality", worst >= -1e-9,
            f"min g(lambda) - optimum = {worst:.3e} over {iterates} iterates (tol 1e-9)")


def test_c08_channel_statistics():
    x = 10 * np.log10(shadowing(np.random.default_rng(8), 5.8, 10**6))
    sh_err = abs(np.std(x) - 5.8) / 5.8
    fade_err = abs(np.mean(rayleigh_power(np.random.default_rng(9), 10**6)) - 1.0)
    pl = float(path_loss(0.5, 4.0))
    _report("C8 channel statistics", sh_err < 0.01 and fade_err < 0.01 and pl == 16.0,
            f"shadowing std rel err {sh_err:.2e}, fading mean err {fade_err:.2e}, "
            f"path loss {pl!r}")


def _median_solve_time(cfg, load, reps=7):
    times = []
    for trial in range(reps):
        _, ch = realize(cfg, trial)
        u = build_utility_matrix(ch, cfg.powers(), cfg.noise_power)
        t0 = time.perf_counter()
        solve_p1(u, [load] * cfg.num_bs)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def test_c09_complexity():
    small = _median_solve_time(SETUP, 10)  # 50 + 40 = 90
    large = _median_solve_time(SETUP.with_(num_users=100), 20)  # 100 + 80 = 180
    ratio = large / small
    _report("C9 complexity growth", ratio <= 10,
            f"median solve {small * 1e3:.1f} ms -> {large * 1e3:.1f} ms, ratio {ratio:.2f} (limit 10)")
