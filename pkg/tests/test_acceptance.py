"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines appear in the terminal summary) or
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import qmc

sys.path.insert(0, str(Path(__file__).resolve().parent))

from jcedkit.builder import FIX_JCED, UP_ICED, BuildMode, BuildOptions, build_model, objective_value  # noqa: E402
from jcedkit.dynamics import SimConfig, metrics, simulate, verify_decision  # noqa: E402
from jcedkit.evaluator import ex_post_evaluate, relative_cost_error, shortfalls  # noqa: E402
from jcedkit.grid import bundled_case_path, compute_ptdf, load_case  # noqa: E402
from jcedkit.pipeline import robust_case, solve_dispatch  # noqa: E402
from jcedkit.reform import MSAA, SAA, MixingSet, TwoSidedMixingSet, aggregated_cut, mixing_cut  # noqa: E402
from jcedkit.scenarios import (  # noqa: E402
    bundled_uncertainty_path,
    disturbance_quantiles,
    droppable_count,
    load_uncertainty,
    sample_scenarios,
)
from jcedkit.sfr import aggregate, equivalent, fit_nadir_boundary, inverter_D_range, nadir_abs  # noqa: E402
from jcedkit.sfr import nadir_closed_form, rocof, steady_state_dev  # noqa: E402
from jcedkit.solver import solve  # noqa: E402
from jcedkit.solver.program import ProgramBuilder  # noqa: E402

from conftest import six_bus, six_bus_set  # noqa: E402

RESULTS: dict = {}
REL = 1e-6


def record(num: int, ok: bool, detail: str) -> None:
    RESULTS[num] = (ok, detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@lru_cache(maxsize=None)
def ieee39():
    return load_case(bundled_case_path("ieee39_like"))


def ieee39_set(n, seed=11):
    return sample_scenarios(load_uncertainty(bundled_uncertainty_path("ieee39_like")), ieee39(), n, seed)


@lru_cache(maxsize=None)
def solved(case_name: str, n: int, method: str, seed: int = 7, mode: str = "po-jced", backend: str = "highs"):
    case = six_bus() if case_name == "six_bus" else ieee39()
    sset = six_bus_set(n, seed) if case_name == "six_bus" else ieee39_set(n, seed)
    return solve_dispatch(case, sset, method, BuildMode(mode), BuildOptions(), backend)


INSTANCES = [("six_bus", 100, 7), ("six_bus", 200, 7), ("six_bus", 200, 21), ("six_bus", 500, 7), ("ieee39_like", 100, 11)]


# ---------------------------------------------------------------- 1. relaxation ordering


def criterion_1():
    worst = math.inf
    for name, n, seed in INSTANCES:
        msaa = solved(name, n, MSAA, seed).objective
        saa = solved(name, n, SAA, seed).objective
        case = six_bus() if name == "six_bus" else ieee39()
        sset = six_bus_set(n, seed) if name == "six_bus" else ieee39_set(n, seed)
        rob = solve_dispatch(robust_case(case), sset, SAA).objective
        gaps = ((saa - msaa) / abs(saa), (rob - saa) / abs(rob))
        worst = min(worst, *gaps)
    ok = worst >= -REL
    record(1, ok, f"MSAA <= SAA <= robust on {len(INSTANCES)} instances, smallest relative gap {worst:.3e}")
    return ok


# ---------------------------------------------------------------- 2. MSAA accuracy


def criterion_2():
    errs, times = [], []
    for n in (500, 1000, 2000):
        saa, msaa = solved("six_bus", n, SAA), solved("six_bus", n, MSAA)
        times.append(saa.timings["total"] + msaa.timings["total"])
        errs.append(relative_cost_error(saa.objective, msaa.objective))
    ok = all(abs(e) <= 0.02 for e in errs) and max(times) <= 300.0
    body = ", ".join(f"n={n}: {100 * e:.2f}%" for n, e in zip((500, 1000, 2000), errs))
    record(2, ok, f"|SAA - MSAA|/SAA {body} (bar 2%), slowest point {max(times):.1f} s")
    return ok


# ---------------------------------------------------------------- 3. MSAA speed


def criterion_3():
    saa, msaa = solved("six_bus", 2000, SAA), solved("six_bus", 2000, MSAA)
    t_saa = saa.timings["reformulate"] + saa.timings["solve"]
    t_msaa = msaa.timings["reformulate"] + msaa.timings["solve"]
    ok = t_msaa <= 0.5 * t_saa
    record(3, ok, f"n=2000 on highs: MSAA {t_msaa:.3f} s vs SAA {t_saa:.3f} s (ratio {t_msaa / t_saa:.3f}, bar 0.5)")
    return ok


# ---------------------------------------------------------------- 4. cut validity


@lru_cache(maxsize=None)
def _binary_points(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)


def _violations(coefs, rhs, y, Z):
    lhs = y.copy()
    for j, c in coefs.items():
        lhs += c * Z[:, j]
    return int(np.count_nonzero(lhs < rhs - 1e-9))


def criterion_4(trials: int = 10_000, seed: int = 2024):
    rng = np.random.default_rng(seed)
    bad = checked = 0
    for t in range(trials):
        n = int(rng.integers(1, 13))
        probs = np.full(n, 1.0 / n) if t % 2 == 0 else rng.dirichlet(np.ones(n))
        delta = float(rng.uniform(0.0, 0.6))
        Z = _binary_points(n)
        Z = Z[Z @ probs <= delta + 1e-12]
        w = np.round(rng.exponential(5.0, n), 1) if t % 3 else rng.integers(0, 4, n).astype(float)
        ms = MixingSet(w, probs, delta)
        y = np.max(w * (1.0 - Z), axis=1)  # smallest y allowed by each budget-feasible z
        bad += _violations(*mixing_cut(ms), y, Z)
        bad += _violations(*mixing_cut(ms, ms.order()[: ms.k], ms.floor()), y, Z)
        bad += int(np.count_nonzero(y < ms.floor() - 1e-9))
        e = rng.normal(0.0, 5.0, n)
        ts = TwoSidedMixingSet.for_line(e, 20.0, probs, delta, shift="min")
        y2 = np.max(ts.v_low * (1.0 - Z), axis=1) + np.max(ts.v_up * (1.0 - Z), axis=1)
        bad += _violations(*aggregated_cut(ts), y2, Z)
        checked += len(Z)
    ok = bad == 0
    record(4, ok, f"{trials} random mixing sets (n <= 12), {checked} budget-feasible points, {bad} cut violations")
    return ok


# ---------------------------------------------------------------- 5. SAA semantics


def criterion_5():
    worst = []
    for name, n, seed in INSTANCES:
        res = solved(name, n, SAA, seed)
        case = six_bus() if name == "six_bus" else ieee39()
        sset = six_bus_set(n, seed) if name == "six_bus" else ieee39_set(n, seed)
        thr = case.thresholds
        short = shortfalls(res.decision, case, sset, compute_ptdf(case))
        for fam, delta in (("dibr_up", thr.delta_DIBR), ("sfr", thr.delta_R_eff), ("line_flow", thr.delta_L)):
            count = int(np.count_nonzero(short[fam] > 1e-6))
            cap = droppable_count(sset.probs, delta)
            worst.append((count - cap, f"{name} n={n} {fam} {count}/{cap}"))
    over = [d for k, d in worst if k > 0]
    ok = not over
    tight = max(worst)[1]
    record(5, ok, f"training violations within floor(delta n) on {len(INSTANCES)} instances; tightest {tight}"
           + (f"; over: {over}" if over else ""))
    return ok


# ---------------------------------------------------------------- 6. closed forms vs ODE


def criterion_6(points: int = 100, seed: int = 6):
    # H_sys, D_sys, R_G (droop, so R_G_inv = 1/R_G), F_H, T_R inside the documented accuracy region
    lo = [1.0, 0.0, 0.025, 0.1, 2.0]
    hi = [12.0, 10.0, 0.2, 0.6, 12.0]
    grid = qmc.scale(qmc.LatinHypercube(d=5, seed=seed).random(points), lo, hi)
    t0 = time.perf_counter()
    worst = np.zeros(3)
    for H, D, R, F, T in grid:
        agg = equivalent(H, D, 1.0 / R, F, T, 1000.0)
        m = metrics(simulate(agg, SimConfig(horizon=max(60.0, 20.0 * T), dp_L=50.0)), 60.0)
        rel = np.array([
            abs(rocof(50.0, agg, 60.0) / m.rocof_max - 1.0),
            abs(nadir_closed_form(50.0, agg, 60.0)[0] / m.nadir - 1.0),
            abs(steady_state_dev(50.0, agg, 60.0) / m.ss_dev - 1.0),
        ])
        worst = np.maximum(worst, rel)
    elapsed = time.perf_counter() - t0
    ok = worst[0] <= 0.01 and worst[1] <= 0.02 and worst[2] <= 0.005 and elapsed <= 60.0
    record(6, ok, f"{points}-point grid: worst RoCoF {100 * worst[0]:.3f}% (1%), nadir {100 * worst[1]:.4f}% (2%), "
                  f"steady state {100 * worst[2]:.4f}% (0.5%), {elapsed:.1f} s")
    return ok


# ---------------------------------------------------------------- 7. boundary conservatism


def criterion_7():
    case = six_bus()
    base = aggregate(case)
    dp = disturbance_quantiles(six_bus_set(1000), case.thresholds).abs_dp_qF
    thr = case.thresholds.df_max
    worst = -math.inf
    for M in (2, 4, 8):
        fit = fit_nadir_boundary(base, dp, thr, M, inverter_D_range(case), case.thresholds.f0)
        for d in np.linspace(fit.D_lo, fit.D_hi, 50):
            h = max(float(fit.h(d)), 0.0)
            worst = max(worst, nadir_abs(dp, base.with_inverter(h, d), case.thresholds.f0) - thr)
    ok = worst <= 1e-6
    record(7, ok, f"M in {{2,4,8}} at dp={dp:.2f} MW, 150 points: max(|nadir| - {thr:g} Hz) = {worst:.3e}")
    return ok


# ---------------------------------------------------------------- 8. ex-post reliability


def criterion_8():
    case = six_bus()
    test = six_bus_set(10_000, seed=1007)
    po = ex_post_evaluate(solved("six_bus", 1000, SAA).decision, case, None, test).deficiency
    up = ex_post_evaluate(solved("six_bus", 1000, SAA, mode=UP_ICED).decision, case, None, test).deficiency
    ok = all(v <= 0.06 for v in po.values()) and up["dibr_up"] > po["dibr_up"]
    fams = ", ".join(f"{k} {100 * v:.2f}%" for k, v in po.items())
    record(8, ok, f"Po-JCED SAA (n=1000) on 10000 fresh: {fams} (bar 6%); Up-ICED dibr_up {100 * up['dibr_up']:.2f}%")
    msaa = ex_post_evaluate(solved("six_bus", 1000, MSAA).decision, case, None, test).deficiency
    print("              (for reference, the MSAA decision: "
          + ", ".join(f"{k} {100 * v:.2f}%" for k, v in msaa.items()) + ")")
    return ok


# ---------------------------------------------------------------- 9. frequency verification


def criterion_9():
    case = six_bus()
    sset = six_bus_set(1000)
    q = disturbance_quantiles(sset, case.thresholds).abs_dp_qF
    sweep = [s * f * q for f in (0.25, 0.5, 0.75, 1.0) for s in (-1.0, 1.0)]
    po = verify_decision(solved("six_bus", 1000, MSAA).decision, case, case.thresholds, sweep, SimConfig())
    fix = solve_dispatch(case, sset, MSAA, BuildMode(FIX_JCED, 0.05, 0.05))
    fx = verify_decision(fix.decision, case, case.thresholds, sweep, SimConfig())
    fails = sorted({f for c in fx.checks for f in c.failures()})
    ok = po.passed and not fx.passed
    record(9, ok, f"sweep to +-{q:.2f} MW: Po-JCED {'passes' if po.passed else 'FAILS'}; "
                  f"Fix-JCED (H=D=0.05) fails {fails}")
    return ok


# ---------------------------------------------------------------- 10. delta = 0 collapse


def _scenario_by_scenario(model):
    """Every chance row written once per scenario, no indicators: an independent robust program."""
    pb = ProgramBuilder("robust_direct")
    for v in model.variables.values():
        pb.var(v.name, v.lb, v.ub, v.is_integer, model.objective.get(v.name, 0.0))
    pb.offset = model.objective_offset
    for r in model.rows:
        pb.row(r.name, r.coefs, r.sense, r.rhs)
    for blk in model.blocks:
        for row in blk.rows:
            for i, b in enumerate(np.asarray(row.b, dtype=float)):
                pb.row(f"{row.name}_s{i}", row.coefs, ">=", float(b))
    return pb.build()


def criterion_10():
    worst = 0.0
    for seed in (101, 202, 303):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 120))
        case = robust_case(six_bus())
        sset = six_bus_set(n, seed)
        vals = [solve_dispatch(case, sset, m).objective for m in (SAA, MSAA)]
        model = build_model(case, sset, BuildMode(), BuildOptions(), compute_ptdf(case))
        vals.append(solve(_scenario_by_scenario(model)).objective)
        worst = max(worst, (max(vals) - min(vals)) / abs(min(vals)))
    ok = worst <= REL
    record(10, ok, f"3 random delta=0 instances: largest SAA/MSAA/scenario-by-scenario spread {worst:.2e}")
    return ok


# ---------------------------------------------------------------- 11. exact vs linearized redispatch


def criterion_11():
    worst = -math.inf
    for name, n, seed in INSTANCES:
        for method in (SAA, MSAA):
            r = solved(name, n, method, seed)
            worst = max(worst, r.exact_objective - r.c1_objective)
    case = robust_case(six_bus())
    sset = six_bus_set(200)
    r = solve_dispatch(case, sset, MSAA)
    d = r.decision
    moved = np.outer(sset.dp_L, d.alpha)
    covered = bool(np.all(moved <= d.r_up + 1e-9) and np.all(-moved <= d.r_dn + 1e-9))
    c1 = objective_value(d, sset, case, "c1", "pwl", 3)
    eq = abs(r.exact_objective - c1) <= REL * abs(c1)
    ok = worst <= 1e-6 and covered and eq
    record(11, ok, f"exact - c1 at most {worst:.2e} over {2 * len(INSTANCES)} solves; fully covered reserves: "
                   f"exact {r.exact_objective:.6f} vs c1 {c1:.6f}")
    return ok


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


@pytest.mark.parametrize("num", list(CRITERIA))
def test_criterion(num):
    assert CRITERIA[num](), RESULTS[num][1]


if __name__ == "__main__":
    passed = sum(bool(fn()) for fn in CRITERIA.values())
    print(f"{passed}/{len(CRITERIA)} criteria pass")
    sys.exit(0 if passed == len(CRITERIA) else 1)
