#!/usr/bin/env python3
"""Frequency response of Po-JCED and Fix-JCED decisions over a disturbance sweep.

Disturbances run over +-25/50/75/100% of the training set's largest absolute imbalance. Prints RoCoF,
nadir and steady-state deviation per disturbance with the threshold verdict, and writes one
trajectory CSV per decision at the largest load increase.

Usage: python3 scripts/frequency_sweep.py [--n 1000] [--fix-H 0.05 --fix-D 0.05] [--out out/sweep]
"""
import argparse
from pathlib import Path

from jcedkit.builder import FIX_JCED, PO_JCED, BuildMode
from jcedkit.dynamics import SimConfig, simulate, verify_decision
from jcedkit.evaluator import format_table
from jcedkit.grid import bundled_case_path, load_case
from jcedkit.pipeline import solve_dispatch
from jcedkit.scenarios import bundled_uncertainty_path, disturbance_quantiles, load_uncertainty, sample_scenarios
from jcedkit.sfr import aggregate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="six_bus")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--fix-H", dest="fix_H", type=float, default=0.05)
    ap.add_argument("--fix-D", dest="fix_D", type=float, default=0.05)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args(argv)

    case = load_case(bundled_case_path(args.case))
    thr = case.thresholds
    train = sample_scenarios(load_uncertainty(bundled_uncertainty_path(args.case)), case, args.n, args.seed)
    q = disturbance_quantiles(train, thr).abs_dp_qF
    sweep = [s * f * q for s in (1.0, -1.0) for f in (0.25, 0.5, 0.75, 1.0)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"thresholds: RoCoF {thr.df_rate_max:g} Hz/s, nadir {thr.df_max:g} Hz, steady state {thr.df_ss_max:g} Hz")
    for mode in (BuildMode(PO_JCED), BuildMode(FIX_JCED, args.fix_H, args.fix_D)):
        dec = solve_dispatch(case, train, "msaa", mode).decision
        rep = verify_decision(dec, case, thr, sweep, SimConfig())
        rows = [(f"{c.dp_L:+.2f}", f"{c.metrics.rocof_max:+.4f}", f"{c.metrics.nadir:+.4f}", f"{c.metrics.ss_dev:+.4f}",
                 "pass" if c.passed else ",".join(c.failures())) for c in rep.checks]
        settings = ", ".join(f"{k} [{' '.join(f'{v:.3f}' for v in getattr(dec, k))}]" for k in ("H_w", "D_w", "H_e", "D_e"))
        print(f"\n{mode.kind}: {settings}")
        print(format_table(("dp MW", "RoCoF Hz/s", "nadir Hz", "steady Hz", "verdict"), rows))
        agg = aggregate(case, dec.H_w, dec.D_w, dec.H_e, dec.D_e)
        path = out / f"trajectory_{mode.kind}.csv"
        simulate(agg, SimConfig(horizon=30.0, step=1e-2, dp_L=q), thr.f0).to_csv(path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
