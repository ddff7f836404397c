#!/usr/bin/env python3
"""Out-of-sample reliability and cost of Po-JCED, Up-ICED and Fix-JCED decisions.

Each mode is solved on the same training set; every decision is then evaluated on a larger fresh
set. Prints per-family deficiency and the objective / ex-post / total costs, and writes
reliability.json.

Usage: python3 scripts/reliability_table.py [--n 1000] [--test-n 10000] [--method saa] [--fix-H 2 --fix-D 4]
"""
import argparse
import json
from pathlib import Path

from jcedkit.builder import FIX_JCED, PO_JCED, UP_ICED, BuildMode
from jcedkit.evaluator import FAMILIES, ex_post_evaluate, format_table
from jcedkit.grid import bundled_case_path, compute_ptdf, load_case
from jcedkit.pipeline import InfeasibleError, solve_dispatch
from jcedkit.scenarios import bundled_uncertainty_path, load_uncertainty, sample_scenarios


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="six_bus")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--test-n", dest="test_n", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--method", default="saa", choices=("saa", "msaa"))
    ap.add_argument("--fix-H", dest="fix_H", type=float, default=2.0)
    ap.add_argument("--fix-D", dest="fix_D", type=float, default=4.0)
    ap.add_argument("--out", default="out/reliability")
    args = ap.parse_args(argv)

    case = load_case(bundled_case_path(args.case))
    unc = load_uncertainty(bundled_uncertainty_path(args.case))
    ptdf = compute_ptdf(case)
    train = sample_scenarios(unc, case, args.n, args.seed)
    test = sample_scenarios(unc, case, args.test_n, args.seed + 1000)
    modes = [BuildMode(PO_JCED), BuildMode(UP_ICED), BuildMode(FIX_JCED, args.fix_H, args.fix_D)]
    rows, docs = [], {}
    for mode in modes:
        try:
            res = solve_dispatch(case, train, args.method, mode, ptdf=ptdf)
        except InfeasibleError as exc:
            rows.append((mode.kind, *(["-"] * (len(FAMILIES) + 3)), f"infeasible ({exc.family})"))
            continue
        rep = ex_post_evaluate(res.decision, case, ptdf, test)
        docs[mode.kind] = rep.to_dict()
        rows.append((mode.kind, *(f"{100 * rep.deficiency[f]:.2f}%" for f in FAMILIES),
                     f"{rep.objective_cost:.2f}", f"{rep.expost_cost:.2f}", f"{rep.total_cost:.2f}", res.status))
    print(f"{args.case}: {args.method}, n = {args.n} (seed {args.seed}), test n = {args.test_n} (seed {args.seed + 1000})")
    print(format_table(("mode", *FAMILIES, "objective $", "ex-post $", "total $", "status"), rows))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reliability.json").write_text(json.dumps(docs, indent=2) + "\n")


if __name__ == "__main__":
    main()
