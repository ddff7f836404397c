#!/usr/bin/env python3
"""SAA against MSAA objective cost and wall time over a range of scenario counts.

Writes curve.csv (one row per n and method) and prints the comparison table for each n.

Usage: python3 scripts/cost_time_curve.py [--case six_bus] [--sizes 250 500 1000 2000] [--out out/curve]
"""
import argparse
from pathlib import Path

from jcedkit.evaluator import compare_methods, curve_csv, format_table
from jcedkit.grid import bundled_case_path, load_case
from jcedkit.scenarios import bundled_uncertainty_path, load_uncertainty, sample_scenarios


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="six_bus")
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--backend")
    ap.add_argument("--out", default="out/curve")
    args = ap.parse_args(argv)

    case = load_case(bundled_case_path(args.case))
    unc = load_uncertainty(bundled_uncertainty_path(args.case))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    points, summary = [], []
    for n in args.sizes:
        cmp = compare_methods(case, sample_scenarios(unc, case, n, args.seed), repeats=args.repeats,
                              backend=args.backend)
        print(cmp.to_text(), "\n")
        for r in cmp.rows:
            points.append({"n": n, "method": r.method, "objective": r.objective, "wall_time": r.wall_time})
        saa, msaa = cmp.row("saa"), cmp.row("msaa")
        summary.append((str(n), f"{saa.objective:.2f}", f"{msaa.objective:.2f}", f"{100 * cmp.cost_error:.2f}%",
                        f"{saa.wall_time:.3f}", f"{msaa.wall_time:.3f}"))
    curve_csv(points, out / "curve.csv")
    print(format_table(("n", "SAA $", "MSAA $", "cost error", "SAA s", "MSAA s"), summary))
    print(f"\nwrote {out / 'curve.csv'}")


if __name__ == "__main__":
    main()
