#!/usr/bin/env python3
"""External-solver shim for ``--backend exec:scripts/highs_exec.py``.

Usage: highs_exec.py MODEL.mps SOLUTION.sol

Reads the MPS file with the standalone HiGHS bindings (highspy) and writes a plain
``<name> <value>`` solution file preceded by status and objective lines.
"""
import sys

import highspy


def main(argv):
    model, out = argv[1], argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 1e-9)
    if h.readModel(model) != highspy.HighsStatus.kOk:
        sys.stderr.write(f"cannot read {model}\n")
        return 1
    h.run()
    status = h.getModelStatus()
    label = {
        highspy.HighsModelStatus.kOptimal: "optimal",
        highspy.HighsModelStatus.kInfeasible: "infeasible",
        highspy.HighsModelStatus.kUnbounded: "unbounded",
        highspy.HighsModelStatus.kUnboundedOrInfeasible: "infeasible",
        highspy.HighsModelStatus.kTimeLimit: "time limit",
    }.get(status, "error")
    lines = [f"status {label}"]
    if label == "optimal":
        lines.append(f"objective {h.getInfo().objective_function_value!r}")
        names = [h.getColName(j)[1] for j in range(h.getNumCol())]
        values = h.getSolution().col_value
        lines.extend(f"{n} {float(v)!r}" for n, v in zip(names, values))
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
