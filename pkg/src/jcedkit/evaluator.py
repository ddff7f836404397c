"""Out-of-sample reliability and cost of a dispatch decision, and SAA/MSAA comparisons."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .builder import (
    BuildMode,
    BuildOptions,
    DispatchDecision,
    evaluate_objective_exact,
    line_expression,
    line_offsets,
    vn_alpha,
    vn_p_g,
    vn_r_dn,
    vn_r_up,
)
from .grid import GridCase, PtdfMatrix, compute_ptdf
from .reform import MSAA, SAA
from .scenarios import ScenarioSet
from .sfr import headroom_coefficients

FAMILIES = ("dibr_up", "sfr", "line_flow")
SHORTFALL_TOL = 1e-6
DEFAULT_SHED_PRICE = 5000.0


class EvaluationError(ValueError):
    pass


def decision_values(decision: DispatchDecision, case: GridCase) -> dict:
    """Variable-name view of a decision (the names used by the builder)."""
    out = {}
    for k, g in enumerate(case.thermal):
        out[vn_p_g(g)] = decision.p_g[k]
        out[vn_r_up(g)] = decision.r_up[k]
        out[vn_r_dn(g)] = decision.r_dn[k]
        out[vn_alpha(g)] = decision.alpha[k]
    for k, w in enumerate(case.dibr):
        out[f"p_w{w.id}"] = decision.p_w[k]
        out[f"H_w{w.id}"] = decision.H_w[k]
        out[f"D_w{w.id}"] = decision.D_w[k]
    for k, e in enumerate(case.storage):
        out[f"p_e{e.id}"] = decision.p_e[k]
        out[f"r_up_e{e.id}"] = decision.r_e_up[k]
        out[f"r_dn_e{e.id}"] = decision.r_e_dn[k]
        out[f"p_loss_e{e.id}"] = decision.p_loss[k]
        out[f"H_e{e.id}"] = decision.H_e[k]
        out[f"D_e{e.id}"] = decision.D_e[k]
    return {k: float(v) for k, v in out.items()}


def _check_dims(decision: DispatchDecision, case: GridCase, sset: ScenarioSet) -> None:
    sizes = {"p_g": len(case.thermal), "p_w": len(case.dibr), "p_e": len(case.storage)}
    for name, n in sizes.items():
        if len(getattr(decision, name)) != n:
            raise EvaluationError(f"decision.{name} has {len(getattr(decision, name))} entries, case has {n}")
    if sset.p_bar_w.shape[1] != len(case.dibr):
        raise EvaluationError("scenario set and case disagree on the number of DIBRs")
    if tuple(sset.bus_ids) != tuple(case.bus_ids):
        raise EvaluationError("scenario set and case disagree on bus ids")


def shortfalls(
    decision: DispatchDecision, case: GridCase, sset: ScenarioSet, ptdf: Optional[PtdfMatrix] = None
) -> dict:
    """Unmet MW per scenario (shape (n,)) for each family.

    dibr_up: sum over DIBRs of (p_w + primary headroom - available)+.
    sfr: sum over units of (alpha dp - r_up)+ + (-alpha dp - r_dn)+.
    line_flow: sum over lines of the worst overload under up or down AGC deployment.
    """
    _check_dims(decision, case, sset)
    thr = case.thresholds
    n = sset.n
    out = {}
    dibr = np.zeros(n)
    for k, w in enumerate(case.dibr):
        kH, kD = headroom_coefficients(thr, w.p_cap)
        need = decision.p_w[k] + kH * decision.H_w[k] + kD * decision.D_w[k]
        dibr += np.maximum(need - sset.p_bar_w[:, k], 0.0)
    out["dibr_up"] = dibr
    sfr = np.zeros(n)
    for k in range(len(case.thermal)):
        moved = decision.alpha[k] * sset.dp_L
        sfr += np.maximum(moved - decision.r_up[k], 0.0) + np.maximum(-moved - decision.r_dn[k], 0.0)
    out["sfr"] = sfr
    lines = np.zeros(n)
    if case.lines:
        ptdf = compute_ptdf(case) if ptdf is None else ptdf
        vals = decision_values(decision, case)
        e = line_offsets(case, sset, ptdf)
        for li, ln in enumerate(case.lines):
            worst = np.zeros(n)
            for res in ("up", "dn"):
                flow = sum(c * vals[v] for v, c in line_expression(case, ptdf, li, res).items()) - e[:, li]
                worst = np.maximum(worst, np.abs(flow) - ln.F_l)
            lines += np.maximum(worst, 0.0)
    out["line_flow"] = lines
    return out


@dataclass
class ExPostReport:
    deficiency: dict  # family -> probability
    violations: dict  # family -> violating scenario count
    objective_cost: float
    expost_cost: float
    total_cost: float
    n_test: int
    seed: Optional[int]
    shed_price: float
    wall_times: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self, title: str = "Ex-post evaluation") -> str:
        rows = [(f, f"{100.0 * self.deficiency[f]:.2f}%", str(self.violations[f])) for f in FAMILIES]
        lines = [title, format_table(("family", "deficiency", "scenarios"), rows), ""]
        costs = [
            ("objective cost", f"{self.objective_cost:.2f}"),
            ("ex-post cost", f"{self.expost_cost:.2f}"),
            ("total cost", f"{self.total_cost:.2f}"),
        ]
        lines.append(format_table(("item", "$"), costs))
        lines.append(f"test scenarios: {self.n_test} (seed {self.seed}), shed price {self.shed_price:g} $/MWh")
        return "\n".join(lines)


def ex_post_evaluate(
    decision: DispatchDecision,
    case: GridCase,
    ptdf: Optional[PtdfMatrix],
    test: ScenarioSet,
    shed_price: float = DEFAULT_SHED_PRICE,
    fuel_segments: int = 3,
    wall_times: Optional[dict] = None,
) -> ExPostReport:
    """Joint deficiency probability per family (a scenario violating any row of a family counts once)
    and ex-post cost shed_price * dt * E[total unmet MW]."""
    short = shortfalls(decision, case, test, ptdf)
    deficiency, counts = {}, {}
    total_unmet = np.zeros(test.n)
    for f in FAMILIES:
        bad = short[f] > SHORTFALL_TOL
        counts[f] = int(np.count_nonzero(bad))
        deficiency[f] = float(np.dot(test.probs, bad))
        total_unmet += np.where(bad, short[f], 0.0)
    expost = shed_price * case.thresholds.dt * float(np.dot(test.probs, total_unmet))
    objective = evaluate_objective_exact(decision, test, case, fuel_segments)
    return ExPostReport(deficiency, counts, objective, expost, objective + expost, test.n, test.seed, shed_price,
                        dict(wall_times or {}))


# ---------------------------------------------------------------- method comparison


@dataclass
class MethodRow:
    method: str
    objective: float
    exact_objective: float
    wall_time: float  # reformulate + solve, best of the repeats
    solve_time: float
    variables: int
    rows: int
    integers: int
    mixing_cuts: int
    aggregated_cuts: int
    status: str


@dataclass
class Comparison:
    n: int
    seed: Optional[int]
    rows: list
    cost_error: Optional[float] = None  # (saa - msaa) / saa
    speedup: Optional[float] = None  # 1 - t_msaa / t_saa
    results: dict = field(default_factory=dict, repr=False)

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "methods": [asdict(r) for r in self.rows],
            "cost_error": self.cost_error,
            "speedup": self.speedup,
        }

    def to_text(self) -> str:
        body = [
            (r.method, f"{r.objective:.2f}", f"{r.wall_time:.3f}", str(r.variables), str(r.rows), str(r.integers),
             str(r.mixing_cuts + r.aggregated_cuts), r.status)
            for r in self.rows
        ]
        out = [f"Objective cost and computational time (n = {self.n}, seed {self.seed})",
               format_table(("method", "objective $", "time s", "vars", "rows", "binaries", "cuts", "status"), body)]
        if self.cost_error is not None:
            out.append(f"cost error (saa - msaa)/saa: {100.0 * self.cost_error:.3f}%")
        if self.speedup is not None:
            out.append(f"time reduction 1 - t_msaa/t_saa: {100.0 * self.speedup:.2f}%")
        return "\n".join(out)


def compare_methods(
    case: GridCase,
    sset: ScenarioSet,
    methods: Sequence[str] = (SAA, MSAA),
    repeats: int = 1,
    mode: BuildMode = BuildMode(),
    opts: BuildOptions = BuildOptions(),
    backend: Optional[str] = None,
    time_limit: Optional[float] = None,
) -> Comparison:
    """Solve the same instance with each method; wall time is the best of ``repeats`` runs of
    reformulation plus solve (the build is shared and excluded)."""
    from .builder import build_model
    from .pipeline import solve_dispatch

    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ptdf = compute_ptdf(case)
    model = build_model(case, sset, mode, opts, ptdf)
    boundary = _boundary_of(model)
    rows, results = [], {}
    for method in methods:
        best = None
        for _ in range(repeats):
            res = solve_dispatch(case, sset, method, mode, opts, backend, time_limit, ptdf=ptdf, boundary=boundary)
            t = res.timings["reformulate"] + res.timings["solve"]
            if best is None or t < best[0]:
                best = (t, res)
        t, res = best
        fam = res.program.stats.get("families", {})
        rows.append(MethodRow(
            method, res.objective, res.exact_objective, t, res.timings["solve"], res.program.n_vars, res.program.n_rows,
            res.program.n_integer, sum(f.get("mixing_cuts", 0) for f in fam.values()),
            sum(f.get("aggregated_cuts", 0) for f in fam.values()), res.status,
        ))
        results[method] = res
    cmp = Comparison(sset.n, sset.seed, rows, results=results)
    names = [r.method for r in rows]
    if SAA in names and MSAA in names:
        saa, msaa = cmp.row(SAA), cmp.row(MSAA)
        cmp.cost_error = relative_cost_error(saa.objective, msaa.objective)
        cmp.speedup = 1.0 - msaa.wall_time / saa.wall_time if saa.wall_time > 0 else None
    elif len(rows) == 2:
        cmp.cost_error = relative_cost_error(rows[0].objective, rows[1].objective)
    return cmp


def relative_cost_error(reference: float, other: float) -> float:
    if reference == other:
        return 0.0
    return (reference - other) / abs(reference)


def _boundary_of(model):
    from .sfr import PwlBoundary

    doc = model.meta.get("nadir_boundary")
    if doc is None:
        return None
    return PwlBoundary.from_dict(doc)


# ---------------------------------------------------------------- text output


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Aligned plain-text table: first column left-aligned, the rest right-aligned."""
    cols = list(zip(*([tuple(header)] + [tuple(r) for r in rows])))
    widths = [max(len(str(c)) for c in col) for col in cols]

    def fmt(r):
        cells = [str(c).ljust(widths[0]) if k == 0 else str(c).rjust(widths[k]) for k, c in enumerate(r)]
        return "  ".join(cells).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in rows])


def curve_csv(points: Sequence[dict], path=None) -> str:
    """Plot data for cost/time against n: one row per (n, method)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "method", "objective", "wall_time_s"])
    for p in points:
        w.writerow([p["n"], p["method"], repr(float(p["objective"])), repr(float(p["wall_time"]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
