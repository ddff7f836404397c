"""Build, reformulate and solve one dispatch instance, returning the decision with its costs."""
from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field
from typing import Optional

from .builder import (
    BuildMode,
    BuildOptions,
    DispatchDecision,
    build_model,
    decision_from_values,
    evaluate_objective_exact,
    objective_value,
)
from .grid import GridCase, PtdfMatrix, compute_ptdf
from .model import SymbolicModel
from .reform import MSAA, reformulate
from .scenarios import ScenarioSet
from .sfr import PwlBoundary
from .solver import CanonicalProgram, Solution, solve


class InfeasibleError(RuntimeError):
    def __init__(self, message: str, family: str):
        super().__init__(message)
        self.family = family


@dataclass
class SolveResult:
    method: str
    mode: str
    status: str
    objective: float  # optimal value of the solved program
    exact_objective: float  # redispatch capped at the reserves
    c1_objective: float  # linearized redispatch
    decision: Optional[DispatchDecision]
    solution: Solution
    program: CanonicalProgram
    model: SymbolicModel
    timings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "mode": self.mode,
            "status": self.status,
            "objective": self.objective,
            "exact_objective": self.exact_objective,
            "c1_objective": self.c1_objective,
            "solver": self.solution.solver,
            "timings": self.timings,
            "variables": self.program.n_vars,
            "rows": self.program.n_rows,
            "integers": self.program.n_integer,
            "families": self.program.stats.get("families", {}),
            "warnings": list(self.model.warnings),
        }


def solve_dispatch(
    case: GridCase,
    sset: ScenarioSet,
    method: str = MSAA,
    mode: BuildMode = BuildMode(),
    opts: BuildOptions = BuildOptions(),
    backend: Optional[str] = None,
    time_limit: Optional[float] = None,
    gap: float = 1e-6,
    ptdf: Optional[PtdfMatrix] = None,
    boundary: Optional[PwlBoundary] = None,
    strengthen: bool = True,
    aggregated: bool = True,
    saa_strengthen: bool = True,
    diagnose: bool = True,
) -> SolveResult:
    ptdf = compute_ptdf(case) if ptdf is None else ptdf
    t0 = time.perf_counter()
    model = build_model(case, sset, mode, opts, ptdf, boundary)
    t1 = time.perf_counter()
    program = reformulate(model, method, strengthen=strengthen, aggregated=aggregated, saa_strengthen=saa_strengthen)
    t2 = time.perf_counter()
    sol = solve(program, backend=backend, time_limit=time_limit, gap=gap)
    timings = {"build": t1 - t0, "reformulate": t2 - t1, "solve": sol.wall_time, "total": time.perf_counter() - t0}
    if sol.status == "infeasible" and diagnose:
        family = infeasible_family(model, method, backend)
        raise InfeasibleError(f"{method} program is infeasible; first failing family: {family}", family)
    decision = None
    exact = c1 = math.nan
    if sol.x is not None and sol.status in ("optimal", "limit"):
        decision = decision_from_values(sol.values, case)
        exact = evaluate_objective_exact(decision, sset, case, opts.fuel_segments)
        c1 = objective_value(decision, sset, case, "c1", "pwl", opts.fuel_segments)
    return SolveResult(method, mode.kind, sol.status, sol.objective, exact, c1, decision, sol, program, model, timings)


def infeasible_family(model: SymbolicModel, method: str = MSAA, backend: Optional[str] = None) -> str:
    """Name the first group of rows whose addition makes the program infeasible: the deterministic
    rows, then each chance block in turn."""
    trial = copy.copy(model)
    trial.blocks = []
    if solve(reformulate(trial, method), backend=backend).status == "infeasible":
        return "deterministic"
    for blk in model.blocks:
        trial.blocks = [blk]
        if solve(reformulate(trial, method), backend=backend).status == "infeasible":
            return blk.kind
    return "combination"


def robust_case(case: GridCase) -> GridCase:
    """Same case with every significance level set to zero (all scenarios enforced)."""
    return case.replace_thresholds(case.thresholds.with_overrides(
        delta_F=0.0, delta_DIBR=0.0, delta_SFR=0.0, delta_L=0.0, delta_R=0.0))
