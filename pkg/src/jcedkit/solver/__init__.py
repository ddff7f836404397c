"""Solve a CanonicalProgram with HiGHS (through scipy), the embedded simplex, or an external executable.

Whatever the backend, an ``optimal`` answer is re-checked here against every row and bound at an
absolute tolerance of 1e-6 before it is returned.
"""
from __future__ import annotations

import math
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .mpsio import export_model, parse_solution, read_mps, write_lp, write_mps
from .program import EQ, GE, LE, CanonicalProgram, ProgramBuilder, ProgramError, from_arrays

__all__ = [
    "BackendError", "CanonicalProgram", "FeasibilityError", "ProgramBuilder", "ProgramError", "Solution",
    "export_model", "from_arrays", "read_mps", "resolve_backend", "solve", "write_lp", "write_mps",
]

OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT = "optimal", "infeasible", "unbounded", "limit"
FEAS_TOL = 1e-6
ENV_BACKEND = "JCEDKIT_BACKEND"
DEFAULT_BACKEND = "highs"


class BackendError(RuntimeError):
    pass


class FeasibilityError(BackendError):
    """A backend reported optimality but the independent re-check found a violated row or bound."""


@dataclass
class Solution:
    status: str
    objective: float
    values: dict
    x: Optional[np.ndarray]
    wall_time: float
    solver: str
    bound: float = math.nan
    violation: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def resolve_backend(backend: Optional[str] = None) -> str:
    env = os.environ.get(ENV_BACKEND)
    if env:
        return env
    return backend or DEFAULT_BACKEND


def solve(
    p: CanonicalProgram,
    backend: Optional[str] = None,
    time_limit: Optional[float] = None,
    gap: float = 1e-6,
    seed: int = 0,
    check: bool = True,
) -> Solution:
    """Minimize p. ``backend`` is ``highs``, ``embedded`` or ``exec:<path>``; the environment variable
    JCEDKIT_BACKEND overrides it."""
    name = resolve_backend(backend)
    t0 = time.perf_counter()
    if name == "highs":
        status, x, bound, info = _solve_highs(p, time_limit, gap, seed)
        ident = _highs_identity()
    elif name == "embedded":
        status, x, bound, info = _solve_embedded(p, time_limit, gap)
        ident = "embedded-simplex-bb"
    elif name.startswith("exec:"):
        status, x, bound, info = _solve_exec(p, name[5:], time_limit)
        ident = f"exec:{name[5:]}"
    else:
        raise BackendError(f"unknown backend {name!r}; expected highs, embedded or exec:<path>")
    wall = time.perf_counter() - t0
    violation = 0.0
    if status == OPTIMAL:
        if x is None:
            raise BackendError(f"{ident} reported optimal without a primal point")
        violation, where = p.max_violation(x)
        if check and violation > FEAS_TOL:
            raise FeasibilityError(f"{ident} solution violates {where} by {violation:.3g}")
    obj = p.objective(x) if x is not None and status in (OPTIMAL, LIMIT) else math.nan
    values = {n: float(v) for n, v in zip(p.names, x)} if x is not None else {}
    return Solution(status, obj, values, x, wall, ident, bound + p.offset if math.isfinite(bound) else bound,
                    violation, info)


# ---------------------------------------------------------------- backends


def _highs_identity() -> str:
    import scipy

    return f"highs(scipy {scipy.__version__})"


def _row_bounds(p: CanonicalProgram):
    lo = np.full(p.n_rows, -np.inf)
    hi = np.full(p.n_rows, np.inf)
    for k, s in enumerate(p.senses):
        if s in (GE, EQ):
            lo[k] = p.rhs[k]
        if s in (LE, EQ):
            hi[k] = p.rhs[k]
    return lo, hi


def _solve_highs(p: CanonicalProgram, time_limit, gap, seed):
    from scipy.optimize import Bounds, LinearConstraint, milp

    options = {"disp": False, "mip_rel_gap": gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    cons = []
    if p.n_rows:
        lo, hi = _row_bounds(p)
        cons.append(LinearConstraint(p.A, lo, hi))
    if p.n_vars == 0:
        return OPTIMAL, np.zeros(0), 0.0, {}
    # HiGHS can misjudge integer columns whose bounds are fractional, so round them inward first
    lb, ub = p.lb.copy(), p.ub.copy()
    lb[p.integer] = np.ceil(lb[p.integer] - 1e-9)
    ub[p.integer] = np.floor(ub[p.integer] + 1e-9)
    if np.any(lb > ub):
        return INFEASIBLE, None, math.nan, {"message": "empty integer range"}
    res = milp(p.c, constraints=cons, integrality=p.integer.astype(int), bounds=Bounds(lb, ub), options=options)
    info = {"message": res.message}
    bound = getattr(res, "mip_dual_bound", None)
    bound = float(bound) if bound is not None else math.nan
    if res.status == 0:
        return OPTIMAL, np.asarray(res.x, dtype=float), bound, info
    if res.status == 1:
        x = None if res.x is None else np.asarray(res.x, dtype=float)
        return LIMIT, x, bound, info
    if res.status == 2:
        return INFEASIBLE, None, math.nan, info
    if res.status == 3:
        return UNBOUNDED, None, math.nan, info
    if "unbounded or infeasible" in str(res.message):
        # HiGHS could not tell the two apart; a zero-objective solve decides feasibility
        probe = milp(np.zeros(p.n_vars), constraints=cons, integrality=p.integer.astype(int),
                     bounds=Bounds(lb, ub), options=options)
        return (UNBOUNDED if probe.status == 0 else INFEASIBLE), None, math.nan, info
    raise BackendError(f"HiGHS failed: {res.message}")


def _solve_embedded(p: CanonicalProgram, time_limit, gap):
    from .simplex import solve_lp, solve_mip

    if p.is_mip:
        r = solve_mip(p, gap=gap, time_limit=time_limit)
        return r.status, r.x, r.bound, {"nodes": r.nodes}
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    r = solve_lp(p, deadline=deadline)
    return r.status, r.x, r.objective if r.status == OPTIMAL else math.nan, {"iterations": r.iterations}


def _solve_exec(p: CanonicalProgram, path: str, time_limit):
    """Run ``<path> model.mps solution.sol`` and parse the ``<name> <value>`` solution file."""
    exe = Path(path)
    if not exe.exists():
        raise BackendError(f"solver executable not found: {path}")
    with tempfile.TemporaryDirectory(prefix="jcedkit_") as tmp:
        model = Path(tmp) / "model.mps"
        sol = Path(tmp) / "solution.sol"
        model.write_text(write_mps(p))
        try:
            proc = subprocess.run([str(exe), str(model), str(sol)], capture_output=True, text=True,
                                  timeout=None if time_limit is None else time_limit + 30)
        except subprocess.TimeoutExpired:
            return LIMIT, None, math.nan, {"message": "external solver timed out"}
        except OSError as exc:
            raise BackendError(f"cannot run {path}: {exc}") from exc
        if proc.returncode != 0 or not sol.exists():
            raise BackendError(f"{path} exited with code {proc.returncode}: {proc.stderr.strip()[:400]}")
        status, values, objective = parse_solution(sol.read_text(), p.names)
    if status == "unknown":
        raise BackendError(f"could not read a status from the solution file of {path}")
    x = np.array([values[n] for n in p.names]) if status in (OPTIMAL, LIMIT) else None
    return status, x, math.nan, {"reported_objective": objective}
