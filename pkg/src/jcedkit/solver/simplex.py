"""Embedded fallback solver: bounded-variable primal simplex and best-first branch-and-bound.

Dense linear algebra throughout; adequate for desk-scale programs (a few hundred rows).
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .program import EQ, GE, LE, CanonicalProgram

OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT = "optimal", "infeasible", "unbounded", "limit"


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    iterations: int = 0


class _Simplex:
    """min c.x  s.t.  A x = b,  l <= x <= u  (bounds may be infinite)."""

    def __init__(self, A, b, c, l, u, tol=1e-9, max_iter=50000, deadline=None):
        self.A, self.b, self.c, self.l, self.u = A, b, c, l, u
        self.m, self.n = A.shape
        self.tol = tol
        self.max_iter = max_iter
        self.deadline = deadline
        self.iterations = 0

    def _nonbasic_value(self, j):
        if math.isfinite(self.l[j]):
            return self.l[j]
        if math.isfinite(self.u[j]):
            return self.u[j]
        return 0.0

    def run(self, cost, basis, x):
        """Primal simplex from a feasible basic solution. Returns status, x, basis."""
        A, l, u, tol = self.A, self.l, self.u, self.tol
        m = self.m
        B = np.array(basis)
        Binv = np.linalg.inv(A[:, B])
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[B] = True
        degenerate_run = 0
        since_refactor = 0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iter or (self.deadline is not None and time.perf_counter() > self.deadline):
                return LIMIT, x, B
            if since_refactor >= 60:
                Binv = np.linalg.inv(A[:, B])
                x[B] = Binv @ (self.b - A[:, ~in_basis] @ x[~in_basis])
                since_refactor = 0
            y = cost[B] @ Binv
            d = cost - y @ A
            d[in_basis] = 0.0
            at_lower = (x <= l + tol) & np.isfinite(l)
            at_upper = (x >= u - tol) & np.isfinite(u)
            free = ~at_lower & ~at_upper
            can_up = ~in_basis & (d < -tol) & (~at_upper | free) & (u - x > tol)
            can_dn = ~in_basis & (d > tol) & (~at_lower | free) & (x - l > tol)
            cand = can_up | can_dn
            if not cand.any():
                return OPTIMAL, x, B
            if degenerate_run > 50:
                j = int(np.flatnonzero(cand)[0])  # Bland's rule
            else:
                score = np.where(cand, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if can_up[j] else -1.0
            col = Binv @ A[:, j]
            # basic variables move by -direction * col * t
            delta = -direction * col
            step = u[j] - l[j] if math.isfinite(u[j] - l[j]) else math.inf
            leave = -1
            leave_to_upper = False
            for r in range(m):
                dr = delta[r]
                bj = B[r]
                if dr < -tol:
                    if math.isfinite(l[bj]):
                        t = (x[bj] - l[bj]) / -dr
                        if t < step - 1e-12 or (leave >= 0 and abs(t - step) <= 1e-12 and degenerate_run > 50 and bj < B[leave]):
                            step, leave, leave_to_upper = max(t, 0.0), r, False
                elif dr > tol:
                    if math.isfinite(u[bj]):
                        t = (u[bj] - x[bj]) / dr
                        if t < step - 1e-12 or (leave >= 0 and abs(t - step) <= 1e-12 and degenerate_run > 50 and bj < B[leave]):
                            step, leave, leave_to_upper = max(t, 0.0), r, True
            if not math.isfinite(step):
                return UNBOUNDED, x, B
            degenerate_run = degenerate_run + 1 if step <= 1e-12 else 0
            x[j] += direction * step
            x[B] += delta * step
            if leave < 0:
                # bound flip of the entering variable
                x[j] = u[j] if direction > 0 else l[j]
                continue
            out = B[leave]
            x[out] = u[out] if leave_to_upper else l[out]
            # product-form update of the inverse
            piv = col[leave]
            row = Binv[leave] / piv
            Binv -= np.outer(col, row)
            Binv[leave] = row
            B[leave] = j
            in_basis[out] = False
            in_basis[j] = True
            since_refactor += 1


def solve_lp_dense(c, A_eq, b_eq, l, u, tol=1e-9, max_iter=50000, deadline=None) -> LpResult:
    """Two-phase bounded simplex on equality form."""
    m, n = A_eq.shape
    sim = _Simplex(A_eq, b_eq, c, l, u, tol, max_iter, deadline)
    x = np.array([sim._nonbasic_value(j) for j in range(n)], dtype=float)
    r = b_eq - A_eq @ x
    sign = np.where(r >= 0, 1.0, -1.0)
    # artificials a >= 0 with A x + diag(sign) a = b
    A1 = np.hstack([A_eq, np.diag(sign)])
    l1 = np.concatenate([l, np.zeros(m)])
    u1 = np.concatenate([u, np.full(m, np.inf)])
    x1 = np.concatenate([x, np.abs(r)])
    phase1 = _Simplex(A1, b_eq, None, l1, u1, tol, max_iter, deadline)
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    status, x1, B = phase1.run(cost1, list(range(n, n + m)), x1)
    iters = phase1.iterations
    if status == LIMIT:
        return LpResult(LIMIT, iterations=iters)
    scale = max(1.0, float(np.max(np.abs(b_eq))) if m else 1.0)
    if x1[n:].sum() > 1e-7 * scale:
        return LpResult(INFEASIBLE, iterations=iters)
    # phase 2: artificials pinned at zero, possibly still basic
    u1[n:] = 0.0
    x1[n:] = 0.0
    phase2 = _Simplex(A1, b_eq, None, l1, u1, tol, max_iter, deadline)
    cost2 = np.concatenate([c, np.zeros(m)])
    status, x1, B = phase2.run(cost2, list(B), x1)
    iters += phase2.iterations
    if status != OPTIMAL:
        return LpResult(status, iterations=iters)
    # recompute the basic values once from the final basis for accuracy
    Bm = np.asarray(B)
    nonb = np.ones(n + m, dtype=bool)
    nonb[Bm] = False
    x1[Bm] = np.linalg.solve(A1[:, Bm], b_eq - A1[:, nonb] @ x1[nonb])
    x = x1[:n]
    return LpResult(OPTIMAL, x, float(c @ x), iters)


def _equality_form(p: CanonicalProgram, lb, ub):
    """Append one slack per inequality row: A x + s = rhs with s >= 0 (<=) or s <= 0 (>=)."""
    A = p.A.toarray()
    m = A.shape[0]
    slack_l, slack_u = np.zeros(m), np.zeros(m)
    for k, s in enumerate(p.senses):
        if s == LE:
            slack_u[k] = np.inf
        elif s == GE:
            slack_l[k] = -np.inf
    A_eq = np.hstack([A, np.eye(m)])
    c = np.concatenate([p.c, np.zeros(m)])
    return A_eq, p.rhs.astype(float), c, np.concatenate([lb, slack_l]), np.concatenate([ub, slack_u])


def solve_lp(p: CanonicalProgram, lb=None, ub=None, deadline=None) -> LpResult:
    lb = p.lb if lb is None else lb
    ub = p.ub if ub is None else ub
    if np.any(lb > ub + 1e-12):
        return LpResult(INFEASIBLE)
    if p.n_rows == 0:
        # separable: each variable sits at the bound its cost points to
        x = np.where(p.c > 0, lb, np.where(p.c < 0, ub, np.clip(0.0, lb, ub)))
        if not np.all(np.isfinite(x)):
            return LpResult(UNBOUNDED)
        return LpResult(OPTIMAL, x, float(p.c @ x), 0)
    A_eq, b, c, l, u = _equality_form(p, lb, ub)
    res = solve_lp_dense(c, A_eq, b, l, u, deadline=deadline)
    if res.status == OPTIMAL:
        x = np.clip(res.x[: p.n_vars], lb, ub)
        return LpResult(OPTIMAL, x, float(p.c @ x), res.iterations)
    return LpResult(res.status, iterations=res.iterations)


@dataclass
class MipResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    bound: float
    nodes: int


def solve_mip(p: CanonicalProgram, gap: float = 1e-6, time_limit: Optional[float] = None, int_tol: float = 1e-6) -> MipResult:
    """Best-first branch-and-bound on the most fractional integer variable."""
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    ints = np.flatnonzero(p.integer)
    lb0 = p.lb.copy()
    ub0 = p.ub.copy()
    lb0[ints] = np.ceil(lb0[ints] - int_tol)
    ub0[ints] = np.floor(ub0[ints] + int_tol)
    best_x, best_obj = None, math.inf
    counter = 0
    root = solve_lp(p, lb0, ub0, deadline)
    if root.status == UNBOUNDED:
        return MipResult(UNBOUNDED, None, math.nan, math.nan, 1)
    if root.status == LIMIT:
        return MipResult(LIMIT, None, math.nan, -math.inf, 1)
    if root.status != OPTIMAL:
        return MipResult(INFEASIBLE, None, math.nan, math.nan, 1)
    heap = [(root.objective, counter, lb0, ub0, root.x)]
    nodes = 1
    global_bound = root.objective
    while heap:
        bound, _, lb, ub, x = heapq.heappop(heap)
        global_bound = bound
        if best_x is not None and bound >= best_obj - gap * max(1.0, abs(best_obj)):
            global_bound = best_obj
            heap.clear()
            break
        frac = np.abs(x[ints] - np.round(x[ints]))
        if frac.size == 0 or frac.max() <= int_tol:
            if bound < best_obj:
                best_obj, best_x = bound, x
            continue
        j = int(ints[int(np.argmax(frac))])
        for side in (0, 1):
            lb2, ub2 = lb.copy(), ub.copy()
            if side == 0:
                ub2[j] = math.floor(x[j])
            else:
                lb2[j] = math.ceil(x[j])
            if deadline is not None and time.perf_counter() > deadline:
                return MipResult(LIMIT, best_x, best_obj if best_x is not None else math.nan, global_bound, nodes)
            res = solve_lp(p, lb2, ub2, deadline)
            nodes += 1
            if res.status == LIMIT:
                return MipResult(LIMIT, best_x, best_obj if best_x is not None else math.nan, global_bound, nodes)
            if res.status == OPTIMAL and (best_x is None or res.objective < best_obj - gap * max(1.0, abs(best_obj))):
                counter += 1
                heapq.heappush(heap, (res.objective, counter, lb2, ub2, res.x))
    if best_x is None:
        return MipResult(INFEASIBLE, None, math.nan, math.nan, nodes)
    x = best_x.copy()
    x[ints] = np.round(x[ints])
    return MipResult(OPTIMAL, x, float(p.c @ x), global_bound if heap else best_obj, nodes)
