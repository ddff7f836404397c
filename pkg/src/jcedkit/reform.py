"""Scenario reformulations of the chance blocks.

Every chance row reads a.x >= b_i for scenario i. With base value b0 = max(min_i b_i, known lower
bound of a.x) and offsets w_i = b_i - b0 >= 0, the row becomes a.x - y = b0 with y >= w_i (1 - z_i),
and each indicator family carries one budget sum_i p_i z_i <= delta.

``saa`` keeps z binary (a MILP). ``msaa`` relaxes z to [0, 1] and adds the mixing inequality of
each row (and an aggregated inequality for each two-sided line limit), giving an LP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ChanceBlock, ChanceRow, SymbolicModel
from .scenarios import droppable_count, empirical_quantile
from .solver.program import CanonicalProgram, ProgramBuilder

SAA = "saa"
MSAA = "msaa"
METHODS = (SAA, MSAA)


class ReformError(ValueError):
    pass


# ---------------------------------------------------------------- mixing sets


@dataclass(frozen=True)
class MixingSet:
    """{(y, z): y >= w_i (1 - z_i), sum p_i z_i <= delta} for one chance row."""

    w: np.ndarray
    probs: np.ndarray
    delta: float

    def __post_init__(self):
        if np.any(self.w < 0):
            raise ReformError("negative scenario offset w_i: base value computed incorrectly")

    @property
    def k(self) -> int:
        return droppable_count(self.probs, self.delta)

    def order(self) -> np.ndarray:
        """Scenario indices by nonincreasing offset (stable on ties)."""
        return np.argsort(-self.w, kind="stable")

    def floor(self) -> float:
        """w of the (k+1)-th largest offset: a valid lower bound on y for binary z."""
        k = self.k
        o = self.order()
        return float(self.w[o[k]]) if k < len(o) else 0.0


def mixing_cut(ms: MixingSet, seq: Optional[Sequence[int]] = None, tail: float = 0.0) -> tuple[dict, float]:
    """y + sum_s (w_{j_s} - w_{j_{s+1}}) z_{j_s} >= w_{j_1} for the sequence seq (sorted by
    nonincreasing w; the value after the last element is ``tail``). Returns (z coefficients, rhs);
    the coefficient of y is 1."""
    if seq is None:
        seq = ms.order()[: ms.k + 1]
    seq = list(seq)
    if not seq:
        return {}, tail
    vals = ms.w[seq]
    if np.any(np.diff(vals) > 0):
        raise ReformError("mixing sequence must be sorted by nonincreasing offset")
    if vals[-1] < tail:
        raise ReformError("sequence tail exceeds the last offset")
    nxt = np.append(vals[1:], tail)
    coefs = {int(j): float(a - b) for j, a, b in zip(seq, vals, nxt) if a - b != 0.0}
    return coefs, float(vals[0])


@dataclass(frozen=True)
class TwoSidedMixingSet:
    """Two offsets per scenario for a limit lo_i <= a.x <= hi_i written as y_low + y_up = K with
    y_low >= v_low_i (1 - z_i) and y_up >= v_up_i (1 - z_i).

    shift="min" measures both sides from their smallest requirement (v >= 0 always). shift="capacity"
    uses v_low = F + e_i, v_up = F - e_i with K = 2F (needs |e_i| <= F)."""

    v_low: np.ndarray
    v_up: np.ndarray
    K: float
    probs: np.ndarray
    delta: float

    @classmethod
    def for_line(cls, e: np.ndarray, F: float, probs, delta, shift: str = "min") -> "TwoSidedMixingSet":
        e = np.asarray(e, dtype=float)
        if shift == "min":
            return cls(e - e.min(), e.max() - e, 2.0 * F + e.max() - e.min(), np.asarray(probs), delta)
        if shift == "capacity":
            v_low, v_up = F + e, F - e
            if np.any(v_low < 0) or np.any(v_up < 0):
                raise ReformError("capacity shift needs |e_i| <= F_l for every scenario")
            return cls(v_low, v_up, 2.0 * F, np.asarray(probs), delta)
        raise ReformError(f"unknown shift {shift!r}")

    @property
    def k(self) -> int:
        return droppable_count(self.probs, self.delta)


def aggregated_cut(ts: TwoSidedMixingSet) -> tuple[dict, float]:
    """(y_low + y_up) + sum_{tau_R} dv_low z + sum_{tau_G} dv_up z >= v_low_{r1} + v_up_{g1}, with
    tau_R, tau_G the top-(k+1) sequences of v_low and v_up. Returned as z coefficients and rhs; the
    caller supplies the y_low + y_up = K part."""
    low = MixingSet(ts.v_low, ts.probs, ts.delta)
    up = MixingSet(ts.v_up, ts.probs, ts.delta)
    c1, r1 = mixing_cut(low)
    c2, r2 = mixing_cut(up)
    coefs = dict(c1)
    for j, v in c2.items():
        coefs[j] = coefs.get(j, 0.0) + v
    return coefs, r1 + r2


# ---------------------------------------------------------------- reformulation


def row_offsets(row: ChanceRow) -> tuple[float, np.ndarray]:
    b = np.asarray(row.b, dtype=float)
    b0 = max(float(b.min()), row.lower)
    w = b - b0
    if b0 == float(b.min()) and np.any(w < 0):
        raise ReformError(f"negative offset in row {row.name}")
    return b0, np.maximum(w, 0.0)


def _sense_coefs(pb: ProgramBuilder, coefs: dict) -> tuple[list, list]:
    return [pb.col(v) for v in coefs], list(coefs.values())


def reformulate(
    model: SymbolicModel,
    method: str = MSAA,
    strengthen: bool = True,
    aggregated: bool = True,
    saa_strengthen: bool = True,
) -> CanonicalProgram:
    """Deterministic rows pass through; chance blocks become SAA (binary z) or MSAA (relaxed z plus
    mixing and aggregated mixing inequalities). ``strengthen`` applies to MSAA and replaces each row's
    offsets below the (k+1)-th largest by a lower bound on y; ``saa_strengthen`` does the same for SAA.
    For binary z the strengthened and plain big-M rows admit exactly the same integer points; the
    plain form (``saa_strengthen=False``) is kept for cross-checks and is far slower to solve."""
    if method not in METHODS:
        raise ReformError(f"unknown method {method!r}; expected one of {METHODS}")
    pb = ProgramBuilder(f"jced_{method}")
    for v in model.variables.values():
        pb.var(v.name, v.lb, v.ub, v.is_integer, model.objective.get(v.name, 0.0))
    pb.offset = model.objective_offset
    for r in model.rows:
        pb.row(r.name, r.coefs, r.sense, r.rhs)
    probs = np.asarray(model.probs, dtype=float)
    stats = {"method": method, "families": {}}
    for blk in model.blocks:
        stats["families"][blk.kind] = _transform_block(pb, blk, probs, method, strengthen, aggregated, saa_strengthen)
    pb.stats = stats
    return pb.build()


def _transform_block(pb, blk: ChanceBlock, probs, method, strengthen, aggregated, saa_strengthen) -> dict:
    n = len(probs)
    k = droppable_count(probs, blk.delta)
    info = {"delta": blk.delta, "k": k, "rows": len(blk.rows), "indicators": 0, "mixing_cuts": 0, "aggregated_cuts": 0}
    if not blk.joint:
        for row in blk.rows:
            q = empirical_quantile(row.b, probs, blk.delta, "upper")
            pb.row(f"icc_{row.name}", row.coefs, ">=", max(q, row.lower) if math.isfinite(row.lower) else q)
        info["mode"] = "individual"
        return info
    if k >= n:
        # every scenario may be dropped: the block constrains nothing
        info["mode"] = "vacuous"
        return info
    if k == 0:
        for row in blk.rows:
            pb.row(f"robust_{row.name}", row.coefs, ">=", float(np.max(row.b)))
        info["mode"] = "robust"
        return info

    binary = method == SAA
    tighten = strengthen if method == MSAA else saa_strengthen
    z = [pb.var(f"z_{blk.family}_{i}", 0.0, 1.0, integer=binary) for i in range(n)]
    info["indicators"] = n
    pb.row(f"budget_{blk.family}", (z, probs), "<=", blk.delta)
    ynames = {}
    sets = {}
    for row in blk.rows:
        b0, w = row_offsets(row)
        ms = MixingSet(w, probs, blk.delta)
        sets[row.name] = ms
        y = pb.var(f"y_{row.name}", 0.0, math.inf)
        ynames[row.name] = y
        cols, vals = _sense_coefs(pb, row.coefs)
        pb.row(f"def_{row.name}", (cols + [y], vals + [-1.0]), "=", b0)
        order = ms.order()
        if tighten:
            floor = ms.floor()
            pb.set_bounds(f"y_{row.name}", lb=floor)
            for i in order[:k]:
                if w[i] > floor:
                    pb.row(f"mix_{row.name}_{i}", ([y, z[i]], [1.0, w[i] - floor]), ">=", w[i])
        else:
            for i in range(n):
                pb.row(f"mix_{row.name}_{i}", ([y, z[i]], [1.0, w[i]]), ">=", w[i])
        if method == MSAA:
            seq = order[:k] if tighten else order[: k + 1]
            coefs, rhs = mixing_cut(ms, seq, ms.floor() if tighten else 0.0)
            if coefs:
                pb.row(f"cut_{row.name}", ([y] + [z[j] for j in coefs], [1.0] + list(coefs.values())), ">=", rhs)
                info["mixing_cuts"] += 1
    if method == MSAA and aggregated:
        pairs: dict = {}
        for row in blk.rows:
            if row.pair:
                pairs.setdefault(row.pair, []).append(row)
        for key, (lo, hi) in ((k_, v) for k_, v in pairs.items() if len(v) == 2):
            ts = TwoSidedMixingSet(sets[lo.name].w, sets[hi.name].w, 0.0, probs, blk.delta)
            coefs, rhs = aggregated_cut(ts)
            if coefs:
                cols = [ynames[lo.name], ynames[hi.name]] + [z[j] for j in coefs]
                pb.row(f"agg_{key}", (cols, [1.0, 1.0] + list(coefs.values())), ">=", rhs)
                info["aggregated_cuts"] += 1
    info["mode"] = "binary" if binary else "relaxed"
    return info


def fix_indicators(program: CanonicalProgram, values: dict) -> CanonicalProgram:
    """Copy of the program with every indicator z_* fixed to the given (rounded) values and no
    integrality left."""
    lb, ub = program.lb.copy(), program.ub.copy()
    for j, name in enumerate(program.names):
        if name.startswith("z_") and name in values:
            v = float(round(values[name]))
            lb[j] = ub[j] = v
    return program.with_bounds(lb, ub).relaxed()


def indicator_values(program: CanonicalProgram, x: np.ndarray) -> dict:
    return {n: float(x[j]) for j, n in enumerate(program.names) if n.startswith("z_")}
