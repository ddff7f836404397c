"""Assemble the dispatch model: objective, deterministic rows and tagged chance-constraint blocks.

Powers are MW, inverter inertia H in s and droop D in p.u. on each device's own rating, so that the
aggregate inverter inertia is H^I = sum_k H_k cap_k / p_sys (same for D^I).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import GridCase, PtdfMatrix, Thresholds, compute_ptdf
from .model import ChanceBlock, ChanceRow, SymbolicModel
from .scenarios import ScenarioSet, disturbance_quantiles, empirical_quantile
from .sfr import PwlBoundary, aggregate, fit_nadir_boundary, headroom_coefficients, inverter_D_range

PO_JCED = "po-jced"
FIX_JCED = "fix-jced"
UP_ICED = "up-iced"
MODES = (PO_JCED, FIX_JCED, UP_ICED)


class BuildError(ValueError):
    pass


@dataclass(frozen=True)
class BuildMode:
    """Po-JCED (everything optimized), Fix-JCED (inverter H/D fixed) or Up-ICED (individual chance
    constraints, under-frequency side only)."""

    kind: str = PO_JCED
    fix_H: Optional[float] = None  # s, applied to every inverter device in fix-jced
    fix_D: Optional[float] = None  # p.u.

    def __post_init__(self):
        if self.kind not in MODES:
            raise BuildError(f"unknown mode {self.kind!r}; expected one of {MODES}")
        if self.kind == FIX_JCED and (self.fix_H is None or self.fix_D is None):
            raise BuildError("fix-jced needs both fix_H and fix_D")


@dataclass(frozen=True)
class BuildOptions:
    fuel_segments: int = 3
    nadir_pieces: int = 4


@dataclass(frozen=True)
class DispatchDecision:
    p_g: np.ndarray
    r_up: np.ndarray
    r_dn: np.ndarray
    alpha: np.ndarray
    p_w: np.ndarray
    H_w: np.ndarray
    D_w: np.ndarray
    p_e: np.ndarray
    r_e_up: np.ndarray
    r_e_dn: np.ndarray
    p_loss: np.ndarray
    H_e: np.ndarray
    D_e: np.ndarray

    FIELDS = ("p_g", "r_up", "r_dn", "alpha", "p_w", "H_w", "D_w", "p_e", "r_e_up", "r_e_dn", "p_loss", "H_e", "D_e")

    def to_dict(self, case: GridCase) -> dict:
        g = [u.id for u in case.thermal]
        w = [u.id for u in case.dibr]
        e = [u.id for u in case.storage]
        ids = {"p_g": g, "r_up": g, "r_dn": g, "alpha": g, "p_w": w, "H_w": w, "D_w": w,
               "p_e": e, "r_e_up": e, "r_e_dn": e, "p_loss": e, "H_e": e, "D_e": e}
        return {k: {str(i): float(v) for i, v in zip(ids[k], getattr(self, k))} for k in self.FIELDS}

    @classmethod
    def from_dict(cls, doc: dict, case: GridCase) -> "DispatchDecision":
        order = {
            "g": [str(u.id) for u in case.thermal],
            "w": [str(u.id) for u in case.dibr],
            "e": [str(u.id) for u in case.storage],
        }
        kind = {"p_g": "g", "r_up": "g", "r_dn": "g", "alpha": "g", "p_w": "w", "H_w": "w", "D_w": "w",
                "p_e": "e", "r_e_up": "e", "r_e_dn": "e", "p_loss": "e", "H_e": "e", "D_e": "e"}
        try:
            return cls(**{k: np.array([float(doc[k][i]) for i in order[kind[k]]]) for k in cls.FIELDS})
        except KeyError as err:
            raise BuildError(f"decision does not match the case: missing {err}") from None

    def replace(self, **kw) -> "DispatchDecision":
        data = {k: getattr(self, k) for k in self.FIELDS}
        data.update({k: np.asarray(v, dtype=float) for k, v in kw.items()})
        return DispatchDecision(**data)


# variable names -----------------------------------------------------------------


def vn_p_g(g):
    return f"p_g{g.id}"


def vn_r_up(g):
    return f"r_up_g{g.id}"


def vn_r_dn(g):
    return f"r_dn_g{g.id}"


def vn_alpha(g):
    return f"alpha_g{g.id}"


def vn_fuel(g):
    return f"fc_g{g.id}"


def decision_from_values(values: dict, case: GridCase) -> DispatchDecision:
    def col(names):
        return np.array([float(values[n]) for n in names])

    G, W, E = case.thermal, case.dibr, case.storage
    return DispatchDecision(
        p_g=col([vn_p_g(g) for g in G]),
        r_up=col([vn_r_up(g) for g in G]),
        r_dn=col([vn_r_dn(g) for g in G]),
        alpha=col([vn_alpha(g) for g in G]),
        p_w=col([f"p_w{w.id}" for w in W]),
        H_w=col([f"H_w{w.id}" for w in W]),
        D_w=col([f"D_w{w.id}" for w in W]),
        p_e=col([f"p_e{e.id}" for e in E]),
        r_e_up=col([f"r_up_e{e.id}" for e in E]),
        r_e_dn=col([f"r_dn_e{e.id}" for e in E]),
        p_loss=col([f"p_loss_e{e.id}" for e in E]),
        H_e=col([f"H_e{e.id}" for e in E]),
        D_e=col([f"D_e{e.id}" for e in E]),
    )


# variables ---------------------------------------------------------------------


def _add_variables(m: SymbolicModel, case: GridCase, thr: Thresholds, mode: BuildMode) -> None:
    for g in case.thermal:
        m.add_var(vn_p_g(g), g.p_min, g.p_max)
        m.add_var(vn_r_up(g), 0.0, g.ramp_up * 60.0 * thr.dt)
        m.add_var(vn_r_dn(g), 0.0, g.ramp_dn * 60.0 * thr.dt)
        m.add_var(vn_alpha(g), 0.0, 1.0 if g.is_agc else 0.0)
        m.add_var(vn_fuel(g), -math.inf, math.inf)
    for w in case.dibr:
        m.add_var(f"p_w{w.id}", 0.0, w.forecast)
        if mode.kind == FIX_JCED:
            _fixed(m, f"H_w{w.id}", mode.fix_H, w.H_max, "DIBR", w.id)
            _fixed(m, f"D_w{w.id}", mode.fix_D, w.D_max, "DIBR", w.id)
        else:
            m.add_var(f"H_w{w.id}", 0.0, w.H_max)
            m.add_var(f"D_w{w.id}", 0.0, w.D_max)
    for e in case.storage:
        m.add_var(f"p_e{e.id}", -e.p_max, e.p_max)
        m.add_var(f"r_up_e{e.id}", 0.0, 2.0 * e.p_max)
        m.add_var(f"r_dn_e{e.id}", 0.0, 2.0 * e.p_max)
        m.add_var(f"p_loss_e{e.id}", 0.0, math.inf)
        if mode.kind == FIX_JCED:
            _fixed(m, f"H_e{e.id}", mode.fix_H, e.H_max, "storage", e.id)
            _fixed(m, f"D_e{e.id}", mode.fix_D, e.D_max, "storage", e.id)
        else:
            m.add_var(f"H_e{e.id}", 0.0, e.H_max)
            m.add_var(f"D_e{e.id}", 0.0, e.D_max)


def _fixed(m, name, value, upper, kind, ident):
    if not 0.0 <= value <= upper:
        raise BuildError(f"fixed value {value} for {name} outside [0, {upper}] of {kind} {ident}")
    m.add_var(name, value, value)


# objective ---------------------------------------------------------------------


def fuel_breakpoints(g, segments: int) -> np.ndarray:
    return np.linspace(g.p_min, g.p_max, max(1, segments) + 1)


def fuel_cost(g, p: float) -> float:
    a, b, c = g.cost_coeffs
    return a + b * p + c * p * p


def fuel_cost_pwl(g, p: float, segments: int) -> float:
    """Value of the secant interpolant used in the model (max of the secant lines)."""
    xs = fuel_breakpoints(g, segments)
    if xs[0] == xs[-1]:
        return fuel_cost(g, p)
    best = -math.inf
    for x0, x1 in zip(xs[:-1], xs[1:]):
        slope = (fuel_cost(g, x1) - fuel_cost(g, x0)) / (x1 - x0)
        best = max(best, fuel_cost(g, x0) + slope * (p - x0))
    return best


def expected_abs_disturbance(sset: ScenarioSet) -> float:
    return float(np.dot(sset.probs, np.abs(sset.dp_L)))


def build_objective(m: SymbolicModel, case: GridCase, sset: ScenarioSet, opts: BuildOptions = BuildOptions()) -> None:
    """Fuel (secant epigraph) + reserve capacity + expected curtailment + storage loss/reserve + the
    linearized redispatch term c_r alpha_g E|dp_L|."""
    e_abs = expected_abs_disturbance(sset)
    for g in case.thermal:
        m.add_cost(vn_fuel(g), 1.0)
        xs = fuel_breakpoints(g, opts.fuel_segments)
        if xs[0] == xs[-1]:
            m.add_row(f"fuel_g{g.id}_s0", {vn_fuel(g): 1.0}, ">=", fuel_cost(g, xs[0]), "fuel")
        else:
            for s, (x0, x1) in enumerate(zip(xs[:-1], xs[1:])):
                slope = (fuel_cost(g, x1) - fuel_cost(g, x0)) / (x1 - x0)
                # fc >= C(x0) + slope (p - x0)
                m.add_row(f"fuel_g{g.id}_s{s}", {vn_fuel(g): 1.0, vn_p_g(g): -slope}, ">=", fuel_cost(g, x0) - slope * x0, "fuel")
        m.add_cost(vn_r_up(g), g.c_g_up)
        m.add_cost(vn_r_dn(g), g.c_g_dn)
        m.add_cost(vn_alpha(g), g.c_g_r * e_abs)
    pbar_mean = sset.p_bar_w.T @ sset.probs if sset.p_bar_w.size else np.zeros(0)
    for k, w in enumerate(case.dibr):
        m.add_cost(f"p_w{w.id}", -w.c_w)
        m.objective_offset += w.c_w * float(pbar_mean[k])
    for e in case.storage:
        m.add_cost(f"p_loss_e{e.id}", e.c_loss)
        m.add_cost(f"r_up_e{e.id}", e.c_e_up)
        m.add_cost(f"r_dn_e{e.id}", e.c_e_dn)


# deterministic rows -------------------------------------------------------------


def build_deterministic(m: SymbolicModel, case: GridCase, thr: Thresholds, mode: BuildMode) -> None:
    G, W, E = case.thermal, case.dibr, case.storage
    bal = {vn_p_g(g): 1.0 for g in G}
    bal.update({f"p_w{w.id}": 1.0 for w in W})
    bal.update({f"p_e{e.id}": 1.0 for e in E})
    m.add_row("balance", bal, "=", case.net_load, "balance")
    for g in G:
        m.add_row(f"cap_up_g{g.id}", {vn_p_g(g): 1.0, vn_r_up(g): 1.0}, "<=", g.p_max, "capacity")
        m.add_row(f"cap_dn_g{g.id}", {vn_p_g(g): 1.0, vn_r_dn(g): -1.0}, ">=", g.p_min, "capacity")
    for e in E:
        pe, pl = f"p_e{e.id}", f"p_loss_e{e.id}"
        m.add_row(f"es_cap_up_e{e.id}", {pe: 1.0, f"r_up_e{e.id}": 1.0}, "<=", e.p_max, "storage")
        m.add_row(f"es_cap_dn_e{e.id}", {pe: 1.0, f"r_dn_e{e.id}": -1.0}, ">=", -e.p_max, "storage")
        # E_low <= E0 - (p_e + p_loss) dt <= E_high
        m.add_row(f"soc_lo_e{e.id}", {pe: thr.dt, pl: thr.dt}, "<=", e.E0 - e.E_low, "storage")
        m.add_row(f"soc_hi_e{e.id}", {pe: thr.dt, pl: thr.dt}, ">=", e.E0 - e.E_high, "storage")
        m.add_row(f"loss_dis_e{e.id}", {pl: 1.0, pe: -(1.0 / e.eta_dis - 1.0)}, ">=", 0.0, "storage")
        m.add_row(f"loss_ch_e{e.id}", {pl: 1.0, pe: -(e.eta_ch - 1.0)}, ">=", 0.0, "storage")
        kH, kD = headroom_coefficients(thr, e.p_max)
        pfr = {f"r_up_e{e.id}": 1.0, f"H_e{e.id}": -kH, f"D_e{e.id}": -kD}
        m.add_row(f"pfr_up_e{e.id}", pfr, ">=", 0.0, "pfr")
        if mode.kind != UP_ICED:
            pfr_dn = {f"r_dn_e{e.id}": 1.0, f"H_e{e.id}": -kH, f"D_e{e.id}": -kD}
            m.add_row(f"pfr_dn_e{e.id}", pfr_dn, ">=", 0.0, "pfr")
    for g in G:
        need = thr.df_ss_max / thr.f0 / g.R_g * g.p_max
        m.add_row(f"pfr_up_g{g.id}", {vn_r_up(g): 1.0}, ">=", need, "pfr")
        if mode.kind != UP_ICED:
            m.add_row(f"pfr_dn_g{g.id}", {vn_r_dn(g): 1.0}, ">=", need, "pfr")
    m.add_row("agc_sum", {vn_alpha(g): 1.0 for g in G if g.is_agc}, "=", 1.0, "agc")
    _static_warnings(m, case, thr)


def _static_warnings(m: SymbolicModel, case: GridCase, thr: Thresholds) -> None:
    load = case.net_load
    pmin = sum(g.p_min for g in case.thermal) - sum(e.p_max for e in case.storage)
    pmax = sum(g.p_max for g in case.thermal) + sum(w.forecast for w in case.dibr) + sum(e.p_max for e in case.storage)
    if pmin > load:
        m.warnings.append(f"sum of thermal minimum outputs ({pmin:.3f} MW) exceeds net load ({load:.3f} MW)")
    if pmax < load:
        m.warnings.append(f"total available capacity ({pmax:.3f} MW) is below net load ({load:.3f} MW)")


# SFR quantile rows ---------------------------------------------------------------


def build_sfr_quantile(m: SymbolicModel, case: GridCase, sset: ScenarioSet, thr: Thresholds, mode: BuildMode) -> dict:
    """Total and per-unit secondary reserve rows from the disturbance quantiles."""
    if mode.kind == UP_ICED:
        q_up = empirical_quantile(sset.dp_L, sset.probs, thr.delta_R_eff, "upper")
        q_dn = None
    else:
        q = disturbance_quantiles(sset, thr)
        q_up, q_dn = q.dp_up_qR, q.dp_dn_qR
    G = case.thermal
    m.add_row("sfr_up_total", {vn_r_up(g): 1.0 for g in G}, ">=", q_up, "sfr")
    if q_dn is not None:
        m.add_row("sfr_dn_total", {vn_r_dn(g): 1.0 for g in G}, ">=", -q_dn, "sfr")
    for g in G:
        m.add_row(f"sfr_up_g{g.id}", {vn_r_up(g): 1.0, vn_alpha(g): -q_up}, ">=", 0.0, "sfr")
        if q_dn is not None:
            m.add_row(f"sfr_dn_g{g.id}", {vn_r_dn(g): 1.0, vn_alpha(g): q_dn}, ">=", 0.0, "sfr")
    return {"dp_up_qR": q_up, "dp_dn_qR": q_dn}


# chance blocks -------------------------------------------------------------------


def inverter_terms(case: GridCase, which: str) -> dict:
    """Coefficients of H^I (which="H") or D^I (which="D") in the device variables."""
    p = case.base_mva
    out = {f"{which}_w{w.id}": w.p_cap / p for w in case.dibr}
    out.update({f"{which}_e{e.id}": e.p_max / p for e in case.storage})
    return out


def frequency_disturbance(sset: ScenarioSet, mode: BuildMode) -> np.ndarray:
    """Disturbance magnitude each frequency row must withstand (under-frequency only in Up-ICED)."""
    return np.maximum(sset.dp_L, 0.0) if mode.kind == UP_ICED else np.abs(sset.dp_L)


def nadir_disturbance(sset: ScenarioSet, thr: Thresholds, mode: BuildMode) -> float:
    return empirical_quantile(frequency_disturbance(sset, mode), sset.probs, thr.delta_F, "upper")


def fit_boundary_for(case: GridCase, sset: ScenarioSet, thr: Thresholds, mode: BuildMode, pieces: int) -> Optional[PwlBoundary]:
    dp = nadir_disturbance(sset, thr, mode)
    if dp <= 0:
        return None
    return fit_nadir_boundary(aggregate(case), dp, thr.df_max, pieces, inverter_D_range(case), thr.f0)


def add_nadir_rows(m: SymbolicModel, case: GridCase, boundary: Optional[PwlBoundary]) -> None:
    """H^I >= alpha_m - beta_m D^I for each piece, plus D^I >= D_lo when small damping cannot meet
    the limit with any inertia."""
    if boundary is None:
        return
    hI, dI = inverter_terms(case, "H"), inverter_terms(case, "D")
    for k, (a, b) in enumerate(zip(boundary.alphas, boundary.betas)):
        coefs = dict(hI)
        for v, c in dI.items():
            coefs[v] = coefs.get(v, 0.0) + b * c
        m.add_row(f"nadir_m{k + 1}", coefs, ">=", a, "nadir")
    if boundary.D_lo > 0:
        m.add_row("nadir_dmin", dict(dI), ">=", boundary.D_lo, "nadir")


def build_chance_blocks(
    m: SymbolicModel, case: GridCase, sset: ScenarioSet, thr: Thresholds, ptdf: PtdfMatrix,
    boundary: Optional[PwlBoundary], mode: BuildMode,
) -> list:
    joint = mode.kind != UP_ICED
    blocks = []
    agg = aggregate(case)
    f0, p = thr.f0, case.base_mva
    dist = frequency_disturbance(sset, mode) / p

    if mode.kind == FIX_JCED:
        m.warnings.append("fix-jced: inverter H/D are constants, so the frequency-security rows carry no decisions and are omitted")
    else:
        rate = ChanceRow("rate", inverter_terms(case, "H"), dist * f0 / (2.0 * thr.df_rate_max) - agg.H_G_eq, lower=0.0)
        ss = ChanceRow("ss", inverter_terms(case, "D"), dist * f0 / thr.df_ss_max - thr.D_O - agg.R_G_inv, lower=0.0)
        blocks.append(ChanceBlock("freq", "sys", thr.delta_F, [rate, ss], joint))
        if boundary is None:
            raise BuildError("missing nadir boundary")
        add_nadir_rows(m, case, boundary)

    rows = []
    for k, w in enumerate(case.dibr):
        kH, kD = headroom_coefficients(thr, w.p_cap)
        # p_w + headroom <= available  <=>  -p_w - kH H - kD D >= -pbar_i
        coefs = {f"p_w{w.id}": -1.0, f"H_w{w.id}": -kH, f"D_w{w.id}": -kD}
        rows.append(ChanceRow(f"dibr_w{w.id}", coefs, -sset.p_bar_w[:, k]))
    if rows:
        blocks.append(ChanceBlock("dibr_up", "W", thr.delta_DIBR, rows, joint))

    rows = line_rows(case, sset, ptdf)
    if rows:
        blocks.append(ChanceBlock("line_flow", "L", thr.delta_L, rows, joint))
    m.blocks.extend(blocks)
    return blocks


def line_expression(case: GridCase, ptdf: PtdfMatrix, li: int, reserve: str) -> dict:
    """Flow on line li from dispatchable injections with AGC reserves deployed up (reserve="up":
    +r_up) or down (reserve="dn": -r_dn)."""
    col = {b: ptdf.matrix[li, k] for k, b in enumerate(ptdf.bus_ids)}
    coefs: dict = {}

    def add(v, c):
        if c != 0.0:
            coefs[v] = coefs.get(v, 0.0) + c

    for g in case.thermal:
        add(vn_p_g(g), col[g.bus])
        if g.is_agc:
            add(vn_r_up(g) if reserve == "up" else vn_r_dn(g), col[g.bus] if reserve == "up" else -col[g.bus])
    for w in case.dibr:
        add(f"p_w{w.id}", col[w.bus])
    for e in case.storage:
        add(f"p_e{e.id}", col[e.bus])
    return coefs


def line_offsets(case: GridCase, sset: ScenarioSet, ptdf: PtdfMatrix) -> np.ndarray:
    """e_l(xi_i) = sum_b S_lb (actual load - actual IBR), shape (n, n_lines)."""
    idx = case.bus_index()
    order = [idx[b] for b in ptdf.bus_ids]
    fore = np.array([case.buses[k].d_b - case.buses[k].h_b for k in order])
    actual = fore[None, :] + sset.bus_injection_error()[:, order]
    return actual @ ptdf.matrix.T


def line_rows(case: GridCase, sset: ScenarioSet, ptdf: PtdfMatrix) -> list:
    e = line_offsets(case, sset, ptdf)
    rows = []
    for li, ln in enumerate(case.lines):
        for res in ("up", "dn"):
            expr = line_expression(case, ptdf, li, res)
            neg = {v: -c for v, c in expr.items()}
            key = f"l{ln.id}_{res}"
            rows.append(ChanceRow(f"line_l{ln.id}_{res}_low", expr, -ln.F_l + e[:, li], pair=key))
            rows.append(ChanceRow(f"line_l{ln.id}_{res}_up", neg, -ln.F_l - e[:, li], pair=key))
    return rows


# top level -----------------------------------------------------------------------


def build_model(
    case: GridCase,
    sset: ScenarioSet,
    mode: BuildMode = BuildMode(),
    opts: BuildOptions = BuildOptions(),
    ptdf: Optional[PtdfMatrix] = None,
    boundary: Optional[PwlBoundary] = None,
) -> SymbolicModel:
    thr = case.thresholds
    ptdf = compute_ptdf(case) if ptdf is None else ptdf
    if mode.kind != FIX_JCED and boundary is None:
        boundary = fit_boundary_for(case, sset, thr, mode, opts.nadir_pieces)
    m = SymbolicModel(probs=np.asarray(sset.probs))
    _add_variables(m, case, thr, mode)
    build_objective(m, case, sset, opts)
    build_deterministic(m, case, thr, mode)
    sfr = build_sfr_quantile(m, case, sset, thr, mode)
    if mode.kind != FIX_JCED and boundary is None:
        boundary_note = "no frequency disturbance in the scenarios; nadir rows omitted"
        m.warnings.append(boundary_note)
        boundary = _trivial_boundary()
    build_chance_blocks(m, case, sset, thr, ptdf, boundary, mode)
    m.meta.update(
        {
            "mode": mode.kind,
            "n": sset.n,
            "seed": sset.seed,
            "rng": sset.rng,
            "sfr_quantiles": sfr,
            "nadir_boundary": None if boundary is None or not boundary.alphas else boundary.to_dict(),
            "fuel_segments": opts.fuel_segments,
        }
    )
    m.check()
    return m


def _trivial_boundary() -> PwlBoundary:
    return PwlBoundary((), (), 0.0, 0.0, 0.0, 0.0)


# objective evaluation ---------------------------------------------------------------


def objective_value(
    decision: DispatchDecision, sset: ScenarioSet, case: GridCase, redispatch: str = "exact",
    fuel: str = "pwl", fuel_segments: int = 3,
) -> float:
    """Dispatch cost of a decision. redispatch="c1" uses c_r alpha_g E|dp|; "exact" caps each
    scenario's up/down redispatch at the scheduled reserve. fuel="pwl" uses the model's secant
    interpolant, fuel="quadratic" the true curve."""
    G = case.thermal
    total = 0.0
    for k, g in enumerate(G):
        p = float(decision.p_g[k])
        total += fuel_cost_pwl(g, p, fuel_segments) if fuel == "pwl" else fuel_cost(g, p)
        total += g.c_g_up * decision.r_up[k] + g.c_g_dn * decision.r_dn[k]
        moved = decision.alpha[k] * sset.dp_L
        if redispatch == "c1":
            total += g.c_g_r * float(np.dot(sset.probs, np.abs(moved)))
        elif redispatch == "exact":
            r_plus = np.minimum(np.maximum(moved, 0.0), decision.r_up[k])
            r_minus = np.minimum(np.maximum(-moved, 0.0), decision.r_dn[k])
            total += g.c_g_r * float(np.dot(sset.probs, r_plus + r_minus))
        else:
            raise ValueError(f"unknown redispatch mode {redispatch!r}")
    for k, w in enumerate(case.dibr):
        total += w.c_w * float(np.dot(sset.probs, sset.p_bar_w[:, k] - decision.p_w[k]))
    for k, e in enumerate(case.storage):
        total += e.c_loss * decision.p_loss[k] + e.c_e_up * decision.r_e_up[k] + e.c_e_dn * decision.r_e_dn[k]
    return float(total)


def evaluate_objective_exact(decision: DispatchDecision, sset: ScenarioSet, case: GridCase, fuel_segments: int = 3) -> float:
    return objective_value(decision, sset, case, "exact", "pwl", fuel_segments)


def counting_table(case: GridCase, n: int, M: int, mode: str = PO_JCED, fuel_segments: int = 3) -> dict:
    """Closed-form sizes of the symbolic model (before reformulation)."""
    Ng, Nw, Ne, Nl = len(case.thermal), len(case.dibr), len(case.storage), len(case.lines)
    up = mode == UP_ICED
    variables = 5 * Ng + 3 * Nw + 6 * Ne
    rows = 1 + 2 * Ng + Ng * fuel_segments + 6 * Ne + (1 if up else 2) * Ne + (1 if up else 2) * Ng + 1
    rows += (1 + Ng) if up else 2 * (1 + Ng)
    if mode != FIX_JCED:
        rows += M  # nadir rows (plus one D^I floor row when the boundary starts above zero)
    chance_rows = {"freq": 0 if mode == FIX_JCED else 2, "dibr_up": Nw, "line_flow": 4 * Nl}
    return {"variables": variables, "rows": rows, "chance_rows": chance_rows, "scenario_rows": {k: v * n for k, v in chance_rows.items()}}
