from __future__ import annotations

import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcedkit.builder import (
    FIX_JCED,
    PO_JCED,
    UP_ICED,
    BuildError,
    BuildMode,
    BuildOptions,
    DispatchDecision,
    build_model,
    counting_table,
    evaluate_objective_exact,
    fuel_breakpoints,
    fuel_cost_pwl,
    objective_value,
)
from jcedkit.grid import case_to_dict, load_case
from jcedkit.reform import MSAA, SAA, reformulate
from jcedkit.scenarios import ScenarioSet, zero_scenarios
from jcedkit.solver import solve

from conftest import six_bus_set, two_bus_doc


def _set_from_dp(case, dp, pbar=None):
    """Scenario set whose whole disturbance sits on the last bus."""
    dp = np.asarray(dp, dtype=float)
    n = dp.size
    zd = np.zeros((n, len(case.buses)))
    zd[:, -1] = dp
    if pbar is None:
        pbar = np.tile([w.forecast for w in case.dibr], (n, 1))
    return ScenarioSet(np.full(n, 1.0 / n), zd, np.zeros_like(zd), np.asarray(pbar, dtype=float).reshape(n, -1),
                       tuple(case.bus_ids), tuple(w.id for w in case.dibr), 0)


def _decision(case, **kw):
    G, W, E = len(case.thermal), len(case.dibr), len(case.storage)
    base = dict(
        p_g=np.zeros(G), r_up=np.zeros(G), r_dn=np.zeros(G), alpha=np.full(G, 1.0 / G), p_w=np.zeros(W),
        H_w=np.zeros(W), D_w=np.zeros(W), p_e=np.zeros(E), r_e_up=np.zeros(E), r_e_dn=np.zeros(E),
        p_loss=np.zeros(E), H_e=np.zeros(E), D_e=np.zeros(E),
    )
    base.update({k: np.asarray(v, dtype=float) for k, v in kw.items()})
    return DispatchDecision(**base)


def _row(model, name):
    return next(r for r in model.rows if r.name == name)


@pytest.fixture(scope="module")
def model6(case6, ptdf6):
    return build_model(case6, six_bus_set(200), BuildMode(), BuildOptions(), ptdf6)


def test_every_decision_variable_once_with_bounds(case6, model6):
    names = list(model6.variables)
    assert len(names) == len(set(names))
    for g in case6.thermal:
        v = model6.variables[f"p_g{g.id}"]
        assert (v.lb, v.ub) == (g.p_min, g.p_max)
        assert model6.variables[f"alpha_g{g.id}"].ub == (1.0 if g.is_agc else 0.0)
        assert model6.variables[f"r_up_g{g.id}"].ub == pytest.approx(g.ramp_up * 60 * case6.thresholds.dt)
    for w in case6.dibr:
        assert (model6.variables[f"H_w{w.id}"].lb, model6.variables[f"H_w{w.id}"].ub) == (0.0, w.H_max)
        assert (model6.variables[f"D_w{w.id}"].lb, model6.variables[f"D_w{w.id}"].ub) == (0.0, w.D_max)
        assert model6.variables[f"p_w{w.id}"].ub == w.forecast
    for e in case6.storage:
        assert (model6.variables[f"p_e{e.id}"].lb, model6.variables[f"p_e{e.id}"].ub) == (-e.p_max, e.p_max)
    expected = {"p_g", "r_up_g", "r_dn_g", "alpha_g", "fc_g", "p_w", "H_w", "D_w", "p_e", "r_up_e", "r_dn_e",
                "p_loss_e", "H_e", "D_e"}
    assert {n.rstrip("0123456789") for n in names} == expected


def test_storage_loss_rows(case6, model6):
    e = case6.storage[0]
    dis, ch = _row(model6, f"loss_dis_e{e.id}"), _row(model6, f"loss_ch_e{e.id}")
    # smallest p_loss satisfying both rows
    def need(pe):
        worst = 0.0
        for row in (dis, ch):
            worst = max(worst, -row.coefs[f"p_e{e.id}"] * pe / row.coefs[f"p_loss_e{e.id}"])
        return worst

    assert need(10.0) == pytest.approx(10.0 * (1 / 0.95 - 1), abs=1e-12)
    assert need(10.0) == pytest.approx(0.526, abs=1e-3)
    assert need(-10.0) == pytest.approx(1.0, abs=1e-12)


def test_steady_state_reserve_row(case6, model6):
    g = case6.thermal[0]
    row = _row(model6, f"pfr_up_g{g.id}")
    assert row.rhs == pytest.approx((0.25 / 60.0) / g.R_g * g.p_max)


def test_sfr_quantile_rows():
    doc = two_bus_doc()
    doc["thermal"].append(dict(doc["thermal"][0], id=2))
    case = load_case(doc)
    dp = np.linspace(-6, 6, 101)
    thr = case.thresholds.with_overrides(delta_SFR=2 * 10 / 101)  # ten scenarios per tail
    case = case.replace_thresholds(thr)
    m = build_model(case, _set_from_dp(case, dp))
    q_up, q_dn = m.meta["sfr_quantiles"]["dp_up_qR"], m.meta["sfr_quantiles"]["dp_dn_qR"]
    assert q_up == pytest.approx(dp[-11]) and q_dn == pytest.approx(dp[10])
    assert q_up == pytest.approx(-q_dn)  # symmetric disturbances
    assert _row(m, "sfr_up_total").rhs == pytest.approx(q_up)
    assert _row(m, "sfr_dn_total").rhs == pytest.approx(-q_dn)
    assert _row(m, "sfr_up_g2").coefs == {"r_up_g2": 1.0, "alpha_g2": -q_up}
    wide = build_model(case.replace_thresholds(thr.with_overrides(delta_SFR=1.0)), _set_from_dp(case, dp))
    assert {r.name for r in wide.rows_tagged("sfr")} == {r.name for r in m.rows_tagged("sfr")}


def test_redispatch_coefficient_hand_value():
    case = load_case(two_bus_doc())
    m = build_model(case, _set_from_dp(case, [10.0, -10.0]))
    g = case.thermal[0]
    assert g.c_g_r == pytest.approx(1.2 * g.cost_coeffs[1])
    assert m.objective["alpha_g1"] == pytest.approx(10.0 * 1.2 * g.cost_coeffs[1])


def test_zero_disturbance_objective_is_deterministic_cost():
    case = load_case(two_bus_doc())
    sset = _set_from_dp(case, [0.0, 0.0], pbar=[[40.0], [40.0]])
    dec = _decision(case, p_g=[30.0], r_up=[5.0], r_dn=[5.0], alpha=[1.0], p_w=[30.0])
    g, w = case.thermal[0], case.dibr[0]
    want = 20.0 * 30.0 + g.c_g_up * 5 + g.c_g_dn * 5 + w.c_w * (40.0 - 30.0)
    assert objective_value(dec, sset, case, "c1") == pytest.approx(want)
    assert evaluate_objective_exact(dec, sset, case) == pytest.approx(want)


def test_exact_redispatch_caps_at_reserve():
    case = load_case(two_bus_doc())
    g = case.thermal[0]
    dec = _decision(case, p_g=[30.0], r_up=[5.0], r_dn=[5.0], alpha=[1.0], p_w=[30.0])
    inside = _set_from_dp(case, [4.0, -3.0])
    assert evaluate_objective_exact(dec, inside, case) == pytest.approx(objective_value(dec, inside, case, "c1"))
    over = _set_from_dp(case, [10.0])  # alpha * dp = 2 r_up
    gap = objective_value(dec, over, case, "c1") - evaluate_objective_exact(dec, over, case)
    assert gap == pytest.approx(g.c_g_r * 10.0 - g.c_g_r * 5.0)


@settings(max_examples=60, deadline=None)
@given(
    dp=st.lists(st.floats(-80, 80), min_size=1, max_size=8),
    r_up=st.floats(0, 50),
    r_dn=st.floats(0, 50),
)
def test_exact_never_exceeds_c1(dp, r_up, r_dn):
    case = load_case(two_bus_doc())
    dec = _decision(case, p_g=[30.0], r_up=[r_up], r_dn=[r_dn], alpha=[1.0], p_w=[30.0])
    s = _set_from_dp(case, dp)
    assert evaluate_objective_exact(dec, s, case) <= objective_value(dec, s, case, "c1") + 1e-9


def test_robust_frequency_block_when_delta_F_zero(model6):
    freq = model6.block("freq")
    assert freq.robust and freq.delta == 0.0
    assert {r.name for r in freq.rows} == {"rate", "ss"}


def test_nadir_rows_per_piece(case6, ptdf6):
    m = build_model(case6, six_bus_set(200), BuildMode(), BuildOptions(nadir_pieces=4), ptdf6)
    rows = [r for r in m.rows_tagged("nadir") if r.name.startswith("nadir_m")]
    assert len(rows) == 4
    b = m.meta["nadir_boundary"]
    assert len(b["pieces"]) == 4
    # H_W + H_E + beta (D_W + D_E) >= alpha
    a, beta = b["pieces"][1]
    assert rows[1].rhs == pytest.approx(a)
    w = case6.dibr[0]
    assert rows[1].coefs[f"D_w{w.id}"] == pytest.approx(beta * w.p_cap / case6.base_mva)


def test_one_line_two_scenarios_counting():
    case = load_case(two_bus_doc(delta_L=0.5))  # one of the two scenarios may be dropped
    m = build_model(case, _set_from_dp(case, [5.0, -5.0]))
    blk = m.block("line_flow")
    assert len(blk.rows) == 4
    assert sum(len(r.b) for r in blk.rows) == 4 * 1 * 2
    p = reformulate(m, SAA)
    assert sorted(n for n in p.names if n.startswith("z_L")) == ["z_L_0", "z_L_1"]


@pytest.mark.parametrize("mode", [BuildMode(PO_JCED), BuildMode(FIX_JCED, 1.0, 2.0), BuildMode(UP_ICED)])
def test_counting_table(case6, ptdf6, mode):
    n = 50
    m = build_model(case6, six_bus_set(n), mode, BuildOptions(), ptdf6)
    table = counting_table(case6, n, 4, mode.kind)
    assert len(m.variables) == table["variables"]
    extra = 1 if any(r.name == "nadir_dmin" for r in m.rows) else 0
    assert len(m.rows) == table["rows"] + extra
    for blk in m.blocks:
        assert len(blk.rows) == table["chance_rows"][blk.kind]
        assert sum(len(r.b) for r in blk.rows) == table["scenario_rows"][blk.kind]


def test_up_iced_structure(case6, ptdf6):
    m = build_model(case6, six_bus_set(50), BuildMode(UP_ICED), BuildOptions(), ptdf6)
    assert all(not b.joint for b in m.blocks)
    names = {r.name for r in m.rows}
    assert not any(n.startswith("pfr_dn") for n in names)
    assert "sfr_dn_total" not in names


def test_fix_mode_validation(case6):
    with pytest.raises(BuildError):
        BuildMode(FIX_JCED, 1.0, None)
    with pytest.raises(BuildError):
        BuildMode("half-jced")
    with pytest.raises(BuildError, match="outside"):
        build_model(case6, six_bus_set(50), BuildMode(FIX_JCED, 99.0, 1.0))


def test_fix_jced_not_cheaper(case6, ptdf6):
    # Fix-JCED drops the frequency rows, so the subset relation needs fixed values that satisfy them
    s = six_bus_set(100)
    po = solve(reformulate(build_model(case6, s, BuildMode(), BuildOptions(), ptdf6), MSAA))
    fix = solve(reformulate(build_model(case6, s, BuildMode(FIX_JCED, 6.0, 20.0), BuildOptions(), ptdf6), MSAA))
    assert fix.status == po.status == "optimal"
    assert fix.objective >= po.objective - 1e-6 * abs(po.objective)


def _single_bus_two_units():
    doc = two_bus_doc()
    doc["buses"] = [{"id": 1, "d_b": 150.0, "h_b": 0.0}]
    doc["lines"], doc["dibr"] = [], []
    doc["thermal"][0].update(cost_coeffs=[0.0, 20.0, 0.05], p_max=120.0, p_min=10.0)
    doc["thermal"].append(dict(doc["thermal"][0], id=2, cost_coeffs=[0.0, 18.0, 0.09], p_max=100.0, p_min=10.0))
    return load_case(doc)


def test_deterministic_reduction_matches_grid_search():
    case = _single_bus_two_units()
    res = solve(reformulate(build_model(case, zero_scenarios(case, 1)), SAA))
    assert res.status == "optimal"
    thr = case.thresholds
    g1, g2 = case.thermal
    best = math.inf
    kinks = [x for g in (g1, g2) for x in fuel_breakpoints(g, 3)]
    cands = np.concatenate([np.arange(0.0, 150.0, 0.5), kinks, 150.0 - np.array(kinks)])
    for g in (g1, g2):
        need = thr.df_ss_max / thr.f0 / g.R_g * g.p_max
        ends = [g.p_min + need, g.p_max - need]
        cands = np.concatenate([cands, ends, 150.0 - np.array(ends)])
    for p1 in cands:
        p2 = 150.0 - p1
        cost = 0.0
        for g, p in ((g1, p1), (g2, p2)):
            need = thr.df_ss_max / thr.f0 / g.R_g * g.p_max
            if not (g.p_min + need - 1e-9 <= p <= g.p_max - need + 1e-9):
                cost = math.inf
                break
            cost += fuel_cost_pwl(g, p, 3) + (g.c_g_up + g.c_g_dn) * need
        best = min(best, cost)
    assert res.objective == pytest.approx(best, rel=1e-9)


def test_cost_scaling_scales_optimum():
    case = _single_bus_two_units()
    raw = case_to_dict(case)
    scaled = copy.deepcopy(raw)
    for g in scaled["thermal"]:
        g["cost_coeffs"] = [2 * c for c in g["cost_coeffs"]]
        for k in ("c_g_up", "c_g_dn", "c_g_r"):
            g[k] *= 2
    a = solve(reformulate(build_model(case, zero_scenarios(case, 1)), SAA))
    b = solve(reformulate(build_model(load_case(scaled), zero_scenarios(case, 1)), SAA))
    assert b.objective == pytest.approx(2 * a.objective, rel=1e-9)
    np.testing.assert_allclose([b["p_g1"], b["p_g2"]], [a["p_g1"], a["p_g2"]], atol=1e-6)


def test_model_is_deterministic_and_serializable(case6, ptdf6):
    s = six_bus_set(100)
    a = build_model(case6, s, BuildMode(), BuildOptions(), ptdf6).to_json()
    b = build_model(case6, s, BuildMode(), BuildOptions(), ptdf6).to_json()
    assert a == b
    assert '"z_' not in a  # indicators only appear after reformulation


def test_decision_round_trip(case6):
    dec = _decision(case6, p_g=[100.0, 80.0, 50.0], H_w=[1.0, 2.0])
    back = DispatchDecision.from_dict(dec.to_dict(case6), case6)
    for k in DispatchDecision.FIELDS:
        np.testing.assert_array_equal(getattr(back, k), getattr(dec, k))
    with pytest.raises(BuildError):
        DispatchDecision.from_dict({"p_g": {}}, case6)
