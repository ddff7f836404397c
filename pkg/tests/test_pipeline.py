from __future__ import annotations

import json

import numpy as np
import pytest

from jcedkit.builder import FIX_JCED, UP_ICED, BuildMode, BuildOptions, build_model
from jcedkit.grid import bundled_case_path, load_case
from jcedkit.pipeline import InfeasibleError, infeasible_family, robust_case, solve_dispatch
from jcedkit.scenarios import bundled_uncertainty_path, load_uncertainty, sample_scenarios

from conftest import six_bus_set


@pytest.fixture(scope="module")
def res(case6):
    return solve_dispatch(case6, six_bus_set(200), "msaa")


def test_result_fields(res):
    assert res.status == "optimal"
    assert res.program.n_integer == 0
    assert set(res.timings) == {"build", "reformulate", "solve", "total"}
    # the capped redispatch cost never exceeds its linearized upper estimate
    assert res.exact_objective <= res.c1_objective + 1e-6
    doc = res.summary()
    json.dumps(doc)
    assert doc["families"]["freq"]["mode"] == "robust"


def test_participation_factors_sum_to_one(res):
    assert res.decision.alpha.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(res.decision.alpha >= -1e-12)


def test_robust_case_only_changes_levels(case6):
    rc = robust_case(case6)
    t = rc.thresholds
    assert (t.delta_F, t.delta_DIBR, t.delta_SFR, t.delta_L, t.delta_R_eff) == (0.0,) * 5
    assert rc.buses == case6.buses and rc.thermal == case6.thermal


def test_mode_costs_are_ordered(case6):
    s = six_bus_set(200)
    po = solve_dispatch(case6, s, "msaa").objective
    up = solve_dispatch(case6, s, "msaa", BuildMode(UP_ICED)).objective
    fix = solve_dispatch(case6, s, "msaa", BuildMode(FIX_JCED, 6.0, 20.0)).objective
    # fewer protected families is cheaper; freezing the inverter settings at their caps is dearer
    assert up <= po * (1 + 1e-9)
    assert fix >= po * (1 - 1e-9)


def test_infeasible_names_deterministic_family(case6):
    doc = json.loads(bundled_case_path("six_bus").read_text())
    for b in doc["buses"]:
        b["d_b"] *= 10.0
    heavy = load_case(doc)
    s = sample_scenarios(load_uncertainty(bundled_uncertainty_path("six_bus")), heavy, 20, 3)
    with pytest.raises(InfeasibleError) as info:
        solve_dispatch(heavy, s, "msaa")
    assert info.value.family == "deterministic"
    assert infeasible_family(build_model(heavy, s, BuildMode(), BuildOptions())) == "deterministic"


@pytest.mark.parametrize("method", ["saa", "msaa"])
def test_larger_case_solves(method):
    case = load_case(bundled_case_path("ieee39_like"))
    s = sample_scenarios(load_uncertainty(bundled_uncertainty_path("ieee39_like")), case, 100, 11)
    r = solve_dispatch(case, s, method, time_limit=120)
    assert r.status == "optimal" and np.isfinite(r.objective)
