from __future__ import annotations

import functools
import os

import pytest

from jcedkit.grid import bundled_case_path, compute_ptdf, load_case
from jcedkit.scenarios import bundled_uncertainty_path, load_uncertainty, sample_scenarios

# the suite runs on the default backend unless a test picks one explicitly
os.environ.pop("JCEDKIT_BACKEND", None)


def two_bus_doc(**thr) -> dict:
    """Smallest useful case: one thermal unit, one DIBR and one line."""
    return {
        "name": "two_bus",
        "base_mva": 100.0,
        "f0_hz": 60.0,
        "slack_bus": 1,
        "buses": [{"id": 1, "d_b": 0.0, "h_b": 0.0}, {"id": 2, "d_b": 60.0, "h_b": 0.0}],
        "lines": [{"id": 1, "from": 1, "to": 2, "reactance": 0.1, "F_l": 100.0}],
        "thermal": [{
            "id": 1, "bus": 1, "cost_coeffs": [0.0, 20.0, 0.0], "p_max": 100.0, "p_min": 0.0,
            "ramp_up": 5.0, "ramp_dn": 5.0, "R_g": 0.05, "H_g": 5.0, "F_g_H": 0.3, "T_g_R": 7.0, "is_agc": True,
        }],
        "dibr": [{"id": 1, "bus": 2, "p_cap": 40.0, "c_w": 10.0, "H_max": 5.0, "D_max": 10.0}],
        "storage": [],
        "thresholds": dict({"delta_F": 0.0, "delta_DIBR": 0.05, "delta_SFR": 0.05, "delta_L": 0.05}, **thr),
    }


@functools.lru_cache(maxsize=None)
def six_bus():
    return load_case(bundled_case_path("six_bus"))


@functools.lru_cache(maxsize=None)
def six_bus_uncertainty():
    return load_uncertainty(bundled_uncertainty_path("six_bus"))


@functools.lru_cache(maxsize=None)
def six_bus_set(n: int, seed: int = 7):
    return sample_scenarios(six_bus_uncertainty(), six_bus(), n, seed)


@pytest.fixture(scope="session")
def case6():
    return six_bus()


@pytest.fixture(scope="session")
def ptdf6(case6):
    return compute_ptdf(case6)


@pytest.fixture(scope="session")
def unc6():
    return six_bus_uncertainty()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
