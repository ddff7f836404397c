#!/usr/bin/env python3
"""Generate the bundled 39-bus-shaped case and its uncertainty file.

Topology, branch reactances and bus loads follow the widely used New England 39-bus system.
Device data is synthetic and documented here:

* the ten thermal units keep their usual buses and ratings; minimum output is 30% of rating, fuel
  curves and inertia vary smoothly with unit index, every unit except the one at bus 39 takes AGC;
* three dispatchable renewables (buses 21, 23, 26) and fixed uncontrollable IBR output at buses 3,
  16 and 24; three storage units (buses 4, 15, 28);
* line limits are 1.35 times the largest DC flow of a capacity-proportional dispatch, with and
  without the AGC units' minimum reserves deployed, plus 50 MW (at least 300 MW); lines 16-19 and
  2-3 use 1.1 so the flow rows matter.

Usage: python3 scripts/make_ieee39_like.py [output_dir]
"""
import json
import sys
from pathlib import Path

import numpy as np

from jcedkit.grid import case_from_dict, compute_ptdf

BRANCHES = [
    (1, 2, 0.0411), (1, 39, 0.0250), (2, 3, 0.0151), (2, 25, 0.0086), (2, 30, 0.0181), (3, 4, 0.0213),
    (3, 18, 0.0133), (4, 5, 0.0128), (4, 14, 0.0129), (5, 6, 0.0026), (5, 8, 0.0112), (6, 7, 0.0092),
    (6, 11, 0.0082), (6, 31, 0.0250), (7, 8, 0.0046), (8, 9, 0.0363), (9, 39, 0.0250), (10, 11, 0.0043),
    (10, 13, 0.0043), (10, 32, 0.0200), (12, 11, 0.0435), (12, 13, 0.0435), (13, 14, 0.0101), (14, 15, 0.0217),
    (15, 16, 0.0094), (16, 17, 0.0089), (16, 19, 0.0195), (16, 21, 0.0135), (16, 24, 0.0059), (17, 18, 0.0082),
    (17, 27, 0.0173), (19, 20, 0.0138), (19, 33, 0.0142), (20, 34, 0.0180), (21, 22, 0.0140), (22, 23, 0.0096),
    (22, 35, 0.0143), (23, 24, 0.0350), (23, 36, 0.0272), (25, 26, 0.0323), (25, 37, 0.0232), (26, 27, 0.0147),
    (26, 28, 0.0474), (26, 29, 0.0625), (28, 29, 0.0151), (29, 38, 0.0156),
]
LOADS = {
    3: 322.0, 4: 500.0, 7: 233.8, 8: 522.0, 12: 7.5, 15: 320.0, 16: 329.0, 18: 158.0, 20: 628.0, 21: 274.0,
    23: 247.5, 24: 308.6, 25: 224.0, 26: 139.0, 27: 281.0, 28: 206.0, 29: 283.5, 31: 9.2, 39: 1104.0,
}
GEN_BUS_PMAX = [(30, 1040.0), (31, 646.0), (32, 725.0), (33, 652.0), (34, 508.0), (35, 687.0), (36, 580.0),
                (37, 564.0), (38, 865.0), (39, 1100.0)]
IBR_FIXED = {3: 100.0, 16: 150.0, 24: 100.0}
DIBRS = [(21, 600.0, 450.0), (23, 500.0, 350.0), (26, 400.0, 300.0)]
STORAGE = [(4, 100.0), (15, 100.0), (28, 80.0)]
TIGHT = {(16, 19): 1.1, (2, 3): 1.1}


def build():
    buses = [{"id": b, "d_b": LOADS.get(b, 0.0), "h_b": IBR_FIXED.get(b, 0.0)} for b in range(1, 40)]
    thermal = []
    for k, (bus, pmax) in enumerate(GEN_BUS_PMAX):
        thermal.append({
            "id": k + 1, "bus": bus, "cost_coeffs": [200.0 + 10.0 * k, 16.0 + 1.8 * k, 0.004 + 0.0006 * k],
            "p_max": pmax, "p_min": round(0.3 * pmax, 1), "ramp_up": round(0.012 * pmax, 2),
            "ramp_dn": round(0.012 * pmax, 2), "R_g": 0.05, "H_g": round(6.0 - 0.3 * k, 2),
            "F_g_H": 0.3, "T_g_R": 7.0 + 0.2 * k, "is_agc": bus != 39,
        })
    dibr = [{"id": k + 1, "bus": b, "p_cap": cap, "p_forecast": fc, "c_w": 12.0, "H_max": 6.0, "D_max": 20.0}
            for k, (b, cap, fc) in enumerate(DIBRS)]
    storage = [{"id": k + 1, "bus": b, "p_max": p, "E_low": 0.1 * 4 * p, "E_high": 4 * p, "E0": 2 * p,
                "eta_ch": 0.90, "eta_dis": 0.95, "c_loss": 10.0, "c_e_up": 4.0, "c_e_dn": 4.0,
                "H_max": 8.0, "D_max": 20.0} for k, (b, p) in enumerate(STORAGE)]
    base = sum(p for _, p in GEN_BUS_PMAX) + sum(c for _, c, _ in DIBRS) + sum(p for _, p in STORAGE)
    doc = {
        "name": "ieee39_like", "base_mva": base, "f0_hz": 60.0, "slack_bus": 31,
        "buses": buses,
        "lines": [{"id": k + 1, "from": f, "to": t, "reactance": x, "F_l": 1.0} for k, (f, t, x) in enumerate(BRANCHES)],
        "thermal": thermal, "dibr": dibr, "storage": storage,
        "thresholds": {"df_rate_max": 0.5, "df_max": 0.5, "df_ss_max": 0.25, "D_O": 1.0, "dt": 0.25,
                       "delta_F": 0.0, "delta_DIBR": 0.05, "delta_SFR": 0.05, "delta_L": 0.05},
    }
    # line limits from a capacity-proportional base case
    case = case_from_dict(doc)
    ptdf = compute_ptdf(case)
    net = {b["id"]: b["d_b"] - b["h_b"] for b in buses}
    inj = {b: 0.0 for b in net}
    for d in dibr:
        inj[d["bus"]] += d["p_forecast"]
    residual = sum(net.values()) - sum(d["p_forecast"] for d in dibr)
    total = sum(p for _, p in GEN_BUS_PMAX)
    for bus, pmax in GEN_BUS_PMAX:
        inj[bus] += residual * pmax / total
    vec = np.array([inj[b] - net[b] for b in ptdf.bus_ids])
    # the flow rows deploy every AGC unit's primary-reserve floor at once, so size for that too
    reserve = {b: 0.0 for b in net}
    for g in thermal:
        if g["is_agc"]:
            reserve[g["bus"]] += 0.25 / 60.0 / g["R_g"] * g["p_max"]
    rvec = np.array([reserve[b] for b in ptdf.bus_ids])
    flows = np.max(np.abs([ptdf.matrix @ vec, ptdf.matrix @ (vec + rvec), ptdf.matrix @ (vec - rvec)]), axis=0)
    for k, (f, t, _) in enumerate(BRANCHES):
        factor = TIGHT.get((f, t), 1.35)
        doc["lines"][k]["F_l"] = float(max(300.0, round((factor * flows[k] + 50.0) / 10.0) * 10.0))
    return doc


def uncertainty(doc):
    load = {str(b["id"]): {"beta": [2.0, 2.0], "support": [-0.05 * b["d_b"], 0.05 * b["d_b"]]}
            for b in doc["buses"] if b["d_b"] > 0}
    ibr = {str(b["id"]): {"beta": [2.0, 2.0], "support": [-0.2 * b["h_b"], 0.2 * b["h_b"]]}
           for b in doc["buses"] if b["h_b"] > 0}
    dibr = {}
    for d in doc["dibr"]:
        # beta(a, b) on [0, cap] with mean at forecast and a concentration of 15
        m = d["p_forecast"] / d["p_cap"]
        dibr[str(d["id"])] = {"beta": [round(15 * m, 6), round(15 * (1 - m), 6)], "support": [0.0, d["p_cap"]]}
    return {"load": load, "ibr": ibr, "dibr": dibr}


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "jcedkit" / "data"
    doc = build()
    (out / "ieee39_like.json").write_text(json.dumps(doc, indent=1) + "\n")
    (out / "ieee39_like.uncertainty.json").write_text(json.dumps(uncertainty(doc), indent=1) + "\n")
    print(f"wrote {out / 'ieee39_like.json'} and its uncertainty file")


if __name__ == "__main__":
    main(sys.argv)
