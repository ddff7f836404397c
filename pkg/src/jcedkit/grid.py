"""Static network and device data, case-file I/O and DC power-transfer factors."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import jsonschema
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class CaseError(ValueError):
    """Malformed or inconsistent case data."""


@dataclass(frozen=True)
class Bus:
    id: int
    d_b: float = 0.0  # forecast load, MW
    h_b: float = 0.0  # forecast uncontrollable IBR output, MW


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float  # p.u.
    F_l: float  # MW


@dataclass(frozen=True)
class ThermalUnit:
    id: int
    bus: int
    cost_coeffs: tuple  # (a, b, c): C(p) = a + b p + c p^2, $ per dispatch period
    c_g_up: float
    c_g_dn: float
    c_g_r: float
    p_max: float
    p_min: float
    ramp_up: float  # MW/min
    ramp_dn: float  # MW/min
    R_g: float  # droop, p.u. on unit base
    H_g: float  # s
    F_g_H: float
    T_g_R: float  # s
    is_agc: bool = True

    @property
    def marginal_cost(self) -> float:
        return float(self.cost_coeffs[1])


@dataclass(frozen=True)
class Dibr:
    id: int
    bus: int
    p_cap: float
    c_w: float
    H_max: float
    D_max: float
    p_forecast: Optional[float] = None  # forecast maximum output; defaults to p_cap

    @property
    def forecast(self) -> float:
        return self.p_cap if self.p_forecast is None else self.p_forecast


@dataclass(frozen=True)
class Storage:
    id: int
    bus: int
    p_max: float
    E_low: float
    E_high: float
    E0: float
    eta_ch: float = 0.90
    eta_dis: float = 0.95
    c_loss: float = 0.0
    c_e_up: float = 0.0
    c_e_dn: float = 0.0
    H_max: float = 0.0
    D_max: float = 0.0


@dataclass(frozen=True)
class Thresholds:
    f0: float = 60.0
    df_rate_max: float = 0.5  # Hz/s
    df_max: float = 0.5  # Hz
    df_ss_max: float = 0.25  # Hz
    D_O: float = 1.0  # p.u. on system base
    dt: float = 0.25  # h
    delta_F: float = 0.0
    delta_DIBR: float = 0.05
    delta_SFR: float = 0.05
    delta_L: float = 0.05
    delta_R: Optional[float] = None  # None means "same as delta_SFR"

    @property
    def delta_R_eff(self) -> float:
        return self.delta_SFR if self.delta_R is None else self.delta_R

    def with_overrides(self, **kw) -> "Thresholds":
        data = asdict(self)
        data.update({k: v for k, v in kw.items() if v is not None})
        return Thresholds(**data)


@dataclass(frozen=True)
class GridCase:
    base_mva: float
    buses: tuple
    lines: tuple
    thermal: tuple
    dibr: tuple = ()
    storage: tuple = ()
    thresholds: Thresholds = field(default_factory=Thresholds)
    slack_bus: Optional[int] = None
    name: str = "case"

    @property
    def f0(self) -> float:
        return self.thresholds.f0

    @property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def slack(self) -> int:
        """Slack bus id; defaults to the bus of the largest thermal unit."""
        if self.slack_bus is not None:
            return self.slack_bus
        big = max(self.thermal, key=lambda g: (g.p_max, -self.bus_index()[g.bus]))
        return big.bus

    @property
    def net_load(self) -> float:
        return float(sum(b.d_b - b.h_b for b in self.buses))

    @property
    def capacity(self) -> float:
        return float(
            sum(g.p_max for g in self.thermal)
            + sum(w.p_cap for w in self.dibr)
            + sum(e.p_max for e in self.storage)
        )

    def replace_thresholds(self, thr: Thresholds) -> "GridCase":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["thresholds"] = thr
        return GridCase(**data)


# ---------------------------------------------------------------- validation


def _fail(msg: str):
    raise CaseError(msg)


def validate_case(case: GridCase) -> GridCase:
    if case.base_mva <= 0:
        _fail("base_mva must be > 0")
    if not case.buses:
        _fail("case has no buses")
    if not case.thermal:
        _fail("case has no thermal units")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        _fail("duplicate bus id")
    known = set(ids)
    for b in case.buses:
        if b.d_b < 0:
            _fail(f"bus {b.id}: d_b must be >= 0")
        if b.h_b < 0:
            _fail(f"bus {b.id}: h_b must be >= 0")
    for ln in case.lines:
        if ln.F_l <= 0:
            _fail(f"line {ln.id}: F_l must be > 0")
        if ln.reactance <= 0:
            _fail(f"line {ln.id}: reactance must be > 0")
        if ln.from_bus == ln.to_bus:
            _fail(f"line {ln.id}: from and to buses must differ")
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                _fail(f"line {ln.id}: unknown bus {end}")
    for kind, devices in (("thermal", case.thermal), ("dibr", case.dibr), ("storage", case.storage)):
        dev_ids = [d.id for d in devices]
        if len(set(dev_ids)) != len(dev_ids):
            _fail(f"duplicate {kind} id")
        for d in devices:
            if d.bus not in known:
                _fail(f"{kind} {d.id}: unknown bus {d.bus}")
    for g in case.thermal:
        if g.p_min > g.p_max:
            _fail(f"thermal unit {g.id}: p_min > p_max")
        if g.R_g <= 0:
            _fail(f"thermal unit {g.id}: R_g must be > 0")
        if g.H_g <= 0:
            _fail(f"thermal unit {g.id}: H_g must be > 0")
        if not 0 <= g.F_g_H <= 1:
            _fail(f"thermal unit {g.id}: F_g_H must lie in [0, 1]")
        if g.T_g_R <= 0:
            _fail(f"thermal unit {g.id}: T_g_R must be > 0")
        if g.ramp_up < 0 or g.ramp_dn < 0:
            _fail(f"thermal unit {g.id}: ramp rates must be >= 0")
        if len(g.cost_coeffs) != 3:
            _fail(f"thermal unit {g.id}: cost_coeffs must be [a, b, c]")
        if g.cost_coeffs[2] < 0:
            _fail(f"thermal unit {g.id}: quadratic cost coefficient must be >= 0")
    if not any(g.is_agc for g in case.thermal):
        _fail("at least one thermal unit must be an AGC unit")
    for w in case.dibr:
        if w.p_cap <= 0:
            _fail(f"dibr {w.id}: p_cap must be > 0")
        if w.H_max < 0 or w.D_max < 0:
            _fail(f"dibr {w.id}: H_max and D_max must be >= 0")
        if not 0 <= w.forecast <= w.p_cap:
            _fail(f"dibr {w.id}: p_forecast must lie in [0, p_cap]")
    for e in case.storage:
        if e.p_max <= 0:
            _fail(f"storage {e.id}: p_max must be > 0")
        if not 0 < e.eta_ch <= 1:
            _fail(f"storage {e.id}: eta_ch must lie in (0, 1]")
        if not 0 < e.eta_dis <= 1:
            _fail(f"storage {e.id}: eta_dis must lie in (0, 1]")
        if not e.E_low <= e.E0 <= e.E_high:
            _fail(f"storage {e.id}: E_low <= E0 <= E_high violated")
        if e.H_max < 0 or e.D_max < 0:
            _fail(f"storage {e.id}: H_max and D_max must be >= 0")
    thr = case.thresholds
    if thr.f0 <= 0:
        _fail("f0_hz must be > 0")
    for name in ("df_rate_max", "df_max", "df_ss_max", "dt"):
        if getattr(thr, name) <= 0:
            _fail(f"thresholds.{name} must be > 0")
    if thr.D_O < 0:
        _fail("thresholds.D_O must be >= 0")
    for name in ("delta_F", "delta_DIBR", "delta_SFR", "delta_L", "delta_R"):
        v = getattr(thr, name)
        if v is not None and not 0 <= v <= 1:
            _fail(f"thresholds.{name} must lie in [0, 1]")
    if case.slack_bus is not None and case.slack_bus not in known:
        _fail(f"slack bus {case.slack_bus} does not exist")
    if case.lines:
        _check_connected(case)
    elif len(case.buses) > 1:
        _fail("network is not connected")
    return case


def _check_connected(case: GridCase) -> None:
    idx = case.bus_index()
    nb = len(case.buses)
    rows = [idx[ln.from_bus] for ln in case.lines]
    cols = [idx[ln.to_bus] for ln in case.lines]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nb, nb))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        _fail(f"network is not connected ({ncomp} islands)")


# ---------------------------------------------------------------- case I/O

_SCHEMA = None


def case_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files("jcedkit").joinpath("data/case.schema.json").read_text()
        _SCHEMA = json.loads(text)
    return _SCHEMA


def _thermal_from(doc: dict) -> ThermalUnit:
    a, b, c = (list(doc["cost_coeffs"]) + [0.0, 0.0, 0.0])[:3]
    return ThermalUnit(
        id=doc["id"],
        bus=doc["bus"],
        cost_coeffs=(float(a), float(b), float(c)),
        c_g_up=float(doc.get("c_g_up", 0.4 * b)),
        c_g_dn=float(doc.get("c_g_dn", 0.4 * b)),
        c_g_r=float(doc.get("c_g_r", 1.2 * b)),
        p_max=float(doc["p_max"]),
        p_min=float(doc.get("p_min", 0.0)),
        ramp_up=float(doc["ramp_up"]),
        ramp_dn=float(doc.get("ramp_dn", doc["ramp_up"])),
        R_g=float(doc["R_g"]),
        H_g=float(doc["H_g"]),
        F_g_H=float(doc["F_g_H"]),
        T_g_R=float(doc["T_g_R"]),
        is_agc=bool(doc.get("is_agc", True)),
    )


def case_from_dict(doc: dict) -> GridCase:
    """Build a validated GridCase from an already-parsed case document."""
    try:
        jsonschema.validate(doc, case_schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise CaseError(f"schema violation at {where}: {err.message}") from None
    thr_doc = dict(doc["thresholds"])
    thr = Thresholds(f0=float(doc["f0_hz"]), **thr_doc)
    case = GridCase(
        name=doc.get("name", "case"),
        base_mva=float(doc["base_mva"]),
        buses=tuple(Bus(id=b["id"], d_b=float(b.get("d_b", 0.0)), h_b=float(b.get("h_b", 0.0))) for b in doc["buses"]),
        lines=tuple(
            Line(id=ln["id"], from_bus=ln["from"], to_bus=ln["to"], reactance=float(ln["reactance"]), F_l=float(ln["F_l"]))
            for ln in doc["lines"]
        ),
        thermal=tuple(_thermal_from(g) for g in doc["thermal"]),
        dibr=tuple(Dibr(**{k: v for k, v in w.items()}) for w in doc.get("dibr", [])),
        storage=tuple(Storage(**s) for s in doc.get("storage", [])),
        thresholds=thr,
        slack_bus=doc.get("slack_bus"),
    )
    return validate_case(case)


def load_case(source: Union[str, Path, dict]) -> GridCase:
    """Load a case from a JSON file path, a JSON string, or a parsed dict."""
    if isinstance(source, dict):
        return case_from_dict(source)
    text = None
    path = Path(source) if not (isinstance(source, str) and source.lstrip().startswith("{")) else None
    if path is not None:
        if not path.exists():
            raise CaseError(f"case file not found: {path}")
        text = path.read_text()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise CaseError(f"parse error at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return case_from_dict(doc)


def case_to_dict(case: GridCase) -> dict:
    thr = asdict(case.thresholds)
    f0 = thr.pop("f0")
    if thr["delta_R"] is None:
        thr.pop("delta_R")
    doc: dict[str, Any] = {
        "name": case.name,
        "base_mva": case.base_mva,
        "f0_hz": f0,
        "buses": [asdict(b) for b in case.buses],
        "lines": [
            {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "reactance": ln.reactance, "F_l": ln.F_l}
            for ln in case.lines
        ],
        "thermal": [dict(asdict(g), cost_coeffs=list(g.cost_coeffs)) for g in case.thermal],
        "dibr": [{k: v for k, v in asdict(w).items() if not (k == "p_forecast" and v is None)} for w in case.dibr],
        "storage": [asdict(e) for e in case.storage],
        "thresholds": thr,
    }
    if case.slack_bus is not None:
        doc["slack_bus"] = case.slack_bus
    return doc


def save_case(case: GridCase, path: Union[str, Path, None] = None) -> str:
    text = json.dumps(case_to_dict(case), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package ("six_bus" or "ieee39_like")."""
    ref = resources.files("jcedkit").joinpath(f"data/{name}.json")
    return Path(str(ref))


# ---------------------------------------------------------------- PTDF


@dataclass(frozen=True)
class PtdfMatrix:
    matrix: np.ndarray  # (n_lines, n_buses); MW on line per MW injected at bus, withdrawn at slack
    line_ids: tuple
    bus_ids: tuple
    slack: int

    def flows(self, injections: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(injections, dtype=float)

    def column(self, bus_id) -> np.ndarray:
        return self.matrix[:, self.bus_ids.index(bus_id)]


def compute_ptdf(case: GridCase) -> PtdfMatrix:
    idx = case.bus_index()
    nb, nl = len(case.buses), len(case.lines)
    slack = idx[case.slack]
    Bf = np.zeros((nl, nb))
    for k, ln in enumerate(case.lines):
        b = 1.0 / ln.reactance
        Bf[k, idx[ln.from_bus]] += b
        Bf[k, idx[ln.to_bus]] -= b
    Cf = np.zeros((nl, nb))
    for k, ln in enumerate(case.lines):
        Cf[k, idx[ln.from_bus]] = 1.0
        Cf[k, idx[ln.to_bus]] = -1.0
    Bbus = Cf.T @ Bf
    keep = [k for k in range(nb) if k != slack]
    ptdf = np.zeros((nl, nb))
    if keep:
        Bred = Bbus[np.ix_(keep, keep)]
        if np.linalg.matrix_rank(Bred) < len(keep):
            raise CaseError("singular susceptance matrix (network disconnected)")
        ptdf[:, keep] = np.linalg.solve(Bred.T, Bf[:, keep].T).T
    ptdf.setflags(write=False)
    return PtdfMatrix(ptdf, tuple(ln.id for ln in case.lines), tuple(case.bus_ids), case.slack)
