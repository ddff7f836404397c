"""Beta-distributed forecast errors, Monte Carlo scenario sets and empirical quantiles."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .grid import GridCase

RNG_NAME = "numpy.PCG64/SeedSequence([seed, block]) block=256"
BLOCK = 256


class UncertaintyError(ValueError):
    pass


@dataclass(frozen=True)
class BetaSpec:
    """Beta(a, b) mapped affinely onto [lo, hi] MW. lo == hi is a point mass."""

    a: float = 2.0
    b: float = 2.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise UncertaintyError(f"beta shape parameters must be positive, got a={self.a}, b={self.b}")
        if not self.lo <= self.hi:
            raise UncertaintyError(f"support must satisfy lo <= hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, value: float) -> "BetaSpec":
        return cls(1.0, 1.0, float(value), float(value))

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def mean(self) -> float:
        return self.lo + (self.hi - self.lo) * self.a / (self.a + self.b)

    @property
    def var(self) -> float:
        s = self.a + self.b
        return (self.hi - self.lo) ** 2 * self.a * self.b / (s * s * (s + 1.0))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.degenerate:
            return np.full(size, self.lo)
        return self.lo + (self.hi - self.lo) * rng.beta(self.a, self.b, size)

    def to_dict(self) -> dict:
        if self.degenerate:
            return {"point": self.lo}
        return {"beta": [self.a, self.b], "support": [self.lo, self.hi]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "BetaSpec":
        if "point" in doc:
            return cls.point(doc["point"])
        try:
            a, b = doc["beta"]
            lo, hi = doc["support"]
        except (KeyError, TypeError, ValueError):
            raise UncertaintyError(f"expected {{'beta': [a, b], 'support': [lo, hi]}} or {{'point': v}}, got {doc!r}")
        if not lo < hi:
            raise UncertaintyError(f"support must satisfy lo < hi, got [{lo}, {hi}]")
        return cls(float(a), float(b), float(lo), float(hi))


def fit_beta_moments(samples: Sequence[float], lo: Optional[float] = None, hi: Optional[float] = None) -> BetaSpec:
    """Method-of-moments beta fit. Support defaults to the sample range widened by 5% on each side."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise UncertaintyError("need at least two samples to fit a beta distribution")
    span = x.max() - x.min()
    if span == 0:
        return BetaSpec.point(float(x[0]))
    lo = x.min() - 0.05 * span if lo is None else lo
    hi = x.max() + 0.05 * span if hi is None else hi
    m = (x.mean() - lo) / (hi - lo)
    v = x.var(ddof=1) / (hi - lo) ** 2
    common = m * (1.0 - m) / v - 1.0
    if not (0 < m < 1 and common > 0):
        raise UncertaintyError("sample moments are not attainable by a beta on the given support")
    return BetaSpec(float(m * common), float((1.0 - m) * common), float(lo), float(hi))


@dataclass(frozen=True)
class UncertaintyModel:
    """Independent per-bus load / IBR errors and per-DIBR availability. Missing entries are point masses
    (zero error for buses, the forecast for DIBRs)."""

    load: Mapping[int, BetaSpec] = field(default_factory=dict)
    ibr: Mapping[int, BetaSpec] = field(default_factory=dict)
    dibr: Mapping[int, BetaSpec] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "UncertaintyModel":
        unknown = set(doc) - {"load", "ibr", "dibr"}
        if unknown:
            raise UncertaintyError(f"unknown uncertainty keys: {sorted(unknown)}")
        parts = {}
        for key in ("load", "ibr", "dibr"):
            parts[key] = {int(k): BetaSpec.from_dict(v) for k, v in doc.get(key, {}).items()}
        return cls(**parts)

    def to_dict(self) -> dict:
        return {key: {str(k): s.to_dict() for k, s in sorted(getattr(self, key).items())} for key in ("load", "ibr", "dibr")}

    def check(self, case: GridCase) -> None:
        buses = set(case.bus_ids)
        for key in ("load", "ibr"):
            bad = set(getattr(self, key)) - buses
            if bad:
                raise UncertaintyError(f"{key} errors reference unknown buses {sorted(bad)}")
        caps = {w.id: w.p_cap for w in case.dibr}
        for wid, spec in self.dibr.items():
            if wid not in caps:
                raise UncertaintyError(f"availability spec references unknown DIBR {wid}")
            if spec.lo < 0 or spec.hi > caps[wid]:
                raise UncertaintyError(f"availability support of DIBR {wid} must lie in [0, {caps[wid]}]")

    def column_specs(self, case: GridCase) -> tuple[list, list, list]:
        zero = BetaSpec.point(0.0)
        d = [self.load.get(b, zero) for b in case.bus_ids]
        h = [self.ibr.get(b, zero) for b in case.bus_ids]
        w = [self.dibr.get(u.id, BetaSpec.point(u.forecast)) for u in case.dibr]
        return d, h, w


def load_uncertainty(source: Union[str, Path, Mapping]) -> UncertaintyModel:
    if isinstance(source, Mapping):
        return UncertaintyModel.from_dict(source)
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise UncertaintyError(f"uncertainty file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise UncertaintyError(f"parse error at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return UncertaintyModel.from_dict(doc)


@dataclass(frozen=True)
class Scenario:
    i: int
    p: float
    zeta_d: np.ndarray
    zeta_h: np.ndarray
    dp_L: float
    p_bar_w: np.ndarray


def net_disturbance(zeta_d: np.ndarray, zeta_h: np.ndarray) -> np.ndarray:
    """Aggregate disturbance per scenario, sum over buses of (load error - IBR error)."""
    return np.sum(zeta_d - zeta_h, axis=1)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    probs: np.ndarray  # (n,)
    zeta_d: np.ndarray  # (n, n_bus) MW
    zeta_h: np.ndarray  # (n, n_bus) MW
    p_bar_w: np.ndarray  # (n, n_dibr) MW
    bus_ids: tuple
    dibr_ids: tuple
    seed: Optional[int] = None
    rng: str = RNG_NAME
    dp_L: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.probs)
        if n == 0:
            raise UncertaintyError("scenario set is empty")
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-12:
            raise UncertaintyError(f"scenario probabilities sum to {np.sum(self.probs)!r}, not 1")
        for name in ("probs", "zeta_d", "zeta_h", "p_bar_w"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dp = net_disturbance(self.zeta_d, self.zeta_h)
        dp.setflags(write=False)
        object.__setattr__(self, "dp_L", dp)

    @property
    def n(self) -> int:
        return len(self.probs)

    def __len__(self) -> int:
        return self.n

    def scenario(self, i: int) -> Scenario:
        return Scenario(i, float(self.probs[i]), self.zeta_d[i], self.zeta_h[i], float(self.dp_L[i]), self.p_bar_w[i])

    def __iter__(self) -> Iterator[Scenario]:
        return (self.scenario(i) for i in range(self.n))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return (
            self.bus_ids == other.bus_ids
            and self.dibr_ids == other.dibr_ids
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("probs", "zeta_d", "zeta_h", "p_bar_w"))
        )

    def bus_injection_error(self) -> np.ndarray:
        """Per-scenario, per-bus net load error zeta_d - zeta_h (n, n_bus)."""
        return self.zeta_d - self.zeta_h

    def subset(self, idx: Sequence[int]) -> "ScenarioSet":
        idx = np.asarray(idx)
        p = self.probs[idx]
        return ScenarioSet(p / p.sum(), self.zeta_d[idx], self.zeta_h[idx], self.p_bar_w[idx], self.bus_ids, self.dibr_ids, self.seed, self.rng)

    # -- CSV interface

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["i", "p_i", "dp_L"]
        header += [f"zeta_d_{b}" for b in self.bus_ids]
        header += [f"zeta_h_{b}" for b in self.bus_ids]
        header += [f"pbar_{w}" for w in self.dibr_ids]
        writer.writerow(header)
        for i in range(self.n):
            row = [str(i), repr(float(self.probs[i])), repr(float(self.dp_L[i]))]
            row += [repr(float(v)) for v in self.zeta_d[i]]
            row += [repr(float(v)) for v in self.zeta_h[i]]
            row += [repr(float(v)) for v in self.p_bar_w[i]]
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: Union[str, Path], seed: Optional[int] = None) -> "ScenarioSet":
        text = Path(source).read_text() if not str(source).startswith("i,") else str(source)
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2:
            raise UncertaintyError("scenario CSV has no data rows")
        header = rows[0]
        bus_ids = tuple(int(h[len("zeta_d_"):]) for h in header if h.startswith("zeta_d_"))
        dibr_ids = tuple(int(h[len("pbar_"):]) for h in header if h.startswith("pbar_"))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        col = {h: k for k, h in enumerate(header)}
        zd = data[:, [col[f"zeta_d_{b}"] for b in bus_ids]]
        zh = data[:, [col[f"zeta_h_{b}"] for b in bus_ids]]
        pw = data[:, [col[f"pbar_{w}"] for w in dibr_ids]].reshape(len(data), len(dibr_ids))
        out = cls(data[:, col["p_i"]], zd, zh, pw, bus_ids, dibr_ids, seed)
        if not np.array_equal(out.dp_L, data[:, col["dp_L"]]):
            raise UncertaintyError("dp_L column disagrees with the per-bus errors")
        return out


def _draw_block(specs: Sequence[BetaSpec], rng: np.random.Generator, size: int) -> np.ndarray:
    out = np.empty((size, len(specs)))
    for k, spec in enumerate(specs):
        out[:, k] = spec.draw(rng, size)
    return out


def sample_scenarios(model: UncertaintyModel, case: GridCase, n: int, seed: int) -> ScenarioSet:
    """n equal-weight scenarios. Draws come from independent substreams keyed by (seed, block of 256
    scenarios), so the result does not depend on how blocks are scheduled."""
    if n < 1:
        raise UncertaintyError(f"n must be >= 1, got {n}")
    model.check(case)
    d_specs, h_specs, w_specs = model.column_specs(case)
    zd = np.empty((n, len(d_specs)))
    zh = np.empty((n, len(h_specs)))
    pw = np.empty((n, len(w_specs)))
    for blk, start in enumerate(range(0, n, BLOCK)):
        size = min(BLOCK, n - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), blk])))
        zd[start:start + size] = _draw_block(d_specs, rng, size)
        zh[start:start + size] = _draw_block(h_specs, rng, size)
        pw[start:start + size] = _draw_block(w_specs, rng, size)
    return ScenarioSet(np.full(n, 1.0 / n), zd, zh, pw, tuple(case.bus_ids), tuple(w.id for w in case.dibr), int(seed))


def zero_scenarios(case: GridCase, n: int = 1) -> ScenarioSet:
    """Scenarios with no forecast error and DIBR availability at forecast."""
    return sample_scenarios(UncertaintyModel(), case, n, 0)


# ---------------------------------------------------------------- quantiles

_TOL = 1e-12


def empirical_quantile(values: Sequence[float], probs: Optional[Sequence[float]], level: float, side: str = "upper") -> float:
    """Upper: smallest v with P(X > v) <= level. Lower: largest v with P(X < v) <= level."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_quantile of empty input")
    p = np.full(x.size, 1.0 / x.size) if probs is None else np.asarray(probs, dtype=float)
    if p.shape != x.shape:
        raise ValueError("values and probs differ in length")
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    if side == "lower":
        return -empirical_quantile(-x, p, level, "upper")
    if side != "upper":
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    uniq, inv = np.unique(x, return_inverse=True)
    mass = np.bincount(inv, weights=p, minlength=uniq.size)
    # exceed[k] = P(X > uniq[k])
    exceed = np.concatenate([np.cumsum(mass[::-1])[::-1][1:], [0.0]])
    k = int(np.argmax(exceed <= level + _TOL))
    return float(uniq[k])


def droppable_count(probs: Sequence[float], level: float) -> int:
    """Largest number of scenarios whose total probability stays within level (cheapest first)."""
    p = np.sort(np.asarray(probs, dtype=float))
    return int(np.searchsorted(np.cumsum(p), level + _TOL, side="right"))


@dataclass(frozen=True)
class DisturbanceQuantiles:
    abs_dp_qF: float
    dp_up_qR: float
    dp_dn_qR: float


def disturbance_quantiles(sset: ScenarioSet, thr) -> DisturbanceQuantiles:
    dp = sset.dp_L
    half = thr.delta_R_eff / 2.0
    return DisturbanceQuantiles(
        abs_dp_qF=empirical_quantile(np.abs(dp), sset.probs, thr.delta_F, "upper"),
        dp_up_qR=empirical_quantile(dp, sset.probs, half, "upper"),
        dp_dn_qR=empirical_quantile(dp, sset.probs, half, "lower"),
    )


def bundled_uncertainty_path(name: str) -> Path:
    from importlib import resources

    return Path(str(resources.files("jcedkit").joinpath(f"data/{name}.uncertainty.json")))
