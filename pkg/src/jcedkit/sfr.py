"""Equivalent-machine frequency response: aggregates, analytic indices and the inertia/droop safe boundary.

Frequencies are per unit internally (deviation / f0) and Hz at the interface. Disturbances are MW,
converted to per unit on the system base p_sys.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .grid import GridCase, Thresholds


class SfrError(ValueError):
    pass


@dataclass(frozen=True)
class SfrAggregates:
    H_G_eq: float
    R_G_inv: float
    F_H: float
    T_R: float
    D_O: float
    p_sys: float
    H_W_eq: float = 0.0
    H_E_eq: float = 0.0
    D_W_eq: float = 0.0
    D_E_eq: float = 0.0
    lambda_g: tuple = (1.0,)

    @property
    def H_I(self) -> float:
        return self.H_W_eq + self.H_E_eq

    @property
    def D_I(self) -> float:
        return self.D_W_eq + self.D_E_eq

    @property
    def H_sys(self) -> float:
        return self.H_G_eq + self.H_I

    @property
    def D_sys(self) -> float:
        """Damping without governor action, D_O + D_W + D_E."""
        return self.D_O + self.D_I

    @property
    def D_total(self) -> float:
        return self.D_sys + self.R_G_inv

    def with_inverter(self, H_I: float, D_I: float) -> "SfrAggregates":
        """Same thermal fleet with the inverter contribution lumped into the DIBR slot."""
        return replace(self, H_W_eq=float(H_I), H_E_eq=0.0, D_W_eq=float(D_I), D_E_eq=0.0)


def equivalent(H_sys: float, D_sys: float, R_G_inv: float, F_H: float, T_R: float, p_sys: float = 1.0) -> SfrAggregates:
    """Aggregates for a bare equivalent machine (all inertia and damping on the thermal side)."""
    return SfrAggregates(H_G_eq=H_sys, R_G_inv=R_G_inv, F_H=F_H, T_R=T_R, D_O=D_sys, p_sys=p_sys)


def aggregate(
    case: GridCase,
    H_w: Optional[Sequence[float]] = None,
    D_w: Optional[Sequence[float]] = None,
    H_e: Optional[Sequence[float]] = None,
    D_e: Optional[Sequence[float]] = None,
    p_sys: Optional[float] = None,
) -> SfrAggregates:
    """Capacity-weighted aggregates. Inverter settings default to zero; p_sys defaults to the case base."""
    p_sys = case.base_mva if p_sys is None else p_sys
    if not p_sys > 0:
        raise SfrError("system base p_sys must be positive")
    H_w = np.zeros(len(case.dibr)) if H_w is None else np.asarray(H_w, dtype=float)
    D_w = np.zeros(len(case.dibr)) if D_w is None else np.asarray(D_w, dtype=float)
    H_e = np.zeros(len(case.storage)) if H_e is None else np.asarray(H_e, dtype=float)
    D_e = np.zeros(len(case.storage)) if D_e is None else np.asarray(D_e, dtype=float)
    for name, arr in (("H_w", H_w), ("D_w", D_w), ("H_e", H_e), ("D_e", D_e)):
        if np.any(arr < 0):
            raise SfrError(f"{name} must be nonnegative")
    cap_w = np.array([w.p_cap for w in case.dibr], dtype=float)
    cap_e = np.array([e.p_max for e in case.storage], dtype=float)
    pg = np.array([g.p_max for g in case.thermal], dtype=float)
    gain = np.array([g.p_max / g.R_g for g in case.thermal]) / p_sys
    lam = gain / gain.sum()
    return SfrAggregates(
        H_G_eq=float(np.dot([g.H_g for g in case.thermal], pg) / p_sys),
        R_G_inv=float(gain.sum()),
        F_H=float(np.dot(lam, [g.F_g_H for g in case.thermal])),
        T_R=float(np.dot(lam, [g.T_g_R for g in case.thermal])),
        D_O=case.thresholds.D_O,
        p_sys=float(p_sys),
        H_W_eq=float(np.dot(H_w, cap_w) / p_sys),
        H_E_eq=float(np.dot(H_e, cap_e) / p_sys),
        D_W_eq=float(np.dot(D_w, cap_w) / p_sys),
        D_E_eq=float(np.dot(D_e, cap_e) / p_sys),
        lambda_g=tuple(float(x) for x in lam),
    )


def inverter_D_range(case: GridCase, p_sys: Optional[float] = None) -> float:
    """Largest aggregate inverter damping D^I reachable with every device at its upper bound."""
    p_sys = case.base_mva if p_sys is None else p_sys
    total = sum(w.D_max * w.p_cap for w in case.dibr) + sum(e.D_max * e.p_max for e in case.storage)
    return float(total / p_sys)


def inverter_H_range(case: GridCase, p_sys: Optional[float] = None) -> float:
    p_sys = case.base_mva if p_sys is None else p_sys
    total = sum(w.H_max * w.p_cap for w in case.dibr) + sum(e.H_max * e.p_max for e in case.storage)
    return float(total / p_sys)


# ---------------------------------------------------------------- analytic indices


def rocof(dp_L: float, agg: SfrAggregates, f0: float) -> float:
    """Initial rate of change of frequency, Hz/s (signed)."""
    if not agg.H_sys > 0:
        raise SfrError("system inertia H_sys must be positive")
    return f0 * (-dp_L / agg.p_sys) / (2.0 * agg.H_sys)


def steady_state_dev(dp_L: float, agg: SfrAggregates, f0: float) -> float:
    """Quasi-steady-state frequency deviation after primary response, Hz (signed)."""
    if not agg.D_total > 0:
        raise SfrError("total damping D_O + D_W + D_E + 1/R_G must be positive")
    return f0 * (-dp_L / agg.p_sys) / agg.D_total


@dataclass(frozen=True)
class SfrClosedForm:
    zeta_sfr: float
    omega_n: float
    t_max: float
    overdamped: bool = False


def second_order_params(agg: SfrAggregates) -> tuple[float, float]:
    """(zeta, omega_n) of the reduced model 2H T_R s^2 + (2H + T_R(D + F_H/R)) s + (D + 1/R)."""
    if not (agg.H_sys > 0 and agg.T_R > 0):
        raise SfrError("H_sys and T_R must be positive")
    H2 = 2.0 * agg.H_sys
    wn2 = agg.D_total / (H2 * agg.T_R)
    if not wn2 > 0:
        raise SfrError("total damping must be positive")
    wn = math.sqrt(wn2)
    two_zw = (H2 + agg.T_R * (agg.D_sys + agg.R_G_inv * agg.F_H)) / (H2 * agg.T_R)
    return two_zw / (2.0 * wn), wn


def nadir_closed_form(dp_L: float, agg: SfrAggregates, f0: float) -> tuple[float, SfrClosedForm]:
    """Signed maximum frequency deviation (Hz) of the reduced model and its ζ, ω_n, t_max.

    Underdamped systems use the analytic peak. Overdamped systems (two real poles) take the larger
    of the stationary point of the two-exponential step response and the steady state; within 1e-6
    of critical damping the extremum of a simulated step response is used instead.
    """
    zeta, wn = second_order_params(agg)
    if abs(zeta - 1.0) < 1e-6:
        from .dynamics import SimConfig, metrics, simulate

        traj = simulate(agg, SimConfig(dp_L=dp_L if dp_L != 0 else 1.0), f0=f0)
        m = metrics(traj, f0)
        scale = 1.0 if dp_L != 0 else 0.0
        return scale * m.nadir, SfrClosedForm(zeta, wn, m.nadir_time, True)
    if zeta > 1.0:
        return _overdamped_peak(dp_L, agg, f0, zeta, wn)
    sigma = zeta * wn
    wr = wn * math.sqrt(1.0 - zeta * zeta)
    T = agg.T_R
    t_max = math.atan2(T * wr, T * sigma - 1.0) / wr
    rho = math.sqrt(T * T * wn * wn - 2.0 * sigma * T + 1.0)
    dev = f0 * (-dp_L / agg.p_sys) / agg.D_total * (1.0 + rho * math.exp(-sigma * t_max))
    return dev, SfrClosedForm(zeta, wn, t_max, False)


def _overdamped_peak(dp_L: float, agg: SfrAggregates, f0: float, zeta: float, wn: float):
    T = agg.T_R
    a = 2.0 * agg.H_sys * T
    root = wn * math.sqrt(zeta * zeta - 1.0)
    s1, s2 = -zeta * wn + root, -zeta * wn - root
    # step response f(t)/(-u) = 1/D_total + A e^{s1 t} + B e^{s2 t}
    A = (1.0 + T * s1) / (a * s1 * (s1 - s2))
    B = (1.0 + T * s2) / (a * s2 * (s2 - s1))
    u = dp_L / agg.p_sys
    best, t_best = 1.0 / agg.D_total, math.inf
    ratio = -B * s2 / (A * s1) if A * s1 != 0.0 else -1.0
    if ratio > 0.0:
        t = math.log(ratio) / (s1 - s2)
        if t > 0.0:
            val = 1.0 / agg.D_total + A * math.exp(s1 * t) + B * math.exp(s2 * t)
            if abs(val) > abs(best):
                best, t_best = val, t
    return -f0 * u * best, SfrClosedForm(zeta, wn, t_best, True)


def nadir_abs(dp_L: float, agg: SfrAggregates, f0: float) -> float:
    return abs(nadir_closed_form(dp_L, agg, f0)[0])


def pfr_headroom_bound(H_k: float, D_k: float, thr: Thresholds, base_mw: float) -> float:
    """Relaxed primary-response headroom (MW) a device with inertia H_k (s) and droop D_k (p.u. on
    base_mw) must hold: (2 H_k Δf̄_rate + D_k Δf̄_max) / f0 on its own base."""
    if H_k < 0 or D_k < 0:
        raise SfrError("H_k and D_k must be nonnegative")
    return (2.0 * H_k * thr.df_rate_max + D_k * thr.df_max) / thr.f0 * base_mw


def headroom_coefficients(thr: Thresholds, base_mw: float) -> tuple[float, float]:
    """MW of headroom per second of inertia and per p.u. of droop."""
    return 2.0 * thr.df_rate_max / thr.f0 * base_mw, thr.df_max / thr.f0 * base_mw


# ---------------------------------------------------------------- safe boundary


@dataclass(frozen=True)
class PwlBoundary:
    """h(D) = max_m(alpha_m - beta_m D) over [D_lo, D_hi]; H^I >= h(D^I) keeps the nadir within threshold."""

    alphas: tuple
    betas: tuple
    D_lo: float
    D_hi: float
    dp_L: float
    threshold: float
    samples_D: tuple = ()
    samples_H: tuple = ()
    piece_of: tuple = ()

    @property
    def M(self) -> int:
        return len(self.alphas)

    def h(self, D) -> np.ndarray:
        D = np.asarray(D, dtype=float)
        a = np.asarray(self.alphas)[:, None]
        b = np.asarray(self.betas)[:, None]
        return np.max(a - b * np.atleast_1d(D)[None, :], axis=0).reshape(D.shape)

    def piece_error(self) -> float:
        """Sum of squared residuals of each sample against the line of its own piece."""
        D = np.asarray(self.samples_D)
        H = np.asarray(self.samples_H)
        m = np.asarray(self.piece_of, dtype=int)
        r = np.asarray(self.alphas)[m] - np.asarray(self.betas)[m] * D - H
        return float(np.sum(r * r))

    def envelope_error(self) -> float:
        r = self.h(np.asarray(self.samples_D)) - np.asarray(self.samples_H)
        return float(np.sum(r * r))

    def to_dict(self) -> dict:
        return {
            "pieces": [[a, b] for a, b in zip(self.alphas, self.betas)],
            "D_range": [self.D_lo, self.D_hi],
            "dp_L_mw": self.dp_L,
            "threshold_hz": self.threshold,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PwlBoundary":
        """Inverse of to_dict (the fitting samples are not serialized)."""
        pieces = doc["pieces"]
        return cls(tuple(float(p[0]) for p in pieces), tuple(float(p[1]) for p in pieces), float(doc["D_range"][0]),
                   float(doc["D_range"][1]), float(doc["dp_L_mw"]), float(doc["threshold_hz"]))


def boundary_H(
    D_I: float, base: SfrAggregates, dp_L: float, threshold: float, f0: float, tol: float = 1e-6, H_cap: float = 1e3
) -> Optional[float]:
    """Smallest inverter inertia H^I (to tol, safe side) keeping |nadir| <= threshold at inverter
    damping D_I. 0 when already safe without inverter inertia; None when unreachable."""

    def safe(H_I: float) -> bool:
        return nadir_abs(dp_L, base.with_inverter(H_I, D_I), f0) <= threshold

    if base.H_G_eq > 0 and safe(0.0):
        return 0.0
    if f0 * abs(dp_L) / base.p_sys / (base.D_total - base.D_I + D_I) > threshold:
        return None  # quasi-steady deviation already exceeds the limit
    lo, hi = 0.0, 1.0
    while not safe(hi):
        lo, hi = hi, hi * 2.0
        if hi > H_cap:
            return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if safe(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _fit_piece(D: np.ndarray, H: np.ndarray) -> tuple[float, float]:
    """Least-squares line alpha - beta D with alpha - beta D_k >= H_k for every sample (exact, by
    enumerating the one- and two-active-constraint candidates of this 2-variable QP)."""
    if D.size == 1:
        return float(H[0]), 0.0
    best = None
    eps = 1e-12 * (1.0 + np.max(np.abs(H)))

    def consider(alpha, beta):
        nonlocal best
        r = alpha - beta * D - H
        err = float(np.sum(r * r))
        if math.isfinite(err) and np.all(r >= -eps):
            if best is None or err < best[0]:
                best = (err, alpha, beta)

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for j in range(D.size):
            dD = D[j] - D
            dH = H[j] - H
            den = float(np.dot(dD, dD))
            beta = float(np.dot(dH, dD) / den) if den > 0 else 0.0
            consider(H[j] + beta * D[j], beta)
            for k in range(j + 1, D.size):
                if D[k] != D[j]:
                    beta2 = -(H[k] - H[j]) / (D[k] - D[j])
                    consider(H[j] + beta2 * D[j], beta2)
    err, alpha, beta = best
    # lift onto the samples exactly so rounding never leaves a sample above the line
    alpha += max(0.0, float(np.max(H - (alpha - beta * D))))
    return float(alpha), float(beta)


def fit_nadir_boundary(
    base: SfrAggregates,
    dp_L: float,
    threshold: float,
    M: int = 4,
    D_max: float = 1.0,
    f0: float = 60.0,
    n_grid: int = 64,
    tol: float = 1e-6,
    check_points: int = 400,
) -> PwlBoundary:
    """Sample the safe H^I-D^I boundary on an even D grid over [0, D_max] (clipped to where the
    boundary first reaches zero) and fit M contiguous,
    equal-count pieces, each lying on or above its samples. Gaps between pieces are checked on a
    dense grid and offending points are folded into the nearest piece until h(D) is safe everywhere
    in the fitted range."""
    if threshold <= 0:
        raise SfrError("threshold must be positive")
    if M < 1:
        raise SfrError("M must be >= 1")
    base = base.with_inverter(0.0, 0.0)
    grid = np.linspace(0.0, D_max, n_grid)
    pts = [(d, boundary_H(d, base, dp_L, threshold, f0, tol)) for d in grid]
    zero = [d for d, h in pts if h == 0.0]
    if zero and zero[0] > 0.0 and zero[0] < D_max:
        # beyond the first zero no inverter inertia is needed (the boundary is nonincreasing in D),
        # so spend the samples where the boundary actually bends
        D_max = float(zero[0])
        grid = np.linspace(0.0, D_max, n_grid)
        pts = [(d, boundary_H(d, base, dp_L, threshold, f0, tol)) for d in grid]
    reach = [(d, h) for d, h in pts if h is not None]
    if not reach:
        raise SfrError(
            f"nadir threshold {threshold} Hz unreachable for a {dp_L} MW disturbance over D^I in [0, {D_max}]"
        )
    D = np.array([p[0] for p in reach])
    H = np.array([p[1] for p in reach])
    D_lo = float(D[0])
    M = min(M, D.size)
    owner = (np.arange(D.size) * M) // D.size
    extra_D: list = []
    extra_H: list = []
    extra_m: list = []
    dense = np.linspace(D_lo, D_max, check_points)
    for _ in range(50):
        allD = np.concatenate([D, extra_D])
        allH = np.concatenate([H, extra_H])
        allm = np.concatenate([owner, np.asarray(extra_m, dtype=int)])
        pieces = [_fit_piece(allD[allm == m], allH[allm == m]) for m in range(M)]
        fit = PwlBoundary(
            tuple(p[0] for p in pieces), tuple(p[1] for p in pieces), D_lo, float(D_max), float(dp_L),
            float(threshold), tuple(allD.tolist()), tuple(allH.tolist()), tuple(int(x) for x in allm),
        )
        hd = fit.h(dense)
        bad = [
            k for k, d in enumerate(dense)
            if nadir_abs(dp_L, base.with_inverter(max(hd[k], 0.0), d), f0) > threshold + 1e-9
        ]
        if not bad:
            return fit
        for k in bad[:: max(1, len(bad) // 4)]:
            d = float(dense[k])
            hb = boundary_H(d, base, dp_L, threshold, f0, tol)
            if hb is None:
                continue
            extra_D.append(d)
            extra_H.append(hb)
            extra_m.append(int(owner[np.argmin(np.abs(D - d))]))
    raise SfrError("boundary fit did not converge to a conservative surrogate")
