"""Command-line front end: sample, solve, verify, compare, export-model.

Exit codes: 0 success, 2 input error, 3 infeasible model, 4 solver backend failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .builder import FIX_JCED, MODES, PO_JCED, BuildError, BuildMode, BuildOptions, DispatchDecision, build_model
from .dynamics import SimConfig, verify_decision
from .evaluator import DEFAULT_SHED_PRICE, compare_methods, curve_csv, ex_post_evaluate
from .grid import CaseError, GridCase, bundled_case_path, compute_ptdf, load_case
from .pipeline import InfeasibleError, solve_dispatch
from .reform import METHODS, MSAA, SAA, ReformError, reformulate
from .scenarios import (
    ScenarioSet,
    UncertaintyError,
    UncertaintyModel,
    bundled_uncertainty_path,
    load_uncertainty,
    sample_scenarios,
)
from .sfr import SfrError
from .solver import BackendError, export_model, resolve_backend

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_BACKEND = 0, 2, 3, 4
DEFAULT_SWEEP = (-0.25, -0.20, -0.15, -0.10, -0.05, 0.05, 0.10, 0.15, 0.20, 0.25)

log = logging.getLogger("jcedkit")


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str = "six_bus"
    uncertainty: Optional[str] = None  # defaults to the bundled file next to a bundled case
    scenarios: Optional[str] = None  # CSV from `sample`; overrides n/seed
    n: int = 1000
    seed: int = 7
    methods: list = field(default_factory=lambda: [MSAA])
    mode: str = PO_JCED
    fix_H: Optional[float] = None
    fix_D: Optional[float] = None
    backend: Optional[str] = None
    out: str = "out"
    jobs: int = 1
    thresholds: dict = field(default_factory=dict)
    nadir_pieces: int = 4
    fuel_segments: int = 3
    time_limit: Optional[float] = None
    test_n: int = 10000
    test_seed: Optional[int] = None
    shed_price: float = DEFAULT_SHED_PRICE

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def validate(self) -> None:
        if self.n < 1:
            raise InputError(f"--n must be >= 1, got {self.n}")
        if self.test_n < 1:
            raise InputError(f"--test-n must be >= 1, got {self.test_n}")
        for m in self.methods:
            if m not in METHODS:
                raise InputError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.jobs < 1:
            raise InputError("--jobs must be >= 1")


# ---------------------------------------------------------------- loading helpers


def resolve_case_path(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    bundled = bundled_case_path(ref)
    if bundled.exists():
        return bundled
    raise InputError(f"case not found: {ref}")


def load_run_case(cfg: RunConfig) -> GridCase:
    case = load_case(resolve_case_path(cfg.case))
    if cfg.thresholds:
        case = case.replace_thresholds(case.thresholds.with_overrides(**cfg.thresholds))
    return case


def load_run_uncertainty(cfg: RunConfig) -> UncertaintyModel:
    if cfg.uncertainty:
        return load_uncertainty(cfg.uncertainty)
    if not Path(cfg.case).exists():
        path = bundled_uncertainty_path(cfg.case)
        if path.exists():
            return load_uncertainty(path)
    sibling = Path(cfg.case).with_suffix(".uncertainty.json")
    if sibling.exists():
        return load_uncertainty(sibling)
    raise InputError("no uncertainty file: pass --uncertainty")


def training_set(cfg: RunConfig, case: GridCase) -> ScenarioSet:
    if cfg.scenarios:
        return ScenarioSet.from_csv(cfg.scenarios, seed=cfg.seed)
    return sample_scenarios(load_run_uncertainty(cfg), case, cfg.n, cfg.seed)


def build_mode(cfg: RunConfig) -> BuildMode:
    return BuildMode(cfg.mode, cfg.fix_H, cfg.fix_D)


def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def echo_thresholds(case: GridCase) -> str:
    t = case.thresholds
    return (f"thresholds: RoCoF {t.df_rate_max:g} Hz/s, nadir {t.df_max:g} Hz, steady state {t.df_ss_max:g} Hz "
            f"(f0 {t.f0:g} Hz)")


# ---------------------------------------------------------------- commands


def cmd_sample(cfg: RunConfig) -> int:
    case = load_run_case(cfg)
    sset = sample_scenarios(load_run_uncertainty(cfg), case, cfg.n, cfg.seed)
    path = _out_dir(cfg) / f"scenarios_n{cfg.n}_seed{cfg.seed}.csv"
    sset.to_csv(path)
    print(f"wrote {sset.n} scenarios (seed {cfg.seed}, {sset.rng}) to {path}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    case = load_run_case(cfg)
    sset = training_set(cfg, case)
    out = _out_dir(cfg)
    ptdf = compute_ptdf(case)
    opts = BuildOptions(cfg.fuel_segments, cfg.nadir_pieces)
    mode = build_mode(cfg)
    report = {"case": case.name, "n": sset.n, "seed": sset.seed, "rng": sset.rng, "mode": mode.kind,
              "backend": resolve_backend(cfg.backend), "methods": {}}
    lines = [f"case {case.name}, n = {sset.n}, seed {sset.seed}, mode {mode.kind}"]
    boundary = None
    for method in cfg.methods:
        res = solve_dispatch(case, sset, method, mode, opts, cfg.backend, cfg.time_limit, ptdf=ptdf, boundary=boundary)
        if boundary is None and res.model.meta.get("nadir_boundary"):
            from .sfr import PwlBoundary

            boundary = PwlBoundary.from_dict(res.model.meta["nadir_boundary"])
        if res.status == "infeasible":
            print(f"{method}: infeasible", file=sys.stderr)
            return EXIT_INFEASIBLE
        if res.decision is None:
            print(f"{method}: solver stopped with status {res.status} and no solution", file=sys.stderr)
            return EXIT_BACKEND
        doc = {"case": case.name, "method": method, "mode": mode.kind, "n": sset.n, "seed": sset.seed,
               "objective": res.objective, "decision": res.decision.to_dict(case)}
        _write_json(out / f"decision_{method}.json", doc)
        export_model(res.program, "mps", out / f"model_{method}.mps")
        report["methods"][method] = res.summary()
        lines.append(f"{method}: {res.status}, objective {res.objective:.4f} $, exact {res.exact_objective:.4f} $, "
                     f"solve {res.timings['solve']:.3f} s, total {res.timings['total']:.3f} s")
        for w in res.model.warnings:
            lines.append(f"  warning: {w}")
    if SAA in report["methods"] and MSAA in report["methods"]:
        saa = report["methods"][SAA]["objective"]
        msaa = report["methods"][MSAA]["objective"]
        err = (saa - msaa) / abs(saa) if saa else 0.0
        report["cost_error"] = err
        lines.append(f"cost error (saa - msaa)/saa: {100.0 * err:.3f}%")
    _write_json(out / "solve_report.json", report)
    text = "\n".join(lines)
    (out / "solve_report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def load_decision(path: str, case: GridCase) -> DispatchDecision:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read decision {path}: {exc}") from None
    return DispatchDecision.from_dict(doc.get("decision", doc), case)


def cmd_verify(cfg: RunConfig, decision_path: str, disturbances: Optional[Sequence[float]]) -> int:
    case = load_run_case(cfg)
    decision = load_decision(decision_path, case)
    if disturbances is None:
        disturbances = [f * case.net_load for f in DEFAULT_SWEEP]
    thr = case.thresholds
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        parts = list(pool.map(lambda d: verify_decision(decision, case, thr, [d], SimConfig()), disturbances))
    checks = tuple(c for p in parts for c in p.checks)
    freq = {"thresholds": parts[0].thresholds if parts else {}, "passed": all(c.passed for c in checks),
            "disturbances": [d for p in parts for d in p.to_dict()["disturbances"]]}
    test_seed = cfg.test_seed if cfg.test_seed is not None else cfg.seed + 1000
    test = sample_scenarios(load_run_uncertainty(cfg), case, cfg.test_n, test_seed)
    ex = ex_post_evaluate(decision, case, compute_ptdf(case), test, cfg.shed_price, cfg.fuel_segments)
    out = _out_dir(cfg)
    _write_json(out / "verify_report.json", {"frequency": freq, "ex_post": ex.to_dict()})
    lines = [echo_thresholds(case)]
    for d in freq["disturbances"]:
        status = "pass" if d["passed"] else "FAIL " + ",".join(d["failures"])
        lines.append(f"  dp {d['dp_L_mw']:+9.3f} MW  rocof {d['rocof_max_hz_s']:+.4f}  nadir {d['nadir_hz']:+.4f}  "
                     f"ss {d['ss_dev_hz']:+.4f}  {status}")
    lines.append("frequency checks: " + ("all pass" if freq["passed"] else "failures present"))
    lines.append(ex.to_text())
    text = "\n".join(lines)
    (out / "verify_report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, repeats: int, sizes: Sequence[int]) -> int:
    case = load_run_case(cfg)
    methods = cfg.methods if len(cfg.methods) > 1 else [SAA, MSAA]
    out = _out_dir(cfg)
    docs, points, texts = [], [], []
    for n in sizes:
        sset = sample_scenarios(load_run_uncertainty(cfg), case, n, cfg.seed) if not cfg.scenarios else training_set(cfg, case)
        cmp = compare_methods(case, sset, methods, repeats, build_mode(cfg), BuildOptions(cfg.fuel_segments, cfg.nadir_pieces),
                              cfg.backend, cfg.time_limit)
        docs.append(cmp.to_dict())
        texts.append(cmp.to_text())
        points.extend({"n": n, "method": r.method, "objective": r.objective, "wall_time": r.wall_time} for r in cmp.rows)
    _write_json(out / "compare_report.json", {"case": case.name, "seed": cfg.seed, "runs": docs})
    curve_csv(points, out / "compare_curve.csv")
    text = "\n\n".join(texts)
    (out / "compare_report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_export(cfg: RunConfig, fmt: str) -> int:
    case = load_run_case(cfg)
    sset = training_set(cfg, case)
    model = build_model(case, sset, build_mode(cfg), BuildOptions(cfg.fuel_segments, cfg.nadir_pieces))
    out = _out_dir(cfg)
    for method in cfg.methods:
        program = reformulate(model, method)
        path = out / f"model_{method}.{ 'mps' if fmt == 'mps' else 'lp'}"
        export_model(program, fmt, path)
        print(f"wrote {path} ({program.n_vars} variables, {program.n_rows} rows, {program.n_integer} integer)")
    (out / "model_symbolic.json").write_text(model.to_json() + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", help="case JSON path or bundled case name (six_bus, ieee39_like)")
    common.add_argument("--config", help="JSON run configuration; command-line flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--backend", help="highs | embedded | exec:<path> (JCEDKIT_BACKEND overrides)")
    common.add_argument("--jobs", type=int, help="worker cap for parallel sweeps")
    common.add_argument("--uncertainty", help="uncertainty JSON (defaults to the case's bundled file)")
    common.add_argument("--scenarios", help="scenario CSV written by `sample`")
    common.add_argument("--n", type=int, help="number of training scenarios")
    common.add_argument("--method", action="append", choices=METHODS, help="repeatable")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--fix-H", dest="fix_H", type=float, help="inverter inertia (s) for fix-jced")
    common.add_argument("--fix-D", dest="fix_D", type=float, help="inverter droop (p.u.) for fix-jced")
    common.add_argument("--delta", type=float, help="set delta_DIBR, delta_SFR and delta_L together")
    common.add_argument("--delta-F", dest="delta_F", type=float)
    common.add_argument("--time-limit", dest="time_limit", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="jcedkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jcedkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw training scenarios to CSV")
    sub.add_parser("solve", parents=[common], help="build, reformulate and solve")
    p = sub.add_parser("verify", parents=[common], help="frequency simulation sweep and ex-post evaluation")
    p.add_argument("--decision", required=True, help="decision JSON written by `solve`")
    p.add_argument("--disturbance", type=float, action="append", help="MW, repeatable (default: +-5..25%% of net load)")
    p.add_argument("--test-n", dest="test_n", type=int)
    p.add_argument("--test-seed", dest="test_seed", type=int)
    p.add_argument("--shed-price", dest="shed_price", type=float)
    p = sub.add_parser("compare", parents=[common], help="SAA against MSAA cost and time")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--sizes", type=int, nargs="+", help="scenario counts (default: --n)")
    p = sub.add_parser("export-model", parents=[common], help="write the reformulated program")
    p.add_argument("--format", choices=("mps", "lp"), default="mps")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in ("case", "seed", "out", "backend", "jobs", "uncertainty", "scenarios", "n", "mode", "fix_H", "fix_D",
                 "time_limit"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    for name in ("test_n", "test_seed", "shed_price"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if args.method:
        cfg.methods = list(dict.fromkeys(args.method))
    thr = dict(cfg.thresholds)
    if args.delta is not None:
        thr.update(delta_DIBR=args.delta, delta_SFR=args.delta, delta_L=args.delta)
    if args.delta_F is not None:
        thr["delta_F"] = args.delta_F
    cfg.thresholds = thr
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.validate()
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.decision, args.disturbance)
        if args.command == "compare":
            return cmd_compare(cfg, args.repeats, args.sizes or [cfg.n])
        if args.command == "export-model":
            return cmd_export(cfg, args.format)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (InputError, CaseError, UncertaintyError, BuildError, ReformError, SfrError, FileNotFoundError,
            ValueError, TypeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    parser.error(f"unknown command {args.command}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
