"""Symbolic optimization model shared by the builder and the reformulator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    is_integer: bool = False


@dataclass
class Row:
    """sum(coefs[v] * v) <sense> rhs with sense in {"<=", ">=", "="}."""

    name: str
    coefs: dict
    sense: str
    rhs: float
    tag: str = ""


@dataclass
class ChanceRow:
    """coefs . x >= b[i] for scenario i. ``lower`` is a known lower bound of coefs . x (used as the
    base value when it exceeds every b[i])."""

    name: str
    coefs: dict
    b: np.ndarray
    lower: float = -math.inf
    pair: Optional[str] = None  # rows sharing this key are the two sides of one two-sided limit


@dataclass
class ChanceBlock:
    """A family of rows held jointly with probability 1 - delta. ``joint=False`` means every row is
    its own individual chance constraint at level delta."""

    kind: str  # freq | dibr_up | line_flow
    family: str  # indicator name stem: sys | W | L
    delta: float
    rows: list
    joint: bool = True

    @property
    def robust(self) -> bool:
        return self.delta == 0.0


@dataclass
class SymbolicModel:
    variables: dict = field(default_factory=dict)  # name -> Variable, insertion ordered
    objective: dict = field(default_factory=dict)  # name -> coefficient
    objective_offset: float = 0.0
    rows: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    probs: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, is_integer: bool = False) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name}")
        if lb > ub:
            raise ValueError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        self.variables[name] = Variable(name, float(lb), float(ub), is_integer)
        return name

    def add_row(self, name: str, coefs: dict, sense: str, rhs: float, tag: str = "") -> Row:
        for v in coefs:
            if v not in self.variables:
                raise KeyError(f"row {name} references unknown variable {v}")
        row = Row(name, dict(coefs), sense, float(rhs), tag)
        self.rows.append(row)
        return row

    def add_cost(self, name: str, c: float) -> None:
        if c != 0.0:
            self.objective[name] = self.objective.get(name, 0.0) + float(c)

    def block(self, kind: str) -> Optional[ChanceBlock]:
        for b in self.blocks:
            if b.kind == kind:
                return b
        return None

    def rows_tagged(self, tag: str) -> list:
        return [r for r in self.rows if r.tag == tag]

    def check(self) -> None:
        for r in self.rows:
            for v in r.coefs:
                if v not in self.variables:
                    raise KeyError(f"row {r.name} references unknown variable {v}")
        for b in self.blocks:
            for cr in b.rows:
                for v in cr.coefs:
                    if v not in self.variables:
                        raise KeyError(f"chance row {cr.name} references unknown variable {v}")

    def to_dict(self) -> dict:
        """Structured-text form for inspection (chance right-hand sides summarized by min/max)."""

        def num(x):
            return None if not math.isfinite(x) else x

        return {
            "variables": [
                {"name": v.name, "lb": num(v.lb), "ub": num(v.ub), "integer": v.is_integer} for v in self.variables.values()
            ],
            "objective": {"terms": self.objective, "offset": self.objective_offset},
            "rows": [{"name": r.name, "coefs": r.coefs, "sense": r.sense, "rhs": r.rhs, "tag": r.tag} for r in self.rows],
            "chance_blocks": [
                {
                    "kind": b.kind,
                    "family": b.family,
                    "delta": b.delta,
                    "joint": b.joint,
                    "rows": [
                        {"name": cr.name, "coefs": cr.coefs, "b_min": float(np.min(cr.b)), "b_max": float(np.max(cr.b))}
                        for cr in b.rows
                    ],
                }
                for b in self.blocks
            ],
            "meta": self.meta,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False, default=float)
