"""Sparse (mixed-integer) linear program in triplet form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "L", "G", "E"
_SENSE = {"<=": LE, ">=": GE, "=": EQ, LE: LE, GE: GE, EQ: EQ}


class ProgramError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CanonicalProgram:
    """minimize c.x + offset  s.t.  A x (sense) rhs,  lb <= x <= ub,  x_j integer where flagged."""

    names: tuple
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    row_names: tuple
    offset: float = 0.0
    name: str = "jced"
    stats: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_integer(self) -> int:
        return int(np.count_nonzero(self.integer))

    @property
    def is_mip(self) -> bool:
        return self.n_integer > 0

    def index(self) -> dict:
        return {n: k for k, n in enumerate(self.names)}

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.offset)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def max_violation(self, x: np.ndarray, int_tol: float = 1e-6) -> tuple[float, str]:
        """Largest absolute violation of any row, bound or integrality, with a label."""
        worst, where = 0.0, ""
        act = self.A @ x
        for k, (s, r) in enumerate(zip(self.senses, self.rhs)):
            v = act[k] - r
            viol = max(0.0, v) if s == LE else max(0.0, -v) if s == GE else abs(v)
            if viol > worst:
                worst, where = viol, f"row {self.row_names[k]}"
        lo = np.maximum(self.lb - x, 0.0)
        hi = np.maximum(x - self.ub, 0.0)
        for arr, label in ((lo, "lower bound"), (hi, "upper bound")):
            if arr.size and arr.max() > worst:
                j = int(arr.argmax())
                worst, where = float(arr[j]), f"{label} of {self.names[j]}"
        if self.is_mip:
            frac = np.abs(x - np.round(x)) * self.integer
            if frac.max() > max(worst, int_tol):
                j = int(frac.argmax())
                worst, where = float(frac[j]), f"integrality of {self.names[j]}"
        return float(worst), where

    def relaxed(self) -> "CanonicalProgram":
        return CanonicalProgram(self.names, self.lb, self.ub, np.zeros_like(self.integer), self.c, self.A, self.senses,
                                self.rhs, self.row_names, self.offset, self.name, dict(self.stats))

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "CanonicalProgram":
        return CanonicalProgram(self.names, lb, ub, self.integer, self.c, self.A, self.senses, self.rhs,
                                self.row_names, self.offset, self.name, dict(self.stats))


class ProgramBuilder:
    """Accumulates variables and rows, then assembles a CanonicalProgram (merging duplicate entries)."""

    def __init__(self, name: str = "jced"):
        self.name = name
        self._names: list = []
        self._index: dict = {}
        self._lb: list = []
        self._ub: list = []
        self._int: list = []
        self._c: list = []
        self._rows: list = []  # (name, cols, vals, sense, rhs)
        self.offset = 0.0
        self.stats: dict = {}

    def var(self, name: str, lb: float = 0.0, ub: float = math.inf, integer: bool = False, cost: float = 0.0) -> int:
        if name in self._index:
            raise ProgramError(f"duplicate variable {name}")
        if lb > ub:
            raise ProgramError(f"variable {name}: lower bound exceeds upper bound")
        if not math.isfinite(cost):
            raise ProgramError(f"variable {name}: non-finite objective coefficient")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._int.append(bool(integer))
        self._c.append(float(cost))
        return self._index[name]

    def has(self, name: str) -> bool:
        return name in self._index

    def col(self, name: str) -> int:
        return self._index[name]

    def set_bounds(self, name: str, lb: Optional[float] = None, ub: Optional[float] = None) -> None:
        j = self._index[name]
        if lb is not None:
            self._lb[j] = float(lb)
        if ub is not None:
            self._ub[j] = float(ub)

    def add_cost(self, name: str, c: float) -> None:
        self._c[self._index[name]] += float(c)

    def row(self, name: str, coefs, sense: str, rhs: float) -> None:
        """coefs: mapping name -> value, or a pair (column indices, values)."""
        if isinstance(coefs, dict):
            cols = [self._index[v] for v in coefs]
            vals = [float(x) for x in coefs.values()]
        else:
            cols, vals = coefs
            cols, vals = list(cols), [float(x) for x in vals]
        if sense not in _SENSE:
            raise ProgramError(f"row {name}: unknown sense {sense!r}")
        self._rows.append((name, cols, vals, _SENSE[sense], float(rhs)))

    def build(self) -> CanonicalProgram:
        n = len(self._names)
        rows_i, cols_j, vals = [], [], []
        for k, (_, cols, v, _, _) in enumerate(self._rows):
            rows_i.extend([k] * len(cols))
            cols_j.extend(cols)
            vals.extend(v)
        A = sp.coo_matrix((vals, (rows_i, cols_j)), shape=(len(self._rows), n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        return CanonicalProgram(
            names=tuple(self._names),
            lb=np.array(self._lb),
            ub=np.array(self._ub),
            integer=np.array(self._int, dtype=bool),
            c=np.array(self._c),
            A=A,
            senses=tuple(r[3] for r in self._rows),
            rhs=np.array([r[4] for r in self._rows]),
            row_names=tuple(r[0] for r in self._rows),
            offset=float(self.offset),
            name=self.name,
            stats=dict(self.stats),
        )


def from_arrays(
    c: Sequence[float], A, senses: Sequence[str], rhs: Sequence[float], lb=None, ub=None, integer=None,
    names=None, offset: float = 0.0,
) -> CanonicalProgram:
    """Convenience constructor for small hand-written programs."""
    A = sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float))) if not sp.issparse(A) else sp.csr_matrix(A)
    n = A.shape[1]
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(n))
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    integer = np.zeros(n, dtype=bool) if integer is None else np.asarray(integer, dtype=bool)
    if A.shape[0] == 0:
        A = sp.csr_matrix((0, n))
    return CanonicalProgram(names, lb, ub, integer, np.asarray(c, dtype=float), A,
                            tuple(_SENSE[s] for s in senses), np.asarray(rhs, dtype=float),
                            tuple(f"c{k}" for k in range(A.shape[0])), float(offset))
