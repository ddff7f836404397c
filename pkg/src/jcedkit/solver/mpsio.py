"""MPS and LP-format writers, an MPS reader, and a parser for external solver solution files.

MPS output keeps the fixed-form section/field order but allows names longer than eight characters
and prints numbers with 17 significant digits, so every value survives a round trip exactly. Readers
of free MPS (HiGHS, CBC, GLPK --freemps) accept it. The objective constant is written as the negated
right-hand side of the objective row.
"""
from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from .program import EQ, GE, LE, CanonicalProgram

OBJ = "obj"


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _f(name: str, width: int = 8) -> str:
    return name.ljust(width)


def write_mps(p: CanonicalProgram) -> str:
    out = [f"NAME          {p.name}", "ROWS", f" N  {OBJ}"]
    for name, s in zip(p.row_names, p.senses):
        out.append(f" {s}  {name}")
    out.append("COLUMNS")
    A = p.A.tocsc()
    in_int = False
    marker = 0
    for j, name in enumerate(p.names):
        if p.integer[j] and not in_int:
            out.append(f"    {_f(f'MARKER{marker}')}  'MARKER'                 'INTORG'")
            in_int, marker = True, marker + 1
        elif not p.integer[j] and in_int:
            out.append(f"    {_f(f'MARKER{marker}')}  'MARKER'                 'INTEND'")
            in_int, marker = False, marker + 1
        entries = []
        if p.c[j] != 0.0:
            entries.append((OBJ, p.c[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for r, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            entries.append((p.row_names[r], v))
        if not entries:
            entries.append((OBJ, 0.0))
        for rname, v in entries:
            out.append(f"    {_f(name)}  {_f(rname)}  {_num(v)}")
    if in_int:
        out.append(f"    {_f(f'MARKER{marker}')}  'MARKER'                 'INTEND'")
    out.append("RHS")
    if p.offset != 0.0:
        out.append(f"    {_f('RHS')}  {_f(OBJ)}  {_num(-p.offset)}")
    for name, r in zip(p.row_names, p.rhs):
        if r != 0.0:
            out.append(f"    {_f('RHS')}  {_f(name)}  {_num(r)}")
    out.append("BOUNDS")
    for j, name in enumerate(p.names):
        lo, hi = p.lb[j], p.ub[j]
        integer = bool(p.integer[j])
        if lo == hi:
            out.append(f" FX {_f('BND')}  {_f(name)}  {_num(lo)}")
            continue
        if lo == -math.inf and hi == math.inf:
            out.append(f" FR {_f('BND')}  {_f(name)}")
            continue
        if lo == -math.inf:
            out.append(f" MI {_f('BND')}  {_f(name)}")
        elif lo != 0.0 or integer:
            out.append(f" LO {_f('BND')}  {_f(name)}  {_num(lo)}")
        if hi != math.inf:
            out.append(f" UP {_f('BND')}  {_f(name)}  {_num(hi)}")
        elif integer:
            out.append(f" PL {_f('BND')}  {_f(name)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


class MpsError(ValueError):
    pass


def read_mps(text: str) -> CanonicalProgram:
    section = None
    name = "model"
    obj_row = None
    row_names, senses = [], []
    row_index: dict = {}
    col_names: list = []
    col_index: dict = {}
    integer: list = []
    cost: dict = {}
    trip_r, trip_c, trip_v = [], [], []
    rhs: dict = {}
    bounds: dict = {}
    offset = 0.0
    in_int = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME" and len(head) > 1:
                name = head[1]
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, rname = tok[0], tok[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if kind not in ("L", "G", "E"):
                raise MpsError(f"line {lineno}: unknown row type {kind!r}")
            row_index[rname] = len(row_names)
            row_names.append(rname)
            senses.append({"L": LE, "G": GE, "E": EQ}[kind])
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            cname = tok[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
                integer.append(in_int)
            j = col_index[cname]
            for rname, val in zip(tok[1::2], tok[2::2]):
                v = float(val)
                if rname == obj_row:
                    cost[j] = cost.get(j, 0.0) + v
                elif rname in row_index:
                    trip_r.append(row_index[rname])
                    trip_c.append(j)
                    trip_v.append(v)
                else:
                    raise MpsError(f"line {lineno}: unknown row {rname}")
        elif section == "RHS":
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    offset = -float(val)
                else:
                    rhs[row_index[rname]] = float(val)
        elif section == "BOUNDS":
            kind, cname = tok[0], tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            bounds.setdefault(cname, []).append((kind, val))
        elif section == "RANGES":
            raise MpsError("RANGES section is not supported")
    n = len(col_names)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for cname, items in bounds.items():
        j = col_index[cname]
        for kind, val in items:
            if kind == "FX":
                lb[j] = ub[j] = val
            elif kind == "FR":
                lb[j], ub[j] = -np.inf, np.inf
            elif kind == "MI":
                lb[j] = -np.inf
            elif kind == "PL":
                ub[j] = np.inf
            elif kind == "LO":
                lb[j] = val
            elif kind == "UP":
                ub[j] = val
            elif kind == "BV":
                lb[j], ub[j] = 0.0, 1.0
                integer[j] = True
            else:
                raise MpsError(f"unsupported bound type {kind}")
    A = sp.coo_matrix((trip_v, (trip_r, trip_c)), shape=(len(row_names), n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return CanonicalProgram(
        names=tuple(col_names), lb=lb, ub=ub, integer=np.array(integer, dtype=bool),
        c=np.array([cost.get(j, 0.0) for j in range(n)]), A=A, senses=tuple(senses),
        rhs=np.array([rhs.get(k, 0.0) for k in range(len(row_names))]), row_names=tuple(row_names),
        offset=offset, name=name,
    )


def write_lp(p: CanonicalProgram) -> str:
    def terms(pairs):
        parts = []
        for v, name in pairs:
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {_num(abs(v))} {name}")
        return " ".join(parts) if parts else "0 " + (p.names[0] if p.names else "")

    out = [f"\\ Problem: {p.name}", f"\\ Objective constant: {_num(p.offset)}", "Minimize"]
    out.append(" obj: " + terms([(p.c[j], p.names[j]) for j in range(p.n_vars) if p.c[j] != 0.0]))
    out.append("Subject To")
    A = p.A.tocsr()
    sym = {LE: "<=", GE: ">=", EQ: "="}
    for k, rname in enumerate(p.row_names):
        lo, hi = A.indptr[k], A.indptr[k + 1]
        pairs = [(v, p.names[j]) for j, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        out.append(f" {rname}: {terms(pairs)} {sym[p.senses[k]]} {_num(p.rhs[k])}")
    out.append("Bounds")
    for j, name in enumerate(p.names):
        lo, hi = p.lb[j], p.ub[j]
        if lo == hi:
            out.append(f" {name} = {_num(lo)}")
        elif lo == -math.inf and hi == math.inf:
            out.append(f" {name} free")
        else:
            left = "-inf" if lo == -math.inf else _num(lo)
            right = "+inf" if hi == math.inf else _num(hi)
            out.append(f" {left} <= {name} <= {right}")
    ints = [n for n, i in zip(p.names, p.integer) if i]
    if ints:
        out.append("General")
        out.extend(f" {n}" for n in ints)
    out.append("End")
    return "\n".join(out) + "\n"


def export_model(p: CanonicalProgram, fmt: str = "mps", path: Union[str, Path, None] = None) -> str:
    if fmt == "mps":
        text = write_mps(p)
    elif fmt in ("lp", "lp-text"):
        text = write_lp(p)
    else:
        raise ValueError(f"unknown model format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


_NUM = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$|^[-+]?inf(inity)?$", re.IGNORECASE)


def parse_solution(text: str, names) -> tuple[str, dict, float]:
    """Parse a ``<name> <value>`` style solution file (CBC, HiGHS, GLPK-like). Variables absent from
    the file are taken as 0. Returns (status, values, objective or nan)."""
    low = text.lower()
    if "infeasible" in low:
        status = "infeasible"
    elif "unbounded" in low:
        status = "unbounded"
    elif "time limit" in low or "stopped" in low or "limit reached" in low:
        status = "limit"
    elif "optimal" in low:
        status = "optimal"
    else:
        status = "unknown"
    known = set(names)
    values = {}
    objective = math.nan
    for line in text.splitlines():
        tok = line.replace("=", " ").split()
        m = re.search(r"objective(?: value)?[:\s=]+([-+0-9.eE]+)", line, re.IGNORECASE)
        if m:
            try:
                objective = float(m.group(1))
            except ValueError:
                pass
        for k, t in enumerate(tok[:-1]):
            if t in known and t not in values and _NUM.match(tok[k + 1]):
                values[t] = float(tok[k + 1])
                break
    return status, {n: values.get(n, 0.0) for n in names}, objective
