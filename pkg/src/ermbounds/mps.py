"""MPS export and import for :class:`~ermbounds.model.MilpModel`.

Fields are written in fixed, aligned columns, but names may exceed eight
characters (e.g. ``Rw2[12,14,13]``), so readers must split on whitespace
as free-format MPS readers do. Numbers use the shortest round-trip
representation, so export followed by import is bit-exact. The objective
constant is stored as the negated RHS entry of the objective row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .model import MilpModel, VarKind

OBJ_ROW = "OBJ"
_SENSE = {"<=": "L", ">=": "G", "=": "E"}


class MpsError(ValueError):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def row_names(model: MilpModel) -> list[str]:
    names, seen = [], set()
    for idx, con in enumerate(model.constraints):
        name = con.name or f"c{idx}"
        if name in seen or name == OBJ_ROW or " " in name:
            name = f"c{idx}"
        seen.add(name)
        names.append(name)
    return names


def write_mps(model: MilpModel, path) -> Path:
    path = Path(path)
    rnames = row_names(model)
    c, A, *_ = model.arrays
    At = sparse.csc_matrix(A)
    width = max([len(v.name) for v in model.variables] + [len(r) for r in rnames] + [8]) + 2

    def line(*fields):
        return "    " + "".join(f.ljust(width) for f in fields[:-1]) + fields[-1]

    out = [f"NAME          {model.name}", "ROWS", f" N  {OBJ_ROW}"]
    for name, con in zip(rnames, model.constraints):
        out.append(f" {_SENSE[con.sense]}  {name}")
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for vid, var in enumerate(model.variables):
        is_int = var.kind is VarKind.BINARY
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.append(line(f"M{marker}", "'MARKER'", tag))
            marker += 1
            in_int = is_int
        entries = []
        if c[vid] != 0.0:
            entries.append((OBJ_ROW, c[vid]))
        start, end = At.indptr[vid], At.indptr[vid + 1]
        for r, val in zip(At.indices[start:end], At.data[start:end]):
            entries.append((rnames[r], val))
        if not entries:
            # keep the column declared so the variable survives a round trip
            entries.append((OBJ_ROW, 0.0))
        for rname, val in entries:
            out.append(line(var.name, rname, _num(val)))
    if in_int:
        out.append(line(f"M{marker}", "'MARKER'", "'INTEND'"))
    out.append("RHS")
    if model.objective_constant != 0.0:
        out.append(line("RHS", OBJ_ROW, _num(-model.objective_constant)))
    for name, con in zip(rnames, model.constraints):
        if con.rhs != 0.0:
            out.append(line("RHS", name, _num(con.rhs)))
    out.append("BOUNDS")
    for var in model.variables:
        if var.lb != 0.0:
            out.append(f" LO BND       {var.name.ljust(width)}{_num(var.lb)}")
        if math.isfinite(var.ub):
            out.append(f" UP BND       {var.name.ljust(width)}{_num(var.ub)}")
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")
    return path


@dataclass(frozen=True)
class MpsProblem:
    """Plain arrays read back from an MPS file."""

    name: str
    col_names: list[str]
    row_names: list[str]
    c: np.ndarray
    objective_constant: float
    A: sparse.csr_matrix
    senses: list[str]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray


def read_mps(path) -> MpsProblem:
    name = ""
    section = None
    rows: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, int] = {}
    col_order: list[str] = []
    entries: list[tuple[str, int, float]] = []
    integer: set[str] = set()
    rhs: dict[str, float] = {}
    lb: dict[str, float] = {}
    ub: dict[str, float] = {}
    in_int = False
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                name = head[1] if len(head) > 1 else ""
            continue
        f = raw.split()
        if section == "ROWS":
            rows[f[1]] = f[0]
            if f[0] != "N":
                row_order.append(f[1])
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                in_int = f[2] == "'INTORG'"
                continue
            col = f[0]
            if col not in cols:
                cols[col] = len(col_order)
                col_order.append(col)
                if in_int:
                    integer.add(col)
            for rname, val in zip(f[1::2], f[2::2]):
                if rname not in rows:
                    raise MpsError(f"unknown row {rname}")
                entries.append((rname, cols[col], float(val)))
        elif section == "RHS":
            for rname, val in zip(f[1::2], f[2::2]):
                rhs[rname] = float(val)
        elif section == "BOUNDS":
            kind, col, val = f[0], f[2], float(f[3]) if len(f) > 3 else 0.0
            if kind == "LO":
                lb[col] = val
            elif kind == "UP":
                ub[col] = val
            elif kind == "FX":
                lb[col] = ub[col] = val
            elif kind == "BV":
                lb[col], ub[col] = 0.0, 1.0
                integer.add(col)
            else:
                raise MpsError(f"unsupported bound type {kind}")
        elif section != "ENDATA":
            raise MpsError(f"unexpected line in section {section}: {raw!r}")
    obj_rows = [r for r, t in rows.items() if t == "N"]
    if len(obj_rows) != 1:
        raise MpsError("expected exactly one objective row")
    obj = obj_rows[0]
    rindex = {r: i for i, r in enumerate(row_order)}
    nvar = len(col_order)
    c = np.zeros(nvar)
    ri, ci, vals = [], [], []
    for rname, col, val in entries:
        if rname == obj:
            c[col] += val
        else:
            ri.append(rindex[rname])
            ci.append(col)
            vals.append(val)
    A = sparse.csr_matrix((vals, (ri, ci)), shape=(len(row_order), nvar))
    sense_map = {"L": "<=", "G": ">=", "E": "="}
    return MpsProblem(
        name,
        col_order,
        row_order,
        c,
        -rhs.get(obj, 0.0),
        A,
        [sense_map[rows[r]] for r in row_order],
        np.array([rhs.get(r, 0.0) for r in row_order]),
        np.array([lb.get(v, 0.0) for v in col_order]),
        np.array([ub.get(v, math.inf) for v in col_order]),
        np.array([v in integer for v in col_order], dtype=int),
    )
