"""Solver backends and certified-bound extraction.

Backends:

* ``reference`` enumerates monotone staircase patterns of the binary
  variables and solves one LP per pattern; exact, for tiny models only;
* ``highs`` exports the model to MPS, hands the file to HiGHS and parses
  the written solution file plus the proven dual bound;
* ``scipy`` passes the same arrays to :func:`scipy.optimize.milp`.

Certification always uses the dual bound, never the incumbent.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .gauge import Weighting
from .model import MilpModel, VarKind
from .mps import write_mps

log = logging.getLogger(__name__)

BACKEND_ENV = "ERMBOUNDS_BACKEND"
REFERENCE_MAX_BINARIES = 36
_GAP_EPS = 1e-9


class SolverError(RuntimeError):
    pass


class BackendUnavailable(SolverError):
    pass


class TooLarge(ValueError):
    pass


class NoBound(ValueError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    GAP_REACHED = "GapReached"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolveOptions:
    relative_gap: float = 0.002
    time_limit: float | None = None
    threads: int = 1
    backend: str | None = None  # None: $ERMBOUNDS_BACKEND, else "highs"
    workdir: str | None = None  # where MPS / solution files go (kept if set)

    def __post_init__(self):
        if not 0.0 <= self.relative_gap < 1.0:
            raise ValueError("relative_gap must lie in [0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    @property
    def resolved_backend(self) -> str:
        return self.backend or os.environ.get(BACKEND_ENV) or "highs"


def default_options(weighting, N: int | None, k: int | None, **kwargs) -> SolveOptions:
    """Gap .002, loosened to .01 for square-weighted gauges with k <= N/10."""
    gap = 0.002
    if N and k and Weighting.parse(weighting) is Weighting.SQUARE_WEIGHTED and 10 * k <= N:
        gap = 0.01
    return SolveOptions(relative_gap=gap, **kwargs)


@dataclass(frozen=True)
class SolveResult:
    status: Status
    incumbent_value: float | None
    incumbent: np.ndarray | None
    dual_bound: float | None
    gap: float | None
    runtime: float
    backend: str = ""
    lp_count: int = 0
    files: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "incumbent_value": self.incumbent_value,
            "dual_bound": self.dual_bound,
            "gap": self.gap,
            "runtime": self.runtime,
            "backend": self.backend,
        }


def relative_gap(incumbent: float, dual: float) -> float:
    return (incumbent - dual) / max(abs(incumbent), _GAP_EPS)


def _finish(status, x, value, dual, runtime, backend, **extra) -> SolveResult:
    if status is Status.INFEASIBLE:
        return SolveResult(status, None, None, None, None, runtime, backend, **extra)
    gap = relative_gap(value, dual) if value is not None and dual is not None else None
    if value is not None and dual is not None and dual > value + 1e-9:
        raise SolverError(f"dual bound {dual} exceeds incumbent {value}")
    if status is Status.OPTIMAL and gap is not None and gap > 1e-9:
        status = Status.GAP_REACHED
    return SolveResult(status, value, x, dual, gap, runtime, backend, **extra)


# --- reference solver -----------------------------------------------------


def staircase_patterns(size: int):
    """All monotone 0/1 patterns on the strict lower triangle t < s <= size.

    A pattern is 1 at (s, t) iff s >= thr[t], with thresholds
    non-decreasing in t and thr[t] in t+1 .. size+1. Yields dicts
    (s, t) -> 0/1.
    """
    cols = list(range(1, size))

    def rec(t, lo):
        if t == size:
            yield {}
            return
        for thr in range(max(lo, t + 1), size + 2):
            for rest in rec(t + 1, thr):
                pat = dict(rest)
                for s in range(t + 1, size + 1):
                    pat[(s, t)] = int(s >= thr)
                yield pat

    if not cols:
        yield {}
        return
    yield from rec(1, 2)


def _w_grid(model: MilpModel) -> tuple[dict[tuple, int], int]:
    w = model.ids_with_role("w")
    size = max((s for s, _ in w), default=1)
    return w, size


def _fixed_lp(model: MilpModel, fixed: dict[int, float]):
    c, A, row_lo, row_hi, lb, ub, _ = model.arrays
    lb = lb.copy()
    ub = ub.copy()
    for vid, val in fixed.items():
        lb[vid] = ub[vid] = val
    ub_rows = np.isfinite(row_hi) & ~np.isfinite(row_lo)
    lb_rows = np.isfinite(row_lo) & ~np.isfinite(row_hi)
    eq_rows = np.isfinite(row_lo) & np.isfinite(row_hi)
    A_ub = A[ub_rows | lb_rows]
    b_ub = np.where(ub_rows, row_hi, -row_lo)[ub_rows | lb_rows]
    sign = np.where(ub_rows, 1.0, -1.0)[ub_rows | lb_rows]
    A_ub = A_ub.multiply(sign[:, None]).tocsr()
    res = linprog(
        c,
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A[eq_rows] if eq_rows.any() else None,
        b_eq=row_lo[eq_rows] if eq_rows.any() else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res


def reference_solve(model: MilpModel, *, patterns=None) -> SolveResult:
    """Exact optimum by enumerating monotone w patterns.

    ``patterns`` may override the enumeration (used to cross-check against
    plain enumeration of all 0/1 patterns).
    """
    t0 = time.perf_counter()
    w_ids, size = _w_grid(model)
    if len(w_ids) > REFERENCE_MAX_BINARIES:
        raise TooLarge(f"{len(w_ids)} binaries exceed the reference limit {REFERENCE_MAX_BINARIES}")
    if model.num_binaries != len(w_ids):
        raise SolverError("reference solver only handles binaries with role w")
    if patterns is None:
        patterns = staircase_patterns(size)
    best_val, best_x, count = math.inf, None, 0
    for pat in patterns:
        fixed = {vid: float(pat[key]) for key, vid in w_ids.items()}
        res = _fixed_lp(model, fixed)
        count += 1
        if res.status == 0 and res.fun + model.objective_constant < best_val:
            best_val = float(res.fun) + model.objective_constant
            best_x = np.asarray(res.x)
        elif res.status not in (0, 2):
            raise SolverError(f"inner LP failed: {res.message}")
    runtime = time.perf_counter() - t0
    if best_x is None:
        return _finish(Status.INFEASIBLE, None, None, None, runtime, "reference", lp_count=count)
    return _finish(Status.OPTIMAL, best_x, best_val, best_val, runtime, "reference", lp_count=count)


def pruned_reference_solve(model: MilpModel) -> SolveResult:
    """Same optimum as :func:`reference_solve`, with LP-relaxation pruning.

    Column thresholds are fixed one column at a time; at every node the
    LP with the remaining binaries relaxed to [0, 1] bounds all completions,
    and the node is dropped when that bound cannot beat the incumbent.
    """
    t0 = time.perf_counter()
    w_ids, size = _w_grid(model)
    if len(w_ids) > REFERENCE_MAX_BINARIES:
        raise TooLarge(f"{len(w_ids)} binaries exceed the reference limit {REFERENCE_MAX_BINARIES}")
    if model.num_binaries != len(w_ids):
        raise SolverError("reference solver only handles binaries with role w")
    best = {"val": math.inf, "x": None, "lps": 0}

    def node(t: int, lo: int, fixed: dict[int, float]):
        res = _fixed_lp(model, fixed)
        best["lps"] += 1
        if res.status == 2:
            return
        if res.status != 0:
            raise SolverError(f"inner LP failed: {res.message}")
        val = float(res.fun) + model.objective_constant
        if val >= best["val"] - 1e-12:
            return
        if t >= size:
            best["val"], best["x"] = val, np.asarray(res.x)
            return
        for thr in range(max(lo, t + 1), size + 2):
            child = dict(fixed)
            for s in range(t + 1, size + 1):
                child[w_ids[(s, t)]] = float(s >= thr)
            node(t + 1, thr, child)

    node(1, 2, {})
    runtime = time.perf_counter() - t0
    if best["x"] is None:
        return _finish(Status.INFEASIBLE, None, None, None, runtime, "reference", lp_count=best["lps"])
    return _finish(Status.OPTIMAL, best["x"], best["val"], best["val"], runtime, "reference", lp_count=best["lps"])


def all_patterns(model: MilpModel):
    """Every 0/1 assignment of the w variables, monotone or not."""
    keys = sorted(model.ids_with_role("w"))
    for bits in itertools.product((0, 1), repeat=len(keys)):
        yield dict(zip(keys, bits))


def brute_force_solve(model: MilpModel) -> SolveResult:
    if model.num_binaries > 20:
        raise TooLarge("brute force is limited to 20 binaries")
    res = reference_solve(model, patterns=all_patterns(model))
    return SolveResult(res.status, res.incumbent_value, res.incumbent, res.dual_bound, res.gap, res.runtime,
                       "brute-force", res.lp_count)


# --- HiGHS via MPS file -----------------------------------------------------


def _parse_highs_solution(path: Path, names: list[str]) -> np.ndarray | None:
    """Column values from a HiGHS raw solution file."""
    lines = path.read_text().splitlines()
    values: dict[str, float] = {}
    try:
        start = next(i for i, ln in enumerate(lines) if ln.startswith("# Primal solution values"))
    except StopIteration:
        return None
    i = start + 1
    if i < len(lines) and lines[i].strip() in ("None", "Infeasible"):
        return None
    while i < len(lines) and not lines[i].startswith("# Columns"):
        i += 1
    if i == len(lines):
        return None
    ncol = int(lines[i].split()[2])
    for ln in lines[i + 1 : i + 1 + ncol]:
        name, val = ln.rsplit(None, 1)
        values[name] = float(val)
    return np.array([values[n] for n in names])


def _highs_solve(model: MilpModel, options: SolveOptions) -> SolveResult:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise BackendUnavailable("highspy is not installed") from exc

    t0 = time.perf_counter()
    keep = options.workdir is not None
    tmp = None
    if keep:
        workdir = Path(options.workdir)
        workdir.mkdir(parents=True, exist_ok=True)
    else:
        tmp = tempfile.TemporaryDirectory(prefix="ermbounds-")
        workdir = Path(tmp.name)
    try:
        mps_path = write_mps(model, workdir / f"{model.name}.mps")
        sol_path = workdir / f"{model.name}.sol"
        log_path = workdir / f"{model.name}.log"
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("log_file", str(log_path))
        h.setOptionValue("mip_rel_gap", float(options.relative_gap))
        h.setOptionValue("threads", int(options.threads))
        if h.readModel(str(mps_path)) == highspy.HighsStatus.kError:
            raise SolverError(f"HiGHS could not read {mps_path}")
        if options.time_limit is not None:
            # set after reading: the limit also applies to readModel
            h.setOptionValue("time_limit", float(options.time_limit))
        h.run()
        status = h.getModelStatus()
        info = h.getInfo()
        h.writeSolution(str(sol_path), 0)
        names = [v.name for v in model.variables]
        x = _parse_highs_solution(sol_path, names)
        files = {"mps": str(mps_path), "solution": str(sol_path), "log": str(log_path)} if keep else {}
        log.info("highs %s: model %s, solution %s", model.name, mps_path, sol_path)
        runtime = time.perf_counter() - t0
        MS = highspy.HighsModelStatus
        if status == MS.kInfeasible:
            return _finish(Status.INFEASIBLE, None, None, None, runtime, "highs", files=files)
        dual = float(info.mip_dual_bound)
        value = float(info.objective_function_value) if x is not None else None
        if status == MS.kOptimal:
            st = Status.OPTIMAL
        elif status in (MS.kTimeLimit, MS.kIterationLimit, MS.kSolutionLimit, MS.kInterrupt):
            st = Status.TIME_LIMIT
        else:
            raise SolverError(f"HiGHS finished with status {h.modelStatusToString(status)}")
        if not math.isfinite(dual):
            if st is Status.OPTIMAL:
                raise SolverError("HiGHS reported optimality without a dual bound")
            dual = None
        if value is not None and dual is not None:
            # HiGHS may report a bound a hair above the incumbent at gap 0
            dual = min(dual, value)
        return _finish(st, x, value, dual, runtime, "highs", files=files)
    finally:
        if tmp is not None:
            tmp.cleanup()


def _scipy_solve(model: MilpModel, options: SolveOptions) -> SolveResult:
    t0 = time.perf_counter()
    c, A, row_lo, row_hi, lb, ub, integ = model.arrays
    opts = {"mip_rel_gap": options.relative_gap, "disp": False}
    if options.time_limit is not None:
        opts["time_limit"] = options.time_limit
    res = milp(c, constraints=LinearConstraint(A, row_lo, row_hi), integrality=integ, bounds=Bounds(lb, ub), options=opts)
    runtime = time.perf_counter() - t0
    if res.status == 2:
        return _finish(Status.INFEASIBLE, None, None, None, runtime, "scipy")
    st = Status.OPTIMAL if res.status == 0 else Status.TIME_LIMIT
    dual = getattr(res, "mip_dual_bound", None)
    if dual is None or not math.isfinite(dual):
        if st is Status.OPTIMAL:
            raise SolverError(f"scipy milp returned no dual bound: {res.message}")
        dual = None
    else:
        dual += model.objective_constant
    x = None if res.x is None else np.asarray(res.x)
    value = None if x is None else float(res.fun) + model.objective_constant
    if value is not None and dual is not None:
        dual = min(dual, value)
    return _finish(st, x, value, dual, runtime, "scipy")


BACKENDS = {
    "reference": lambda model, options: pruned_reference_solve(model),
    "highs": _highs_solve,
    "scipy": _scipy_solve,
}


def solve(model: MilpModel, options: SolveOptions | None = None) -> SolveResult:
    options = options or SolveOptions()
    name = options.resolved_backend
    if name not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[name](model, options)


def certified_bound(result: SolveResult, options: SolveOptions | None = None) -> float:
    """Proven lower bound on the model's optimal value."""
    if result.status is Status.INFEASIBLE or result.dual_bound is None:
        raise NoBound(f"no dual bound for a {result.status.value} result")
    if result.incumbent_value is not None and result.gap is not None:
        implied = result.incumbent_value - result.gap * max(abs(result.incumbent_value), _GAP_EPS)
        if result.dual_bound < implied - 1e-9:
            raise SolverError("dual bound inconsistent with the reported gap")
    return float(result.dual_bound)
