"""Grid search for the least ERM revenue among three-piece revenue curves.

A candidate is the least concave curve whose hypograph contains
(0, 0), (q_opt, 1), (q2, r2) and (1, r3). Its value is the upper end of a
certified enclosure, so every reported minimum is an achievable upper bound
on the worst-case ratio.

The search evaluates every grid point at a loose tolerance and tightens it
level by level, discarding a point once its certified lower end exceeds the
best certified upper end seen so far. A discarded point can never be the
minimiser at the final tolerance, so the result equals a plain fine-tolerance
search.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bisample import Enclosure, erm_revenue_enclosure
from .curve import DegenerateInputWarning, RevenueCurve, concave_hull_curve

TOL_LEVELS = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True, order=True)
class ThreePieceParams:
    q_opt: float
    q2: float
    r2: float
    r3: float

    def __post_init__(self):
        for name in ("q_opt", "q2", "r2", "r3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"q_opt": self.q_opt, "q2": self.q2, "r2": self.r2, "r3": self.r3}


def three_piece_curve(params: ThreePieceParams) -> RevenueCurve:
    if params.q_opt == 0.0:
        warnings.warn("q_opt = 0 puts (0, 0) and (0, 1) on the same quantile; the hull keeps (0, 1)",
                      DegenerateInputWarning, stacklevel=2)
    pts = [(0.0, 0.0), (params.q_opt, 1.0), (params.q2, params.r2), (1.0, params.r3)]
    return concave_hull_curve(pts)


@dataclass(frozen=True)
class GridSpec:
    q2: tuple[float, ...]
    r2: tuple[float, ...]
    r3: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.q2) * len(self.r2) * len(self.r3)

    def points(self):
        return itertools.product(self.q2, self.r2, self.r3)


def default_grid() -> GridSpec:
    """q2 = k/80 (71..80), r2 = k/1000 (0..300), r3 = k/1000 (0..18)."""
    return GridSpec(
        tuple(k / 80 for k in range(71, 81)),
        tuple(k / 1000 for k in range(0, 301)),
        tuple(k / 1000 for k in range(0, 19)),
    )


def full_cube_grid(steps: int = 40) -> GridSpec:
    axis = tuple(k / steps for k in range(steps + 1))
    return GridSpec(axis, axis, axis)


@dataclass(frozen=True)
class GridResult:
    min_value: float
    params: ThreePieceParams
    enclosure: Enclosure
    curve: RevenueCurve
    grid_points: int
    distinct_curves: int
    evaluations: dict = field(default_factory=dict)
    polished: bool = False

    def to_dict(self) -> dict:
        out = {
            "min_value": self.min_value,
            "params": self.params.to_dict(),
            "enclosure": self.enclosure.to_dict(),
            "curve": self.curve.to_dict(),
            "grid_points": self.grid_points,
            "distinct_curves": self.distinct_curves,
        }
        if self.polished:
            out["note"] = "polished by local descent; non-certifying search step"
        return out


def _enclose_many(curves: list[RevenueCurve], tol: float, workers: int) -> list[Enclosure]:
    if workers <= 1 or len(curves) < 64:
        return [erm_revenue_enclosure(c, tol) for c in curves]
    chunk = max(1, len(curves) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(erm_revenue_enclosure, curves, itertools.repeat(tol), chunksize=chunk))


def eta_grid(q_opt: float, grid: GridSpec | None = None, tol: float = 1e-6, *, workers: int = 1) -> GridResult:
    """Minimum over the grid of the certified upper ERM revenue of three-piece curves."""
    grid = grid or default_grid()
    if grid.size == 0:
        raise ValueError("empty grid")
    # distinct hulls, each with its lexicographically first parameter triple
    first: dict[RevenueCurve, ThreePieceParams] = {}
    for q2, r2, r3 in grid.points():
        p = ThreePieceParams(q_opt, q2, r2, r3)
        c = three_piece_curve(p)
        if c not in first or p < first[c]:
            first[c] = p
    curves = list(first)
    levels = [t for t in TOL_LEVELS if t > tol] + [tol]
    alive = curves
    encl: dict[RevenueCurve, Enclosure] = {}
    counts = {}
    for level in levels:
        results = _enclose_many(alive, level, workers)
        counts[level] = len(alive)
        for c, e in zip(alive, results):
            encl[c] = e
        best_upper = min(encl[c].upper for c in alive)
        alive = [c for c in alive if encl[c].lower <= best_upper]
    best = min(alive, key=lambda c: (encl[c].upper, first[c]))
    e = encl[best]
    return GridResult(e.upper, first[best], e, best, grid.size, len(curves), counts)


def polish(result: GridResult, tol: float = 1e-6, *, step: float = 0.01, min_step: float = 1e-4,
           max_rounds: int = 200) -> GridResult:
    """Coordinate descent on (q2, r2, r3) from a grid optimum.

    Non-certifying as a search: it offers no guarantee of finding the
    minimum, though each value it reports is still the certified upper end
    of a real curve's enclosure.
    """
    p = result.params
    cur = np.array([p.q2, p.r2, p.r3])
    best_val, best_enc = result.min_value, result.enclosure
    best_curve = result.curve
    rounds = 0
    while step >= min_step and rounds < max_rounds:
        improved = False
        for axis in range(3):
            for sign in (-1.0, 1.0):
                trial = cur.copy()
                trial[axis] = float(np.clip(trial[axis] + sign * step, 0.0, 1.0))
                cand = ThreePieceParams(p.q_opt, *map(float, trial))
                c = three_piece_curve(cand)
                e = erm_revenue_enclosure(c, tol)
                rounds += 1
                if e.upper < best_val - 1e-12:
                    cur, best_val, best_enc, best_curve = trial, e.upper, e, c
                    improved = True
        if not improved:
            step /= 2.0
    params = ThreePieceParams(p.q_opt, *map(float, cur))
    return GridResult(best_val, params, best_enc, best_curve, result.grid_points, result.distinct_curves,
                      result.evaluations, polished=True)


def eta_series(q_opts, grid: GridSpec | None = None, tol: float = 1e-6, *, workers: int = 1) -> list[GridResult]:
    return [eta_grid(q, grid, tol, workers=workers) for q in q_opts]


def series_csv(results: list[GridResult]) -> str:
    lines = ["q_opt,min_value,q2,r2,r3"]
    for r in results:
        p = r.params
        lines.append(",".join(repr(float(v)) for v in (p.q_opt, r.min_value, p.q2, p.r2, p.r3)))
    return "\n".join(lines) + "\n"
