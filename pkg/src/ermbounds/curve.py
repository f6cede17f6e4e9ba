"""Piecewise-linear concave revenue curves on the quantile interval [0, 1]."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

#: Absolute tolerance used by every curve predicate (concavity, collinearity).
CURVE_TOL = 1e-12


class CurveError(ValueError):
    pass


class BadKnots(CurveError):
    pass


class NegativeValue(CurveError):
    def __init__(self, index: int, value: float):
        super().__init__(f"negative value {value!r} at knot {index}")
        self.index = index


class ConcavityViolation(CurveError):
    def __init__(self, index: int, slack: float):
        super().__init__(f"concavity violated at knot {index} (slack {slack:.3e})")
        self.index = index
        self.slack = slack


class ZeroCurve(CurveError):
    pass


class DegenerateInputWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class RevenueCurve:
    """Concave, non-negative, piecewise-linear revenue curve.

    Instances are only produced by :func:`validate_curve` (or helpers that
    call it) and hold read-only arrays, so they can be shared freely.
    """

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, q):
        return interpolate(self, q)

    def __len__(self) -> int:
        return len(self.knots)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RevenueCurve):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.knots.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        return f"RevenueCurve(knots={self.knots.tolist()}, values={self.values.tolist()})"

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def peak(self) -> float:
        """Smallest quantile at which the maximum is attained."""
        return float(self.knots[int(np.argmax(self.values))])

    def scaled(self, factor: float) -> "RevenueCurve":
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return validate_curve(self.knots, self.values * factor)

    def to_dict(self) -> dict:
        return {"knots": [float(k) for k in self.knots], "values": [float(v) for v in self.values]}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def concavity_slack(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Cross-product slack of each interior knot; negative means a convex kink."""
    k, v = knots, values
    left = k[1:-1] - k[:-2]
    right = k[2:] - k[1:-1]
    return v[1:-1] * (left + right) - v[2:] * left - v[:-2] * right


def validate_curve(knots: Sequence[float], values: Sequence[float]) -> RevenueCurve:
    k = np.asarray(knots, dtype=float)
    v = np.asarray(values, dtype=float)
    if k.ndim != 1 or v.ndim != 1 or len(k) != len(v):
        raise BadKnots("knots and values must be 1-d sequences of equal length")
    if len(k) < 2:
        raise BadKnots("a curve needs at least two knots")
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
        raise BadKnots("knots and values must be finite")
    if k[0] != 0.0 or k[-1] != 1.0:
        raise BadKnots("first knot must be 0 and last knot must be 1")
    if np.any(np.diff(k) <= 0):
        raise BadKnots("knots must be strictly increasing")
    neg = np.flatnonzero(v < 0)
    if len(neg):
        raise NegativeValue(int(neg[0]), float(v[neg[0]]))
    slack = concavity_slack(k, v)
    bad = np.flatnonzero(slack < -CURVE_TOL)
    if len(bad):
        raise ConcavityViolation(int(bad[0]) + 1, float(slack[bad[0]]))
    return RevenueCurve(_frozen(k), _frozen(v))


def zero_curve() -> RevenueCurve:
    return validate_curve([0.0, 1.0], [0.0, 0.0])


def interpolate(curve: RevenueCurve, q):
    """Linear interpolation of the curve at quantile(s) ``q``."""
    out = np.interp(q, curve.knots, curve.values)
    return float(out) if np.ndim(out) == 0 else out


def _final_price(curve: RevenueCurve) -> float:
    # limit of R(q)/(1-q) as q -> 1 along the last linear piece
    if curve.values[-1] > 0:
        return math.inf
    return float(curve.values[-2] / (1.0 - curve.knots[-2]))


def price_inverse(curve: RevenueCurve, q):
    """Price F^{-1}(q) = R(q) / (1 - q), with the left limit at q = 1."""
    q_arr = np.asarray(q, dtype=float)
    r = np.interp(q_arr, curve.knots, curve.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(q_arr < 1.0, r / np.where(q_arr < 1.0, 1.0 - q_arr, 1.0), _final_price(curve))
    return float(p) if p.ndim == 0 else p


def knot_prices(curve: RevenueCurve) -> np.ndarray:
    """Price inverse at every knot (last entry is the q -> 1 limit)."""
    p = np.empty(len(curve.knots))
    p[:-1] = curve.values[:-1] / (1.0 - curve.knots[:-1])
    p[-1] = _final_price(curve)
    return p


def concave_hull_curve(points: Iterable[tuple[float, float]]) -> RevenueCurve:
    """Least concave majorant of a finite point set, as a curve.

    Points sharing a quantile keep only their largest value; points on a
    chord of the hull are dropped, so every knot is an extreme point.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise BadKnots("no points given")
    if np.any(~np.isfinite(pts)):
        raise BadKnots("points must be finite")
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > 1):
        raise BadKnots("quantiles must lie in [0, 1]")
    if np.any(pts[:, 1] < 0):
        bad = int(np.flatnonzero(pts[:, 1] < 0)[0])
        raise NegativeValue(bad, float(pts[bad, 1]))
    xs = np.unique(pts[:, 0])
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise BadKnots("point set must include quantiles 0 and 1")
    ys = np.full(len(xs), -np.inf)
    np.maximum.at(ys, np.searchsorted(xs, pts[:, 0]), pts[:, 1])
    if not np.any(ys > 0):
        warnings.warn("all points have value zero; returning the zero curve", DegenerateInputWarning, stacklevel=2)
        return zero_curve()

    hull: list[int] = []
    for idx in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it is on or below the chord from a to idx; the
            # vertical distance does not shrink with the knot spacing
            t = (xs[b] - xs[a]) / (xs[idx] - xs[a])
            chord = ys[a] + t * (ys[idx] - ys[a])
            if ys[b] <= chord + CURVE_TOL:
                hull.pop()
            else:
                break
        hull.append(idx)
    return validate_curve(xs[hull], ys[hull])


def piecewise_approximation(sampler: Callable[[float], float], n: int) -> RevenueCurve:
    """Interpolant of ``sampler`` on the uniform knots k/n."""
    if n < 1:
        raise ValueError("n must be positive")
    knots = np.arange(n + 1) / n
    values = np.array([float(sampler(float(q))) for q in knots])
    return validate_curve(knots, values)


def strictify(curve: RevenueCurve, eps: float) -> Callable:
    """Strictly concave perturbation q -> R(q) + eps * q * (1 - q)."""
    if not eps > 0:
        raise ValueError("eps must be positive")

    def sampler(q):
        q = np.asarray(q, dtype=float)
        out = np.interp(q, curve.knots, curve.values) + eps * q * (1.0 - q)
        return float(out) if out.ndim == 0 else out

    return sampler


def renormalize(curve: RevenueCurve) -> tuple[RevenueCurve, float]:
    scale = curve.max_value
    if scale <= 0:
        raise ZeroCurve("cannot renormalize the zero curve")
    if scale == 1.0:
        return curve, 1.0
    return validate_curve(curve.knots, curve.values / scale), scale


def curve_from_dict(data: dict) -> RevenueCurve:
    try:
        knots, values = data["knots"], data["values"]
    except (KeyError, TypeError) as exc:
        raise BadKnots("curve JSON needs 'knots' and 'values'") from exc
    return validate_curve([float(k) for k in knots], [float(v) for v in values])


def _reject_constant(token: str):
    raise BadKnots(f"non-finite number {token!r} in curve file")


def load_curve(path) -> RevenueCurve:
    text = Path(path).read_text()
    return curve_from_dict(json.loads(text, parse_constant=_reject_constant))


def dump_curve(curve: RevenueCurve, path) -> None:
    Path(path).write_text(json.dumps(curve.to_dict()) + "\n")
