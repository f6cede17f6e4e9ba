"""Expected two-sample ERM revenue of a revenue curve.

The revenue is the integral over the unit square of the bisample revenue
function phi(x, y): with x >= y the seller posts the higher sample's price
(revenue R(x)) when F^{-1}(x) > 2 F^{-1}(y), the lower one (revenue R(y))
when F^{-1}(x) < 2 F^{-1}(y), and the worse of the two on ties.

Two independent evaluators are provided: a certified enclosure and a plain
Monte Carlo estimate over uniform quantile pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .curve import RevenueCurve, ZeroCurve, knot_prices

TIE_TOL = 1e-12
MAX_DEPTH = 40
# outward padding of every enclosure, covers floating point rounding
_ROUNDING_PAD = 1e-12
_INITIAL_STRIPS = 256
MC_BLOCK = 1 << 16


class PairClass(enum.Enum):
    HIGHER = "HigherSample"  # w = 1, price of the higher sample is posted
    LOWER = "LowerSample"  # w = 0
    TIE = "Tie"


class ToleranceUnreachable(RuntimeError):
    def __init__(self, enclosure: "Enclosure", tol: float):
        super().__init__(f"enclosure width {enclosure.width:.3e} exceeds tol {tol:.3e} at max depth")
        self.enclosure = enclosure


@dataclass(frozen=True)
class Enclosure:
    lower: float
    upper: float
    converged: bool = True
    cells: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def __contains__(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "converged": self.converged}


def _gap(curve: RevenueCurve, x, y):
    """R(x)(1-y) - 2R(y)(1-x); positive means the higher price is posted."""
    rx = np.interp(x, curve.knots, curve.values)
    ry = np.interp(y, curve.knots, curve.values)
    return rx * (1.0 - y) - 2.0 * ry * (1.0 - x), rx, ry


def classify_pair(curve: RevenueCurve, x: float, y: float) -> PairClass:
    if x < y:
        raise ValueError("classify_pair expects x >= y")
    if x == y:
        return PairClass.LOWER
    g = float(_gap(curve, x, y)[0])
    if g > TIE_TOL:
        return PairClass.HIGHER
    if g < -TIE_TOL:
        return PairClass.LOWER
    return PairClass.TIE


#: integer codes returned by :func:`classify_pairs`
LOWER_CODE, HIGHER_CODE, TIE_CODE = 0, 1, 2


def classify_pairs(curve: RevenueCurve, x, y) -> np.ndarray:
    """Vectorised :func:`classify_pair` returning LOWER/HIGHER/TIE codes; needs x >= y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < y):
        raise ValueError("classify_pairs expects x >= y")
    g = _gap(curve, x, y)[0]
    out = np.where(g > TIE_TOL, HIGHER_CODE, np.where(g < -TIE_TOL, LOWER_CODE, TIE_CODE))
    return np.where(x == y, LOWER_CODE, out).astype(np.int8)


def phi(curve: RevenueCurve, x, y):
    """Bisample revenue function, vectorised over ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    g, r_hi, r_lo = _gap(curve, hi, lo)
    out = np.where(g > TIE_TOL, r_hi, np.where(g < -TIE_TOL, r_lo, np.minimum(r_hi, r_lo)))
    out = np.where(hi == lo, r_lo, out)
    return float(out) if out.ndim == 0 else out


# --- certified enclosure -------------------------------------------------


class _CurveTables:
    """Precomputed per-knot data used by the vectorised strip evaluator."""

    def __init__(self, curve: RevenueCurve):
        self.k = curve.knots
        self.v = curve.values
        self.s = curve.slopes
        self.prices = np.maximum.accumulate(knot_prices(curve))
        seg = np.diff(self.k) * (self.v[:-1] + self.v[1:]) / 2.0
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.peak = curve.peak

    def value(self, q):
        return np.interp(q, self.k, self.v)

    def integral_to(self, t):
        """Integral of R over [0, t]."""
        i = np.clip(np.searchsorted(self.k, t, side="right") - 1, 0, len(self.k) - 2)
        d = t - self.k[i]
        return self.cum[i] + d * (self.v[i] + 0.5 * self.s[i] * d)

    def range_max(self, a, b):
        # a concave function is unimodal: clamp the peak into [a, b]
        return self.value(np.clip(self.peak, a, b))

    def threshold(self, y):
        """Smallest x >= y with F^{-1}(x) >= 2 F^{-1}(y); 1 if there is none.

        For concave R the class of (x, y) is LOWER below this point and
        HIGHER above it, up to a null set of ties.
        """
        y = np.asarray(y, dtype=float)
        out = np.ones_like(y)
        inner = y < 1.0
        yi = y[inner]
        t = 2.0 * self.value(yi) / (1.0 - yi)
        idx = np.searchsorted(self.prices, t, side="right")
        found = idx < len(self.k)
        a = np.clip(idx - 1, 0, len(self.k) - 2)
        sa, ra, ka = self.s[a], self.v[a], self.k[a]
        denom = sa + t
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.where(denom > 0, (t - ra + sa * ka) / denom, ka)
        root = np.clip(root, ka, self.k[a + 1])
        root = np.where(idx == 0, 0.0, root)
        x = np.where(found, root, 1.0)
        out[inner] = np.maximum(x, yi)
        return out


def _strip_bounds(tab: _CurveTables, a: np.ndarray, b: np.ndarray):
    """Lower/upper bounds on the integral of phi over {a<=y<=b, y<=x<=1}.

    Each strip lies inside one knot interval, so R is affine in y on it.
    """
    h = b - a
    ra, rb = tab.value(a), tab.value(b)
    xa = tab.threshold(a)
    xb = np.maximum(tab.threshold(b), xa)
    int_y = h * (ra + rb) / 2.0

    left = np.clip(xa, b, 1.0)
    right = np.clip(xb, b, 1.0)
    total_x = tab.integral_to(np.ones_like(b))
    exact = (left - b) * int_y + h * (total_x - tab.integral_to(right))

    area = (right - left) * h
    ry_lo, ry_hi = np.minimum(ra, rb), np.maximum(ra, rb)
    rx_lo = np.minimum(tab.value(left), tab.value(right))
    rx_hi = tab.range_max(left, right)
    lo = exact + area * np.minimum(rx_lo, ry_lo)
    hi = exact + area * np.maximum(rx_hi, ry_hi)

    # triangle y <= x <= b: LOWER throughout when the threshold clears b
    slope = (rb - ra) / np.where(h > 0, h, 1.0)
    tri_exact = ra * h * h / 2.0 + slope * h**3 / 6.0
    definite = xa >= b
    tri_area = h * h / 2.0
    lo = lo + np.where(definite, tri_exact, tri_area * ry_lo)
    hi = hi + np.where(definite, tri_exact, tri_area * ry_hi)
    return lo, hi


def _initial_strips(curve: RevenueCurve) -> tuple[np.ndarray, np.ndarray]:
    starts, ends = [], []
    for k0, k1 in zip(curve.knots[:-1], curve.knots[1:]):
        m = max(1, math.ceil((k1 - k0) * _INITIAL_STRIPS))
        edges = k0 + (k1 - k0) * np.arange(m + 1) / m
        edges[-1] = k1
        starts.append(edges[:-1])
        ends.append(edges[1:])
    return np.concatenate(starts), np.concatenate(ends)


def erm_revenue_enclosure(
    curve: RevenueCurve, tol: float = 1e-6, *, max_depth: int = MAX_DEPTH, strict: bool = False
) -> Enclosure:
    """Certified bracket [lower, upper] of the expected ERM revenue.

    The half square x >= y is cut into horizontal strips. On a strip
    [a, b] the classification threshold x*(y) is monotone, so everything
    left of x*(a) is LOWER and everything right of x*(b) is HIGHER; both
    parts integrate exactly. Only the rectangle between x*(a) and x*(b)
    (and the small diagonal triangle) is bracketed by the range of R.
    Strips are bisected until the total width is at most ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    tab = _CurveTables(curve)
    a, b = _initial_strips(curve)
    depth = np.zeros(len(a), dtype=int)
    lo, hi = _strip_bounds(tab, a, b)
    budget = tol - 4 * _ROUNDING_PAD
    while True:
        width = 2.0 * (hi - lo)
        if width.sum() <= budget:
            converged = True
            break
        split = (width > budget * (b - a)) & (depth < max_depth)
        if not split.any():
            converged = False
            break
        keep = ~split
        mid = 0.5 * (a[split] + b[split])
        na = np.concatenate([a[split], mid])
        nb = np.concatenate([mid, b[split]])
        nlo, nhi = _strip_bounds(tab, na, nb)
        nd = np.concatenate([depth[split], depth[split]]) + 1
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        depth = np.concatenate([depth[keep], nd])
    pad = _ROUNDING_PAD * max(1.0, curve.max_value)
    lower = max(0.0, 2.0 * math.fsum(lo) - pad)
    upper = min(curve.max_value, 2.0 * math.fsum(hi) + pad)
    enc = Enclosure(lower, max(upper, lower), converged, len(a))
    if strict and not converged:
        raise ToleranceUnreachable(enc, tol)
    return enc


def ratio(curve: RevenueCurve, tol: float = 1e-6, **kwargs) -> Enclosure:
    """Enclosure of (ERM revenue) / (optimal revenue); optimal revenue is max R."""
    peak = curve.max_value
    if peak <= 0:
        raise ZeroCurve("ratio is undefined for the zero curve")
    enc = erm_revenue_enclosure(curve, tol * peak, **kwargs)
    return Enclosure(enc.lower / peak, enc.upper / peak, enc.converged, enc.cells)


# --- Monte Carlo oracle --------------------------------------------------


def sample_quantile_pairs(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform quantile pairs for sample indices start .. start+count-1.

    Pair i is a pure function of (seed, i): block i // MC_BLOCK uses a Philox
    stream keyed by ``seed`` whose counter is offset by the block index.
    """
    out = np.empty((count, 2))
    pos = 0
    idx = start
    while pos < count:
        block, offset = divmod(idx, MC_BLOCK)
        take = min(MC_BLOCK - offset, count - pos)
        gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, block]))
        draws = gen.random((offset + take, 2))
        out[pos : pos + take] = draws[offset:]
        pos += take
        idx += take
    return out


def erm_revenue_mc(curve: RevenueCurve, n_samples: int, seed: int) -> tuple[float, float]:
    """Unbiased estimate of the ERM revenue and its standard error."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    count_seen = 0
    mean = 0.0
    m2 = 0.0
    for start in range(0, n_samples, MC_BLOCK):
        count = min(MC_BLOCK, n_samples - start)
        xy = sample_quantile_pairs(seed, start, count)
        vals = phi(curve, xy[:, 0], xy[:, 1])
        # pairwise merge of block statistics (Chan et al.)
        b_mean = float(np.mean(vals))
        b_m2 = float(np.sum((vals - b_mean) ** 2))
        merged = count_seen + count
        delta = b_mean - mean
        mean += delta * count / merged
        m2 += b_m2 + delta * delta * count_seen * count / merged
        count_seen = merged
    if n_samples == 1:
        return mean, math.inf
    return mean, math.sqrt(m2 / (n_samples - 1) / n_samples)
