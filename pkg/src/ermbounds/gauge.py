"""Interval partitions ("gauges") of [0, 1] with a designated optimal interval."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class BadIndex(ValueError):
    pass


class Weighting(str, enum.Enum):
    UNIFORM = "Uniform"
    APPROX_UNIFORM = "ApproxUniform"
    SQUARE_WEIGHTED = "SquareWeighted"

    @classmethod
    def parse(cls, value) -> "Weighting":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown weighting {value!r}")


@dataclass(frozen=True)
class Gauge:
    """Breakpoints q_1 = 0 < ... < q_{n+1} = 1 (stored 0-based).

    ``opt_index`` is 1-based like the interval labels I(1), ..., I(n): the
    optimal interval is [breakpoints[opt_index - 1], breakpoints[opt_index]].
    """

    breakpoints: tuple[float, ...]
    opt_index: int
    weighting: Weighting = Weighting.UNIFORM
    N: int | None = None
    k: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        q = self.breakpoints
        if len(q) < 2 or q[0] != 0.0 or q[-1] != 1.0:
            raise BadIndex("gauge must start at 0 and end at 1")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise BadIndex("gauge breakpoints must be strictly increasing")
        if not 1 <= self.opt_index <= len(q) - 1:
            raise BadIndex(f"opt_index {self.opt_index} out of range 1..{len(q) - 1}")

    @property
    def n(self) -> int:
        return len(self.breakpoints) - 1

    def q(self, i: int) -> float:
        """Breakpoint q_i, 1-based."""
        return self.breakpoints[i - 1]

    @property
    def optimal_interval(self) -> tuple[float, float]:
        return self.q(self.opt_index), self.q(self.opt_index + 1)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.breakpoints)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "k": self.k,
            "weighting": self.weighting.value,
            "opt_index": self.opt_index,
            "breakpoints": list(self.breakpoints),
            **self.meta,
        }


def _split(lo: Fraction, hi: Fraction, parts: int) -> list[Fraction]:
    return [lo + (hi - lo) * Fraction(i, parts) for i in range(parts + 1)]


def _to_floats(points: list[Fraction]) -> tuple[float, ...]:
    return tuple(float(p) for p in points)


def uniform_gauge(n: int, k: int | None = None) -> Gauge:
    """Breakpoints (i - 1)/n; ``k`` is the knot pinned to R = 1 (1..n+1)."""
    if n < 1:
        raise BadIndex("n must be at least 1")
    if k is None:
        k = 1
    if not 1 <= k <= n + 1:
        raise BadIndex(f"k={k} out of range 1..{n + 1}")
    q = _split(Fraction(0), Fraction(1), n)
    return Gauge(_to_floats(q), min(k, n), Weighting.UNIFORM, None, k)


def split_count(n: int, N: int, k: int, weighting: Weighting) -> int:
    """Number m of intervals left of the optimal one, for 1 < k < N.

    m minimises |(k-1)/(N mu^p) - (N-k)/(N (n-mu-1)^p)| over 1 < mu < n-1,
    with p = 2 for the square-weighted rule when k < N/2 and p = 1
    otherwise. Ties go to the smaller mu. When the open range is empty
    (n <= 3) the only admissible split mu = 1 is used.
    """
    weighting = Weighting.parse(weighting)
    power = 2 if (weighting is Weighting.SQUARE_WEIGHTED and 2 * k < N) else 1
    candidates = range(2, n - 1)
    if not candidates:
        if n < 3:
            raise BadIndex(f"n={n} leaves no room on both sides of an interior optimal interval")
        return 1
    left, right = Fraction(k - 1, N), Fraction(N - k, N)
    best, best_mu = None, None
    for mu in candidates:
        score = abs(left / mu**power - right / (n - mu - 1) ** power)
        if best is None or score < best:
            best, best_mu = score, mu
    return best_mu


def lower_gauge(n: int, N: int, k: int, weighting=Weighting.APPROX_UNIFORM) -> Gauge:
    """Gauge whose optimal interval is exactly [(k-1)/N, k/N]."""
    weighting = Weighting.parse(weighting)
    if n < 2:
        raise BadIndex("n must be at least 2")
    if N < 1 or not 1 <= k <= N:
        raise BadIndex(f"k={k} out of range 1..{N}")
    lo, hi = Fraction(k - 1, N), Fraction(k, N)
    if N == 1:
        raise BadIndex("N=1 makes the optimal interval the whole of [0, 1]")
    meta = {}
    if k == 1:
        q = [Fraction(0)] + _split(hi, Fraction(1), n - 1)
        opt = 1
    elif k == N:
        q = _split(Fraction(0), lo, n - 1) + [Fraction(1)]
        opt = n
    else:
        m = split_count(n, N, k, weighting)
        meta["m"] = m
        meta["tie_rule"] = "smaller-mu"
        q = _split(Fraction(0), lo, m) + _split(hi, Fraction(1), n - m - 1)
        opt = m + 1
    return Gauge(_to_floats(q), opt, weighting, N, k, meta)


def cell_area(gauge: Gauge, i: int, j: int) -> float:
    """Area (q_{i+1} - q_i)(q_{j+1} - q_j) of I(i, j)."""
    n = gauge.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise BadIndex(f"cell ({i}, {j}) out of range for n={n}")
    return (gauge.q(i + 1) - gauge.q(i)) * (gauge.q(j + 1) - gauge.q(j))
