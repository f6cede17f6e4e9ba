"""Quick in-package property checks, run by ``ermbounds selftest``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bisample import PairClass, classify_pair, erm_revenue_enclosure, erm_revenue_mc
from .curve import concave_hull_curve, validate_curve
from .gauge import lower_gauge
from .model import build_lower_model, build_upper_model, curve_assignment
from .solve import BackendUnavailable, SolveOptions, pruned_reference_solve, reference_solve, solve


@dataclass
class Check:
    name: str
    ok: bool
    detail: str
    seconds: float


def random_hull_curve(rng: np.random.Generator, points: int = 6) -> "RevenueCurve":  # noqa: F821
    xs = np.concatenate([[0.0, 1.0], rng.random(points)])
    ys = rng.random(len(xs))
    ys[rng.integers(len(xs))] = 1.0
    return concave_hull_curve(zip(xs, ys))


def _curve_invariants(rng) -> str:
    for _ in range(200):
        c = random_hull_curve(rng)
        validate_curve(c.knots, c.values)
        again = concave_hull_curve(zip(c.knots, c.values))
        if again != c:
            raise AssertionError("hull is not idempotent")
    return "200 random hulls valid and idempotent"


def _w_monotone(rng) -> str:
    bad = 0
    for _ in range(100):
        c = random_hull_curve(rng)
        for _ in range(100):
            # HIGHER stays HIGHER as x grows, and as y shrinks
            y, x1, x2 = np.sort(rng.random(3))
            bad += classify_pair(c, x1, y) is PairClass.HIGHER and classify_pair(c, x2, y) is PairClass.LOWER
            y1, y2, x = np.sort(rng.random(3))
            bad += classify_pair(c, x, y2) is PairClass.HIGHER and classify_pair(c, x, y1) is PairClass.LOWER
    if bad:
        raise AssertionError(f"{bad} monotonicity violations")
    return "10^4 triples, no violations"


def _linearization(rng) -> str:
    for n in (3, 4, 5):
        for k in range(1, n + 2):
            m = build_upper_model(n, k)
            for _ in range(5):
                c = random_hull_curve(rng)
                c = c.scaled(1.0 / float(c(m.gauge.q(k)))) if c(m.gauge.q(k)) > 0 else c
                x = curve_assignment(m, c)
                r = m.curve_values(x)
                mid = 0.5 * (r[:-1] + r[1:])
                bilinear = mid.sum() / n**2
                for role, vid in m.ids_with_role("w").items():
                    i, j = role
                    w = x[vid]
                    bilinear += 2.0 / n**2 * (w * mid[i - 1] + (1 - w) * mid[j - 1])
                if abs(m.objective_value(x) - bilinear) > 1e-12:
                    raise AssertionError(f"linearised objective differs at n={n}, k={k}")
    return "upper models n=3..5 agree with the bilinear objective"


def _reference_vs_backend(rng) -> str:
    opts = SolveOptions(relative_gap=0.0)
    for model in [build_upper_model(4, k) for k in range(1, 6)] + [build_lower_model(lower_gauge(4, 10, k)) for k in (1, 5, 10)]:
        ref = reference_solve(model).incumbent_value
        pruned = pruned_reference_solve(model).incumbent_value
        try:
            ext = solve(model, opts).dual_bound
        except BackendUnavailable:
            ext = pruned
        if max(abs(ref - pruned), abs(ref - ext)) > 1e-6:
            raise AssertionError(f"{model.name}: reference {ref}, pruned {pruned}, backend {ext}")
    return "8 models agree to 1e-6"


def _enclosure_vs_mc(rng) -> str:
    c = random_hull_curve(rng)
    e = erm_revenue_enclosure(c, 1e-6)
    mean, se = erm_revenue_mc(c, 200_000, seed=7)
    if not e.lower - 5 * se <= mean <= e.upper + 5 * se:
        raise AssertionError(f"MC {mean} +- {se} outside {e}")
    return f"MC within {abs(mean - e.mid) / se:.1f} stderr"


CHECKS = [
    ("curve invariants", _curve_invariants),
    ("w monotonicity", _w_monotone),
    ("linearization exactness", _linearization),
    ("reference vs backend", _reference_vs_backend),
    ("enclosure vs Monte Carlo", _enclosure_vs_mc),
]


def run_selftest(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail, ok = fn(rng), True
        except Exception as exc:
            detail, ok = f"{type(exc).__name__}: {exc}", False
        out.append(Check(name, ok, detail, time.perf_counter() - t0))
    return out
