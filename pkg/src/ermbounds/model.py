"""MILP models whose optima bound the worst-case two-sample ERM ratio.

Two families are built as plain data (variables, sparse rows, objective):

* the upper-bound search program on the uniform gauge, with w evaluated at
  cell midpoints and the peak pinned by R(q_k) = 1;
* the lower-bound program on an arbitrary gauge, with w evaluated at cell
  corners and an objective that under-estimates every cell's contribution.

Bilinear and trilinear terms are linearised with Sherali-Adams product
variables on unit boxes. All indices below are 1-based, matching the
variable names R[i], w[s,t], w2[i,j], Rw[l,s,t] and Rw2[l,i,j].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy import sparse

from .bisample import TIE_TOL
from .curve import RevenueCurve, concave_hull_curve, interpolate, validate_curve
from .gauge import BadIndex, Gauge, cell_area, uniform_gauge


class BadGauge(ValueError):
    pass


class InfeasibleAssignment(ValueError):
    def __init__(self, violation: float, where: str):
        super().__init__(f"assignment violates {where} by {violation:.3e}")
        self.violation = violation
        self.where = where


class VarKind(str, enum.Enum):
    BINARY = "Binary"
    CONTINUOUS = "Continuous"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lb: float = 0.0
    ub: float = math.inf


@dataclass(frozen=True)
class Constraint:
    coefs: tuple[tuple[int, float], ...]
    sense: str  # "<=", ">=" or "="
    rhs: float
    name: str = ""


# --- linear forms over variable ids ---------------------------------------


class Lin:
    """Sparse affine expression sum(c_v * x_v) + const."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict[int, float] | None = None, const: float = 0.0):
        self.terms = dict(terms or {})
        self.const = float(const)

    @classmethod
    def var(cls, vid: int, coef: float = 1.0) -> "Lin":
        return cls({vid: coef})

    def __add__(self, other) -> "Lin":
        out = Lin(self.terms, self.const)
        if isinstance(other, Lin):
            for v, c in other.terms.items():
                out.terms[v] = out.terms.get(v, 0.0) + c
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __neg__(self) -> "Lin":
        return Lin({v: -c for v, c in self.terms.items()}, -self.const)

    def __sub__(self, other) -> "Lin":
        return self + (-other if isinstance(other, Lin) else -float(other))

    def __rsub__(self, other) -> "Lin":
        return (-self) + other

    def __mul__(self, k: float) -> "Lin":
        k = float(k)
        return Lin({v: c * k for v, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return self.const == 0.0 and not any(self.terms.values())


@dataclass(frozen=True)
class LinearForm:
    """Affine form sum_i c_i R(q_i) + const over the curve-value variables."""

    coefs: tuple[tuple[int, float], ...] = ()
    const: float = 0.0

    @classmethod
    def of(cls, coefs: dict[int, float], const: float = 0.0) -> "LinearForm":
        return cls(tuple(sorted((i, float(c)) for i, c in coefs.items() if c != 0.0)), float(const))

    def evaluate(self, r_values) -> float:
        """``r_values`` is 0-based: r_values[i - 1] = R(q_i)."""
        return self.const + sum(c * float(r_values[i - 1]) for i, c in self.coefs)

    def __add__(self, other: "LinearForm") -> "LinearForm":
        d = dict(self.coefs)
        for i, c in other.coefs:
            d[i] = d.get(i, 0.0) + c
        return LinearForm.of(d, self.const + other.const)

    def __mul__(self, k: float) -> "LinearForm":
        return LinearForm.of({i: c * k for i, c in self.coefs}, self.const * k)

    __rmul__ = __mul__

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + other * -1.0

    @property
    def is_constant(self) -> bool:
        return not self.coefs


@dataclass(frozen=True)
class ConditionalBounds:
    """Per-cell lower bounds given the cell is 1-definite, 0-definite or indefinite."""

    f1: LinearForm
    f0: LinearForm
    f_iota: LinearForm
    case: str  # "c", "d" or "e"


# --- model container ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Minimisation MILP with role-annotated variables."""

    name: str
    family: str  # "upper" or "lower"
    gauge: Gauge
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[int, float], ...]
    objective_constant: float
    roles: dict = field(repr=False)
    pinned: int | None = None  # knot fixed to R = 1 (upper family)

    def __post_init__(self):
        nvar = len(self.variables)
        for con in self.constraints:
            for v, _ in con.coefs:
                if not 0 <= v < nvar:
                    raise ValueError(f"constraint {con.name} references unknown variable {v}")
        seen = set()
        for role, vid in self.roles.items():
            if vid in seen:
                raise ValueError(f"variable {vid} carries two roles")
            seen.add(vid)
            if (self.variables[vid].kind is VarKind.BINARY) != (role[0] == "w"):
                raise ValueError(f"role {role} does not match kind of {self.variables[vid].name}")

    @property
    def n(self) -> int:
        return self.gauge.n

    @property
    def num_binaries(self) -> int:
        return sum(v.kind is VarKind.BINARY for v in self.variables)

    def var_id(self, *role) -> int:
        return self.roles[tuple(role)]

    def ids_with_role(self, tag: str) -> dict[tuple, int]:
        return {r[1:]: v for r, v in self.roles.items() if r[0] == tag}

    @cached_property
    def r_ids(self) -> list[int]:
        return [self.roles[("R", i)] for i in range(1, self.n + 2)]

    @cached_property
    def arrays(self):
        """(c, A, row_lo, row_hi, lb, ub, integrality) as numpy / scipy objects."""
        nvar = len(self.variables)
        rows, cols, vals = [], [], []
        row_lo = np.empty(len(self.constraints))
        row_hi = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for v, c in con.coefs:
                rows.append(r)
                cols.append(v)
                vals.append(c)
            row_lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
            row_hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), nvar))
        c = np.zeros(nvar)
        for v, coef in self.objective:
            c[v] += coef
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integrality = np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=int)
        for a in (c, row_lo, row_hi, lb, ub, integrality):
            a.setflags(write=False)
        return c, A, row_lo, row_hi, lb, ub, integrality

    def objective_value(self, x) -> float:
        c = self.arrays[0]
        return float(c @ np.asarray(x, dtype=float)) + self.objective_constant

    def violation(self, x) -> tuple[float, str]:
        """Largest violation of rows, bounds or integrality, with its location."""
        c, A, row_lo, row_hi, lb, ub, integ = self.arrays
        x = np.asarray(x, dtype=float)
        worst, where = 0.0, ""
        ax = A @ x
        for arr, label in (
            (row_lo - ax, "row"),
            (ax - row_hi, "row"),
            (lb - x, "lower bound"),
            (x - ub, "upper bound"),
            (np.where(integ == 1, np.abs(x - np.round(x)), 0.0), "integrality"),
        ):
            if len(arr) == 0:
                continue
            i = int(np.argmax(arr))
            if arr[i] > worst:
                worst = float(arr[i])
                name = self.constraints[i].name if label == "row" else self.variables[i].name
                where = f"{label} {name}"
        return worst, where

    def curve_values(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.r_ids]

    def with_constraints(self, extra: Iterable[Constraint], name: str | None = None) -> "MilpModel":
        """Copy of the model with additional rows."""
        return MilpModel(
            name or self.name, self.family, self.gauge, self.variables,
            self.constraints + tuple(extra), self.objective, self.objective_constant,
            dict(self.roles), self.pinned,
        )

    def without_constraints(self, prefix: str) -> "MilpModel":
        """Copy of the model dropping rows whose name starts with ``prefix``."""
        kept = tuple(c for c in self.constraints if not c.name.startswith(prefix))
        return MilpModel(
            self.name, self.family, self.gauge, self.variables, kept, self.objective,
            self.objective_constant, dict(self.roles), self.pinned,
        )


class _Builder:
    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.roles: dict[tuple, int] = {}

    def var(self, role: tuple, kind=VarKind.CONTINUOUS, lb=0.0, ub=1.0) -> int:
        if role in self.roles:
            return self.roles[role]
        tag, *idx = role
        name = f"{tag}[{','.join(str(i) for i in idx)}]"
        vid = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        self.roles[role] = vid
        return vid

    def add(self, expr: Lin, sense: str, rhs: float, name: str) -> None:
        coefs = tuple((v, c) for v, c in sorted(expr.terms.items()) if c != 0.0)
        rhs = float(rhs) - expr.const
        if not coefs:
            ok = {"<=": 0.0 <= rhs + 1e-12, ">=": 0.0 >= rhs - 1e-12, "=": abs(rhs) <= 1e-12}[sense]
            if not ok:
                raise ValueError(f"constant constraint {name} is infeasible")
            return
        self.constraints.append(Constraint(coefs, sense, rhs, name))

    def build(self, name, family, gauge, objective: Lin, pinned=None) -> MilpModel:
        obj = tuple((v, c) for v, c in sorted(objective.terms.items()) if c != 0.0)
        return MilpModel(
            name, family, gauge, tuple(self.variables), tuple(self.constraints), obj, objective.const,
            dict(self.roles), pinned,
        )


def _add_concavity(b: _Builder, gauge: Gauge, R) -> None:
    q = gauge.q
    for i in range(2, gauge.n + 1):
        expr = R(i) * (q(i + 1) - q(i - 1)) - R(i + 1) * (q(i) - q(i - 1)) - R(i - 1) * (q(i + 1) - q(i))
        b.add(expr, ">=", 0.0, f"concave[{i}]")


def _add_box_product(b: _Builder, prod: int, x: Lin, y: Lin, label: str) -> None:
    """Sherali-Adams rows for prod = x*y with x, y in [0, 1]."""
    p = Lin.var(prod)
    b.add(p - x, "<=", 0.0, f"{label}:x")
    b.add(p - y, "<=", 0.0, f"{label}:y")
    b.add(x + y - p, "<=", 1.0, f"{label}:xy")


# --- upper-bound family ----------------------------------------------------


def build_upper_model(n: int, k: int) -> MilpModel:
    """Midpoint Riemann-sum program on the uniform gauge with R(q_k) = 1."""
    if n < 1:
        raise BadIndex("n must be at least 1")
    gauge = uniform_gauge(n, k)
    q = gauge.q
    b = _Builder()
    r_ids = [b.var(("R", i)) for i in range(1, n + 2)]

    def R(i):
        return Lin.var(r_ids[i - 1])

    def Rmid(i):
        return (R(i) + R(i + 1)) * 0.5

    qbar = [None] + [0.5 * (q(i) + q(i + 1)) for i in range(1, n + 1)]
    _add_concavity(b, gauge, R)
    b.add(R(k), "=", 1.0, f"pin[{k}]")

    area = 1.0 / n**2
    objective = Lin()
    for i in range(1, n + 1):
        objective = objective + Rmid(i) * area
    for i in range(2, n + 1):
        for j in range(1, i):
            w = b.var(("w", i, j), VarKind.BINARY)
            W = Lin.var(w)
            rw_i = b.var(("Rw", i, i, j))
            rw_j = b.var(("Rw", j, i, j))
            for l, rw in ((i, rw_i), (j, rw_j)):
                _add_box_product(b, rw, Rmid(l), W, f"sa[{l},{i},{j}]")
            ci, cj = 1.0 - qbar[j], 2.0 * (1.0 - qbar[i])
            b.add(Lin.var(rw_i) * ci - Lin.var(rw_j) * cj, ">=", 0.0, f"wx[{i},{j}]")
            b.add((Rmid(i) - Lin.var(rw_i)) * ci - (Rmid(j) - Lin.var(rw_j)) * cj, "<=", 0.0, f"wy[{i},{j}]")
            objective = objective + (Lin.var(rw_i) + Rmid(j) - Lin.var(rw_j)) * (2.0 * area)
    for i in range(2, n):
        for j in range(1, i):
            b.add(Lin.var(b.roles[("w", i, j)]) - Lin.var(b.roles[("w", i + 1, j)]), "<=", 0.0, f"mono_x[{i},{j}]")
    for i in range(3, n + 1):
        for j in range(1, i - 1):
            b.add(Lin.var(b.roles[("w", i, j)]) - Lin.var(b.roles[("w", i, j + 1)]), ">=", 0.0, f"mono_y[{i},{j}]")
    return b.build(f"upper_n{n}_k{k}", "upper", gauge, objective, pinned=k)


# --- lower-bound family -----------------------------------------------------


def _check_gauge(gauge: Gauge) -> None:
    if not isinstance(gauge, Gauge):
        raise BadGauge("expected a Gauge")
    if gauge.n < 2:
        raise BadGauge("lower model needs at least two intervals")


def diag_coeffs(gauge: Gauge, i: int) -> LinearForm:
    """Lower bound on the mean of phi over the diagonal cell I(i, i)."""
    if not 1 <= i <= gauge.n:
        raise BadIndex(f"interval {i} out of range 1..{gauge.n}")
    opt = gauge.opt_index
    if i < opt:
        return LinearForm.of({i: 2 / 3, i + 1: 1 / 3})
    if i == opt:
        return LinearForm()
    return LinearForm.of({i: 1 / 3, i + 1: 2 / 3})


def minimal_curve(gauge: Gauge) -> RevenueCurve:
    """Smallest concave non-negative curve meeting both peak constraints."""
    lo, hi = gauge.optimal_interval
    pts = [(0.0, 0.0), (1.0, 0.0), (lo, lo / hi), (hi, (1.0 - hi) / (1.0 - lo))]
    return concave_hull_curve(pts)


def _expected_positive_part(u0: float, u1: float, v0: float, v1: float) -> float:
    """E[(U - V)^+] for independent U ~ Unif[u0, u1], V ~ Unif[v0, v1].

    Degenerate ranges (u0 == u1 or v0 == v1) are point masses. Uses
    min(U, V) = U - (U - V)^+ and integrates E[(U - v)^+] over v.
    """
    if u1 < u0:
        u0, u1 = u1, u0
    if v1 < v0:
        v0, v1 = v1, v0
    mu = 0.5 * (u0 + u1)
    du = u1 - u0

    def g(v):
        # E[(U - v)^+] as a function of the point v
        if v <= u0:
            return mu - v
        if v >= u1:
            return 0.0
        return (u1 - v) ** 2 / (2.0 * du)

    if v1 - v0 == 0.0:
        return g(v0)

    def G(v):
        # antiderivative of g, continuous
        if v <= u0:
            return mu * v - v * v / 2.0
        base = mu * u0 - u0 * u0 / 2.0
        if v <= u1:
            return base + ((u1 - u0) ** 3 - (u1 - v) ** 3) / (6.0 * du)
        return base + du * du / 6.0

    return (G(v1) - G(v0)) / (v1 - v0)


def expected_min_uniform(u0: float, u1: float, v0: float, v1: float) -> float:
    """E[min(U, V)] for independent U ~ Unif[u0, u1], V ~ Unif[v0, v1]."""
    return 0.5 * (u0 + u1) - _expected_positive_part(u0, u1, v0, v1)


def expected_min(curve: RevenueCurve, x0: float, x1: float, y0: float, y1: float) -> float:
    """E[min(R(x), R(y))] for x ~ Unif[x0, x1], y ~ Unif[y0, y1] independent."""
    def pieces(a, b):
        inner = [k for k in curve.knots if a < k < b]
        edges = [a, *inner, b]
        return list(zip(edges[:-1], edges[1:]))

    total = 0.0
    for xa, xb in pieces(x0, x1):
        for ya, yb in pieces(y0, y1):
            wgt = (xb - xa) * (yb - ya) / ((x1 - x0) * (y1 - y0))
            # R is affine on each piece, so R(x) and R(y) are uniform there
            ux0, ux1 = interpolate(curve, xa), interpolate(curve, xb)
            vy0, vy1 = interpolate(curve, ya), interpolate(curve, yb)
            total += wgt * expected_min_uniform(ux0, ux1, vy0, vy1)
    return total


def case_e_constant(gauge: Gauge, i: int, j: int) -> float:
    """Mean of min(R_(x), R_(y)) over I(i, j) for the minimal feasible curve R_."""
    n, opt = gauge.n, gauge.opt_index
    if not (1 <= j <= opt <= i <= n):
        raise BadIndex(f"cell ({i}, {j}) does not straddle the optimal interval {opt}")
    return expected_min(minimal_curve(gauge), gauge.q(i), gauge.q(i + 1), gauge.q(j), gauge.q(j + 1))


def offdiag_bounds(gauge: Gauge, i: int, j: int) -> ConditionalBounds:
    if not 1 <= j < i <= gauge.n:
        raise BadIndex(f"cell ({i}, {j}) is not strictly below the diagonal")
    f1 = LinearForm.of({i: 0.5, i + 1: 0.5})
    f0 = LinearForm.of({j: 0.5, j + 1: 0.5})
    opt = gauge.opt_index
    if i < opt:
        return ConditionalBounds(f1, f0, f0, "c")
    if j > opt:
        return ConditionalBounds(f1, f0, f1, "d")
    return ConditionalBounds(f1, f0, LinearForm((), case_e_constant(gauge, i, j)), "e")


def build_lower_model(gauge: Gauge, *, strengthen: bool = False) -> MilpModel:
    """Program whose optimum under-estimates the ERM revenue of every
    normalised concave curve peaking in the gauge's optimal interval.

    The per-cell objective is the four-term product form in the corner
    indicators W1 = w(q_{i+1}, q_j) and W2 = w(q_i, q_{j+1}), linearised with
    w2 = W1 W2 and its products with R.

    ``strengthen`` keeps the feasible curves and the integer optimum but
    tightens the relaxation: R gets the minimal feasible curve as a lower
    bound (with matching product rows), and W1 W2 is replaced by W2, which
    the monotonicity rows force (W2 <= W1), dropping w2 and Rw2.
    """
    _check_gauge(gauge)
    n, q, opt = gauge.n, gauge.q, gauge.opt_index
    b = _Builder()
    floor = [0.0] * (n + 2)
    if strengthen:
        low = minimal_curve(gauge)
        # concavity, R >= 0 and the two peak rows imply R >= the minimal curve;
        # the margin keeps the bound slack against rounding in those rows
        floor = [0.0] + [max(0.0, float(interpolate(low, q(i))) - 1e-12) for i in range(1, n + 2)]
    r_ids = [b.var(("R", i), lb=floor[i]) for i in range(1, n + 2)]

    def R(i):
        return Lin.var(r_ids[i - 1])

    for s in range(2, n + 2):
        for t in range(1, s):
            b.var(("w", s, t), VarKind.BINARY)

    def W(s, t):
        return Lin() if s == t else Lin.var(b.roles[("w", s, t)])

    def Rw(l, s, t):
        """Expression for R(q_l) * w(q_s, q_t)."""
        if s == t:
            return Lin()
        key = ("Rw", l, s, t)
        if key not in b.roles:
            vid = b.var(key)
            label = f"Rw[{l},{s},{t}]"
            _add_box_product(b, vid, R(l), W(s, t), label)
            if floor[l] > 0.0:
                # McCormick rows for R(q_l) >= floor[l]
                b.add(Lin.var(vid) - W(s, t) * floor[l], ">=", 0.0, f"{label}:lo")
                b.add(Lin.var(vid) - R(l) - W(s, t) * floor[l], "<=", -floor[l], f"{label}:lor")
        return Lin.var(b.roles[key])

    def times(form: LinearForm, factor: Lin, prod) -> Lin:
        """form * factor, where prod(l) linearises R(q_l) * factor."""
        out = factor * form.const
        for l, c in form.coefs:
            out = out + prod(l) * c
        return out

    _add_concavity(b, gauge, R)
    q_lo, q_hi = gauge.optimal_interval
    b.add(R(opt), ">=", q_lo / q_hi, "opt_left")
    b.add(R(opt + 1), ">=", (1.0 - q_hi) / (1.0 - q_lo), "opt_right")
    for i in range(1, opt):
        b.add(R(i + 1) - R(i), ">=", 0.0, f"rise[{i}]")
    for i in range(opt + 1, n + 1):
        b.add(R(i) - R(i + 1), ">=", 0.0, f"fall[{i}]")

    for s in range(2, n + 2):
        for t in range(1, s):
            ct, cs = 1.0 - q(t), 2.0 * (1.0 - q(s))
            b.add(Rw(s, s, t) * ct - Rw(t, s, t) * cs, ">=", 0.0, f"wx[{s},{t}]")
            b.add((R(s) - Rw(s, s, t)) * ct - (R(t) - Rw(t, s, t)) * cs, "<=", 0.0, f"wy[{s},{t}]")

    for s in range(2, n + 1):
        for t in range(1, s):
            b.add(W(s, t) - W(s + 1, t), "<=", 0.0, f"mono_x[{s},{t}]")
    for s in range(3, n + 2):
        for t in range(1, s - 1):
            b.add(W(s, t) - W(s, t + 1), ">=", 0.0, f"mono_y[{s},{t}]")

    objective = Lin()
    for i in range(1, n + 1):
        d = diag_coeffs(gauge, i)
        objective = objective + times(d, Lin(const=1.0), R) * cell_area(gauge, i, i)

    for i in range(2, n + 1):
        for j in range(1, i):
            W1, W2 = W(i + 1, j), W(i, j + 1)
            corners = [(i + 1, j)] + ([] if j + 1 == i else [(i, j + 1)])
            ells = sorted({i, i + 1, j, j + 1})
            for s, t in corners:
                for l in ells:
                    Rw(l, s, t)
            w2 = None
            if j + 1 != i and not strengthen:
                w2 = b.var(("w2", i, j))
                _add_box_product(b, w2, W1, W2, f"w2[{i},{j}]")
                for l in ells:
                    rw2 = Lin.var(b.var(("Rw2", l, i, j)))
                    a1, a2, w2l = Rw(l, i + 1, j), Rw(l, i, j + 1), Lin.var(w2)
                    tag = f"Rw2[{l},{i},{j}]"
                    b.add(rw2 - w2l, "<=", 0.0, f"{tag}:w2")
                    b.add(rw2 - a1, "<=", 0.0, f"{tag}:a1")
                    b.add(rw2 - a2, "<=", 0.0, f"{tag}:a2")
                    b.add(w2l + a1 - W1 - rw2, "<=", 0.0, f"{tag}:b1")
                    b.add(w2l + a2 - W2 - rw2, "<=", 0.0, f"{tag}:b2")
                    b.add(a1 + a2 - R(l) - rw2, "<=", 0.0, f"{tag}:r")
                    b.add(R(l) + W1 + W2 - a1 - a2 - w2l + rw2, "<=", 1.0, f"{tag}:all")

            bounds = offdiag_bounds(gauge, i, j)
            f1, f0, fi = bounds.f1, bounds.f0, bounds.f_iota
            # f1 W1 W2 + f0 (1-W1)(1-W2) + fi W1 (1-W2) + fi (1-W1) W2
            #   = f0 + (fi - f0)(W1 + W2) + (f1 + f0 - 2 fi) W1 W2
            term = times(f0, Lin(const=1.0), R)
            lin = fi - f0
            term = term + times(lin, W1, lambda l: Rw(l, i + 1, j))
            if j + 1 != i and strengthen:
                # f0 + (fi - f0) W1 + (f1 - fi) W2
                term = term + times(f1 - fi, W2, lambda l: Rw(l, i, j + 1))
            elif j + 1 != i:
                term = term + times(lin, W2, lambda l: Rw(l, i, j + 1))
                quad = f1 + f0 - fi * 2.0
                term = term + times(quad, Lin.var(w2), lambda l: Lin.var(b.roles[("Rw2", l, i, j)]))
            objective = objective + term * (2.0 * cell_area(gauge, i, j))

    label = f"lower_n{n}_N{gauge.N}_k{gauge.k}" if gauge.N else f"lower_n{n}_opt{opt}"
    if strengthen:
        label += "_s"
    return b.build(label, "lower", gauge, objective)


# --- assignments from curves --------------------------------------------------


def _w_value(curve: RevenueCurve, x: float, y: float) -> int:
    """1 when F^{-1}(x) >= 2 F^{-1}(y) (ties resolved to 1, which stays monotone)."""
    g = interpolate(curve, x) * (1.0 - y) - 2.0 * interpolate(curve, y) * (1.0 - x)
    return int(g >= -TIE_TOL)


def curve_assignment(model: MilpModel, curve: RevenueCurve) -> np.ndarray:
    """Feasible point of ``model`` induced by a curve.

    R takes the curve's values at the gauge, w the true classification at
    the model's evaluation points, and every product variable its product.
    """
    gauge = model.gauge
    x = np.zeros(len(model.variables))
    r = {i: float(interpolate(curve, gauge.q(i))) for i in range(1, gauge.n + 2)}
    if model.family == "upper":
        # the program only sees knot values, so classify its gauge interpolant
        curve = validate_curve(gauge.breakpoints, [r[i] for i in range(1, gauge.n + 2)])
    w = {}
    for role, vid in model.roles.items():
        if role[0] == "R":
            x[vid] = r[role[1]]
        elif role[0] == "w":
            s, t = role[1:]
            if model.family == "upper":
                xs = 0.5 * (gauge.q(s) + gauge.q(s + 1))
                xt = 0.5 * (gauge.q(t) + gauge.q(t + 1))
            else:
                xs, xt = gauge.q(s), gauge.q(t)
            w[(s, t)] = _w_value(curve, xs, xt)
            x[vid] = w[(s, t)]

    def wv(s, t):
        return 0 if s == t else w[(s, t)]

    for role, vid in model.roles.items():
        tag = role[0]
        if tag == "Rw":
            l, s, t = role[1:]
            rv = 0.5 * (r[l] + r[l + 1]) if model.family == "upper" else r[l]
            x[vid] = rv * wv(s, t)
        elif tag == "w2":
            i, j = role[1:]
            x[vid] = wv(i + 1, j) * wv(i, j + 1)
        elif tag == "Rw2":
            l, i, j = role[1:]
            x[vid] = r[l] * wv(i + 1, j) * wv(i, j + 1)
    return x


def extract_curve(model: MilpModel, assignment, tol: float = 1e-6) -> RevenueCurve:
    """Least concave curve through the solution's knot values."""
    worst, where = model.violation(assignment)
    if worst > tol:
        raise InfeasibleAssignment(worst, where)
    values = np.clip(model.curve_values(assignment), 0.0, None)
    return concave_hull_curve(zip(model.gauge.breakpoints, values))


def model_summary(model: MilpModel) -> dict:
    kinds: dict[str, int] = {}
    for role in model.roles:
        kinds[role[0]] = kinds.get(role[0], 0) + 1
    return {
        "name": model.name,
        "variables": len(model.variables),
        "binaries": model.num_binaries,
        "constraints": len(model.constraints),
        "roles": kinds,
    }


def iter_cells(n: int) -> Iterable[tuple[int, int]]:
    for i in range(2, n + 1):
        for j in range(1, i):
            yield i, j
