import warnings

import numpy as np
import pytest

from ermbounds.bisample import erm_revenue_enclosure, erm_revenue_mc
from ermbounds.curve import DegenerateInputWarning, interpolate
from ermbounds.gridsearch import (
    GridSpec, ThreePieceParams, default_grid, eta_grid, eta_series, full_cube_grid, polish, series_csv,
    three_piece_curve,
)

SMALL = GridSpec((0.9, 0.95, 1.0), (0.0, 0.05, 0.1, 0.2, 0.3), (0.0, 0.01, 0.02))
# neighbourhood of the default-grid minimiser at q_opt = .55
NEAR_55 = GridSpec((0.9625, 0.975, 0.9875), tuple(k / 1000 for k in range(130, 137)),
                   tuple(k / 1000 for k in range(6, 11)))


def brute_force(q_opt, grid, tol):
    best = None
    for q2, r2, r3 in grid.points():
        p = ThreePieceParams(q_opt, q2, r2, r3)
        v = erm_revenue_enclosure(three_piece_curve(p), tol).upper
        if best is None or v < best[0]:
            best = (v, p)
    return best


class TestThreePiece:
    def test_figure_shape(self):
        c = three_piece_curve(ThreePieceParams(0.55, 0.975, 0.136, 0.0006))
        np.testing.assert_allclose(c.knots, [0, 0.55, 0.975, 1])
        assert c.max_value == 1.0 and c.peak == 0.55

    def test_hidden_point_drops(self):
        # (q2, r2) under the chord from the peak to (1, r3) is not a knot
        c = three_piece_curve(ThreePieceParams(0.5, 0.75, 0.1, 0.5))
        np.testing.assert_allclose(c.knots, [0, 0.5, 1])

    def test_q_opt_zero_warns(self):
        with pytest.warns(DegenerateInputWarning):
            c = three_piece_curve(ThreePieceParams(0.0, 0.5, 0.2, 0.0))
        assert interpolate(c, 0.0) == 1.0

    def test_no_warning_otherwise(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            three_piece_curve(ThreePieceParams(0.3, 0.5, 0.2, 0.0))

    def test_params_validated(self):
        with pytest.raises(ValueError):
            ThreePieceParams(0.5, 1.2, 0.1, 0.0)


class TestGrids:
    def test_default_box(self):
        g = default_grid()
        assert g.size == 10 * 301 * 19
        assert g.q2[0] == 71 / 80 and g.q2[-1] == 1.0 and g.r2[-1] == 0.3 and g.r3[-1] == 0.018

    def test_full_cube(self):
        assert full_cube_grid(4).size == 125

    def test_empty(self):
        with pytest.raises(ValueError):
            eta_grid(0.5, GridSpec((), (0.1,), (0.1,)))


class TestEtaGrid:
    @pytest.mark.parametrize("q_opt", [0.3, 0.55, 1.0])
    def test_pruning_matches_brute_force(self, q_opt):
        res = eta_grid(q_opt, SMALL, tol=1e-5)
        val, params = brute_force(q_opt, SMALL, 1e-5)
        assert res.min_value == val
        assert erm_revenue_enclosure(res.curve, 1e-5).upper == val
        assert three_piece_curve(res.params) == three_piece_curve(params)
        assert res.grid_points == SMALL.size and res.distinct_curves <= SMALL.size

    def test_superset_never_increases(self):
        sub = GridSpec(SMALL.q2[:2], SMALL.r2[:3], SMALL.r3)
        assert eta_grid(0.55, SMALL, tol=1e-5).min_value <= eta_grid(0.55, sub, tol=1e-5).min_value

    def test_levels_shrink(self):
        res = eta_grid(0.55, SMALL, tol=1e-6)
        counts = list(res.evaluations.values())
        assert counts[0] == res.distinct_curves
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_near_figure_optimum(self):
        res = eta_grid(0.55, NEAR_55)
        assert res.params == ThreePieceParams(0.55, 0.975, 0.133, 0.008)
        assert res.min_value == pytest.approx(0.6103160165316973, abs=1e-9)

    def test_optimum_curve_by_sampling(self):
        c = three_piece_curve(ThreePieceParams(0.55, 0.975, 0.133, 0.008))
        e = erm_revenue_enclosure(c, 1e-6)
        mean, se = erm_revenue_mc(c, 2_000_000, seed=2024)
        assert e.lower - 4 * se <= mean <= e.upper + 4 * se

    def test_workers(self):
        grid = GridSpec((0.9, 0.95, 1.0), tuple(k / 100 for k in range(0, 30, 2)), (0.0, 0.01))
        a = eta_grid(0.6, grid, tol=1e-5)
        b = eta_grid(0.6, grid, tol=1e-5, workers=2)
        assert a.min_value == b.min_value and a.params == b.params

    def test_to_dict(self):
        d = eta_grid(0.55, SMALL, tol=1e-5).to_dict()
        assert set(d) >= {"min_value", "params", "enclosure", "curve"} and "note" not in d


class TestPolish:
    def test_never_worse(self):
        res = eta_grid(0.55, SMALL, tol=1e-5)
        pol = polish(res, tol=1e-5, step=0.02, min_step=0.005)
        assert pol.min_value <= res.min_value and pol.polished
        assert "non-certifying" in pol.to_dict()["note"]
        assert erm_revenue_enclosure(three_piece_curve(pol.params), 1e-5).upper == pytest.approx(pol.min_value)


class TestSeries:
    def test_csv(self):
        rs = eta_series([0.5, 1.0], SMALL, tol=1e-4)
        lines = series_csv(rs).splitlines()
        assert lines[0] == "q_opt,min_value,q2,r2,r3" and len(lines) == 3
        assert float(lines[2].split(",")[0]) == 1.0
