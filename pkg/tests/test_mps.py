import math

import highspy
import numpy as np
import pytest

from ermbounds.gauge import lower_gauge, uniform_gauge
from ermbounds.model import Constraint, MilpModel, Variable, VarKind, build_lower_model, build_upper_model
from ermbounds.mps import OBJ_ROW, MpsError, read_mps, row_names, write_mps


def tiny_model(constant=0.75):
    """min x + 2 y + constant  s.t.  x + y >= 1,  x - y = 0,  b binary."""
    variables = (
        Variable("x", VarKind.CONTINUOUS, 0.0, 1.0),
        Variable("y", VarKind.CONTINUOUS, -1.0, math.inf),
        Variable("b", VarKind.BINARY, 0.0, 1.0),
    )
    constraints = (
        Constraint(((0, 1.0), (1, 1.0)), ">=", 1.0, "cover"),
        Constraint(((0, 1.0), (1, -1.0)), "=", 0.0, "tie"),
        Constraint(((0, 1.0), (2, -1.0)), "<=", 0.0, "link"),
    )
    return MilpModel("tiny", "upper", uniform_gauge(1, 1), variables, constraints, ((0, 1.0), (1, 2.0)),
                     constant, {("w", 1, 1): 2})


def assert_roundtrip(model, path):
    write_mps(model, path)
    p = read_mps(path)
    c, A, row_lo, row_hi, lb, ub, integ = model.arrays
    assert p.col_names == [v.name for v in model.variables]
    assert p.row_names == row_names(model)
    np.testing.assert_array_equal(p.c, c)
    assert p.objective_constant == model.objective_constant
    assert (p.A != A).nnz == 0
    assert p.senses == [con.sense for con in model.constraints]
    np.testing.assert_array_equal(p.rhs, [con.rhs for con in model.constraints])
    np.testing.assert_array_equal(p.lb, lb)
    np.testing.assert_array_equal(p.ub, ub)
    np.testing.assert_array_equal(p.integrality, integ)
    return p


class TestRoundTrip:
    def test_tiny(self, tmp_path):
        p = assert_roundtrip(tiny_model(), tmp_path / "t.mps")
        assert p.name == "tiny" and p.objective_constant == 0.75

    def test_upper(self, tmp_path):
        assert_roundtrip(build_upper_model(6, 3), tmp_path / "u.mps")

    def test_lower(self, tmp_path):
        assert_roundtrip(build_lower_model(lower_gauge(6, 20, 7)), tmp_path / "l.mps")

    def test_negative_constant(self, tmp_path):
        assert assert_roundtrip(tiny_model(-0.1), tmp_path / "t.mps").objective_constant == -0.1

    def test_binaries_between_markers(self, tmp_path):
        text = write_mps(build_upper_model(3, 1), tmp_path / "u.mps").read_text()
        assert text.count("'INTORG'") == text.count("'INTEND'") >= 1
        assert text.rstrip().endswith("ENDATA")

    def test_row_names_unique(self):
        m = tiny_model().with_constraints([Constraint(((0, 1.0),), "<=", 1.0, "cover"),
                                           Constraint(((0, 1.0),), "<=", 1.0, OBJ_ROW)])
        names = row_names(m)
        assert len(set(names)) == len(names) and OBJ_ROW not in names

    def test_unknown_row(self, tmp_path):
        path = tmp_path / "bad.mps"
        path.write_text("NAME x\nROWS\n N  OBJ\nCOLUMNS\n    a  nope  1.0\nRHS\nBOUNDS\nENDATA\n")
        with pytest.raises(MpsError):
            read_mps(path)


class TestHighsReads:
    @pytest.mark.parametrize("build", [lambda: tiny_model(), lambda: build_lower_model(lower_gauge(5, 10, 4))])
    def test_offset_and_shape(self, tmp_path, build):
        m = build()
        path = write_mps(m, tmp_path / "m.mps")
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        assert h.readModel(str(path)) == highspy.HighsStatus.kOk
        lp = h.getLp()
        assert lp.num_col_ == len(m.variables) and lp.num_row_ == len(m.constraints)
        assert lp.offset_ == pytest.approx(m.objective_constant, abs=0)

    def test_tiny_optimum(self, tmp_path):
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(str(write_mps(tiny_model(), tmp_path / "t.mps")))
        h.run()
        # x = y = 1/2, b = 1
        assert h.getInfo().objective_function_value == pytest.approx(1.5 + 0.75)
