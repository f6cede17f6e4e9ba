import json
import subprocess

import pytest

from ermbounds import cli
from ermbounds.curve import dump_curve, validate_curve
from ermbounds.gridsearch import GridSpec


@pytest.fixture()
def affine(tmp_path):
    path = tmp_path / "affine.json"
    dump_curve(validate_curve([0, 1], [1, 0]), path)
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestEval:
    def test_affine(self, capsys, affine):
        code, out, _ = run(capsys, "eval", "--curve", affine)
        d = json.loads(out)
        assert code == 0 and d["lower"] <= 2 / 3 <= d["upper"] and d["width"] <= 1e-6

    def test_ratio(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        dump_curve(validate_curve([0, 1], [2, 2]), path)
        code, out, _ = run(capsys, "eval", "--curve", path, "--ratio", "--tol", "1e-5")
        d = json.loads(out)
        assert code == 0 and d["ratio"] and d["lower"] <= 1.0 <= d["upper"]

    def test_bad_curve(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"knots": [0, 0.5, 1], "values": [0, 0.1, 1]}')
        code, _, err = run(capsys, "eval", "--curve", path)
        assert code == 1 and "concavity" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "eval", "--curve", tmp_path / "nope.json")[0] == 1

    def test_bad_tol(self, capsys, affine):
        assert run(capsys, "eval", "--curve", affine, "--tol", "0")[0] == 1


class TestMc:
    def test_seed_required(self, capsys, affine):
        assert run(capsys, "mc", "--curve", affine, "--samples", "1000")[0] == 1

    def test_deterministic(self, capsys, affine):
        a = run(capsys, "mc", "--curve", affine, "--samples", "20000", "--seed", "3")
        b = run(capsys, "mc", "--curve", affine, "--samples", "20000", "--seed", "3")
        assert a == b and a[0] == 0
        d = json.loads(a[1])
        assert abs(d["mean"] - 2 / 3) <= 5 * d["stderr"]

    def test_bad_samples(self, capsys, affine):
        assert run(capsys, "mc", "--curve", affine, "--samples", "0", "--seed", "1")[0] == 1


class TestSweeps:
    def test_upper(self, capsys, tmp_path):
        code, out, _ = run(capsys, "upper", "--n", 3, "--backend", "reference", "--gap", 0, "--tol", "1e-5",
                           "--out", tmp_path / "u")
        d = json.loads(out)
        assert code == 0 and d["completed"] == 4 and d["run_dir"] == str(tmp_path / "u")
        assert (tmp_path / "u" / "manifest.json").exists()

    def test_lower_subset_is_partial(self, capsys, tmp_path):
        code, out, _ = run(capsys, "lower", "--n", 3, "--N", 4, "--backend", "reference", "--k", 1, 2,
                           "--out", tmp_path / "l")
        assert code == 3 and json.loads(out)["status"] == "partial, non-certifying"
        code, out, _ = run(capsys, "report", tmp_path / "l")
        assert code == 3 and "total_runtime" in json.loads(out)
        code, out, _ = run(capsys, "report", tmp_path / "l", "--plot-data")
        assert out.splitlines()[0] == "q_opt_midpoint,model_value,certified_or_exact"

    def test_lower_complete(self, capsys, tmp_path):
        code, out, _ = run(capsys, "lower", "--n", 3, "--N", 3, "--backend", "reference", "--gap", 0,
                           "--out", tmp_path / "l")
        assert code == 0 and json.loads(out)["status"] == "certified"
        assert run(capsys, "report", tmp_path / "l")[0] == 0

    def test_lower_strengthen(self, capsys, tmp_path):
        code, out, _ = run(capsys, "lower", "--n", 3, "--N", 3, "--backend", "reference", "--gap", 0,
                           "--out", tmp_path / "a")
        plain = json.loads(out)["alpha_lower"]
        code, out, _ = run(capsys, "lower", "--n", 3, "--N", 3, "--backend", "reference", "--gap", 0,
                           "--strengthen", "--out", tmp_path / "b")
        assert code == 0 and json.loads(out)["alpha_lower"] == pytest.approx(plain, abs=1e-9)
        assert json.loads((tmp_path / "b" / "config.json").read_text())["strengthen"] is True

    def test_config_clash(self, capsys, tmp_path):
        run(capsys, "upper", "--n", 2, "--backend", "reference", "--out", tmp_path)
        code, _, err = run(capsys, "upper", "--n", 2, "--backend", "reference", "--gap", 0.5, "--out", tmp_path)
        assert code == 2 and "different configuration" in err

    def test_tampered_report(self, capsys, tmp_path):
        run(capsys, "upper", "--n", 2, "--backend", "reference", "--out", tmp_path)
        (tmp_path / "summary.json").write_text("{}\n")
        assert run(capsys, "report", tmp_path)[0] == 2

    @pytest.mark.parametrize("argv", [["upper", "--n", "1"], ["lower", "--n", "3", "--N", "1"],
                                      ["upper", "--n", "3", "--backend", "cplex"],
                                      ["lower", "--n", "3", "--N", "4", "--weighting", "cubic"]])
    def test_usage(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1


class TestGrid:
    @pytest.fixture(autouse=True)
    def small_grid(self, monkeypatch):
        monkeypatch.setattr(cli, "default_grid", lambda: GridSpec((0.9, 1.0), (0.0, 0.1), (0.0, 0.01)))

    def test_single(self, capsys):
        code, out, _ = run(capsys, "grid", "--q-opt", 0.5, "--tol", "1e-4")
        d = json.loads(out)
        assert code == 0 and d["params"]["q_opt"] == 0.5 and d["grid_points"] == 8

    def test_polish_flagged(self, capsys):
        code, out, _ = run(capsys, "grid", "--q-opt", 0.5, "--tol", "1e-4", "--polish")
        assert code == 0 and "non-certifying" in json.loads(out)["note"]

    def test_batch(self, capsys):
        code, out, _ = run(capsys, "grid", "--batch", 2, "--tol", "1e-4")
        assert code == 0 and len(out.splitlines()) == 3

    def test_needs_q_opt(self, capsys):
        assert run(capsys, "grid")[0] == 1
        assert run(capsys, "grid", "--q-opt", 1.5)[0] == 1


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest", "--seed", 1)
    assert code == 0 and out.count("PASS") == 5


def test_console_script(affine):
    proc = subprocess.run(["ermbounds", "eval", "--curve", str(affine)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["converged"]


def test_no_command(capsys):
    assert run(capsys)[0] == 1
