import csv
import io
import json
import subprocess
import sys

import pytest

from poisson_bvp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def spec_file(tmp_path, spec, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(spec))
    return str(p)


def test_solve_trivial(capsys):
    code, out, _ = run(capsys, "solve", "--preset", "trivial", "--path", "[]")
    assert code == 0
    assert json.loads(out)["x0"] == pytest.approx(1.0)


def test_solve_exit_codes(capsys, tmp_path):
    assert run(capsys, "solve", "--preset", "counterexample", "--path", "[0.5]")[0] == 2
    assert run(capsys, "solve", "--preset", "counterexample_multiple", "--path", "[0.5]")[0] == 3
    code, _, err = run(capsys, "solve", "--spec", str(tmp_path / "missing.json"))
    assert code == 1 and "error" in err
    bad = spec_file(tmp_path, {"coefficients": {"linear": {"F2": -1.5}}, "psi": {"constant": 0}})
    assert run(capsys, "solve", "--spec", bad)[0] == 1
    bad = spec_file(tmp_path, {"kind": "backward", "coefficients": {"linear": {"F2": 1.0}}, "psi": {"constant": 0}})
    assert run(capsys, "solve", "--spec", bad)[0] == 1
    assert run(capsys, "solve", "--preset", "trivial", "--path", "[0.5, 0.2]")[0] == 1


def test_solve_trajectory_roundtrip(capsys):
    from poisson_bvp import Trajectory

    code, out, _ = run(capsys, "solve", "--preset", "nonlinear", "--path", "[0.3, 0.7]")
    assert code == 0
    assert Trajectory.from_json(out.strip()).to_json() == out.strip()
    rec = json.loads(out)
    assert {"x0", "jump_times", "samples"} <= set(rec)


def test_skorohod_command(capsys):
    code, out, _ = run(capsys, "skorohod", "--path", "[0.25, 0.5]")
    assert code == 0 and "x0" in json.loads(out)
    assert run(capsys, "skorohod", "--preset", "nonlinear")[0] == 1


def test_law_t0_and_determinism(capsys, tmp_path):
    code, out, _ = run(capsys, "law", "--preset", "law", "--t", "0", "--paths", "2000", "--seed", "3")
    summ = json.loads(out)
    assert code == 0
    assert summ["atom_location"] == pytest.approx(summ["xstar"])
    d1, d2 = tmp_path / "a", tmp_path / "b"
    run(capsys, "law", "--preset", "law", "--t", "0.5", "--paths", "1500", "--seed", "9", "--out", str(d1))
    run(capsys, "law", "--preset", "law", "--t", "0.5", "--paths", "1500", "--seed", "9", "--workers", "3",
        "--out", str(d2))
    for name in ("law_samples.csv", "law_summary.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    rows = list(csv.reader(io.StringIO((d1 / "law_samples.csv").read_text())))
    assert rows[0] == ["path_id", "N_t", "N1", "X_t", "is_atom"] and len(rows) == 1501


def test_sensitivity_command(capsys, tmp_path):
    spec = {"coefficients": {"linear": {"f2": 0.5, "F1": 1.0}}, "psi": {"affine": {"a": -0.5, "b": 1.0}}}
    code, out, err = run(capsys, "sensitivity", "--spec", spec_file(tmp_path, spec), "--paths", "10")
    assert code == 0
    assert json.loads(err)["max_rel_err"] < 1e-4
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and set(rows[0]) == {"path_id", "j", "t", "analytic", "fd", "rel_err"}
    spec["psi"] = {"constant": 0.3}
    code, out, _ = run(capsys, "sensitivity", "--spec", spec_file(tmp_path, spec, "c.json"), "--paths", "10")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert all(float(r["analytic"]) == 0.0 for r in rows if float(r["t"]) == 0.0)
    spec["declare_partials"] = False
    assert run(capsys, "sensitivity", "--spec", spec_file(tmp_path, spec, "d.json"))[0] == 4


def test_reciprocal_case3(capsys, tmp_path):
    code, out, _ = run(capsys, "reciprocal", "--case", "3", "--paths", "10000", "--seed", "1", "--out", str(tmp_path))
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "pass" and rep["case"] == 3
    assert (tmp_path / "reciprocal.json").exists()


def test_chaos_command(capsys):
    code, out, _ = run(capsys, "chaos", "--t", "0.5", "--order", "30", "--omegas", "300")
    rep = json.loads(out)
    assert code == 0 and rep["max_abs_diff"] < 1e-8 and not rep["truncation_flagged"]
    code, out, _ = run(capsys, "chaos", "--t", "0.5", "--order", "2", "--omegas", "100")
    rep = json.loads(out)
    assert code == 5 and rep["truncation_flagged"]
    assert run(capsys, "chaos", "--preset", "nonlinear")[0] == 4


def test_json_is_sorted_and_indented(capsys):
    _, out, _ = run(capsys, "chaos", "--omegas", "10")
    keys = list(json.loads(out))
    assert keys == sorted(keys)
    assert out.startswith("{\n  ")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "poisson_bvp", "solve", "--preset", "trivial", "--path", "[]"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["x0"] == pytest.approx(1.0)
