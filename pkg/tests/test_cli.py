import csv
import io
import json
import subprocess
import sys

import numpy as np

from pbt import cli, linalg


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_fidelity_closed(capsys):
    code, out = run(capsys, "fidelity", "--n", "3", "--d", "2", "--method", "closed")
    js = json.loads(out)
    assert code == 0 and js["f"] == 0.75 and js["schema"] == "pbt/1"


def test_fidelity_dense_and_bound(capsys):
    code, out = run(capsys, "fidelity", "--n", "1", "--method", "dense")
    assert abs(json.loads(out)["f"] - 0.5) < 1e-12
    code, out = run(capsys, "fidelity", "--n", "2", "--d", "3", "--method", "dense")
    js = json.loads(out)
    assert js["within_bound"] and js["F"] <= 2 / 9 and js["F_upper_bound"] == 2 / 9


def test_fidelity_other_methods(capsys):
    for method in ("block", "choi", "sdp"):
        code, out = run(capsys, "fidelity", "--n", "2", "--method", method, "--gap-tol", "1e-8")
        assert code == 0
    assert abs(json.loads(out)["F"] - 0.5) < 1e-6


def test_fidelity_is_deterministic(capsys):
    _, a = run(capsys, "fidelity", "--n", "4", "--method", "dense")
    _, b = run(capsys, "fidelity", "--n", "4", "--method", "dense")
    assert a == b


def test_sweep_csv(capsys):
    code, out = run(capsys, "sweep", "--n-max", "6", "--d", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 6
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    f = [float(r["f_srm_closed"]) for r in rows]
    assert f[1] < 2 / 3 < f[2]
    assert all(abs(float(r["f_srm_dense"]) - float(r["f_srm_closed"])) < 1e-11 for r in rows)
    assert rows[0]["f_sdp"] == ""
    assert len(rows[3]["f_srm_closed"].replace("0.", "", 1)) <= 13


def test_sweep_long_closed(capsys):
    _, out = run(capsys, "sweep", "--n-max", "30", "--methods", "closed")
    last = list(csv.DictReader(io.StringIO(out)))[-1]
    assert abs(float(last["f_srm_closed"]) - (1 - 1 / 60)) < 0.25 / 60


def test_sweep_with_sdp(capsys):
    _, out = run(capsys, "sweep", "--n-max", "4", "--methods", "closed,sdp")
    for r in csv.DictReader(io.StringIO(out)):
        assert float(r["f_sdp"]) >= float(r["f_srm_closed"]) - 1e-7


def test_sweep_json(capsys):
    _, out = run(capsys, "sweep", "--n-max", "2", "--methods", "closed", "--format", "json")
    js = json.loads(out)
    assert js["schema"] == "pbt/1" and len(js["rows"]) == 2


def test_certify(capsys):
    code, out = run(capsys, "certify", "--n", "4", "--d", "2", "--kind", "srm")
    assert code == 0 and json.loads(out)["passed"]
    code, out = run(capsys, "certify", "--n", "2", "--d", "3", "--kind", "upper")
    js = json.loads(out)
    assert code == 0 and js["passed"] and abs(js["certificates"][0]["F_bound"] - 2 / 9) < 1e-15
    code, out = run(capsys, "certify", "--n", "2", "--d", "3", "--kind", "orthogonal")
    assert code == 0
    assert run(capsys, "certify", "--n", "9", "--d", "2")[0] == 3


def test_certify_failure_exit_code(capsys):
    # tolerance -1 demands every margin be at least 1, which no certificate meets
    code, out = run(capsys, "certify", "--n", "2", "--kind", "upper", "--tol", "-1")
    assert code == 5 and not json.loads(out)["passed"]


def test_tolerance_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("PBT_TOL", "-1")
    assert run(capsys, "certify", "--n", "2", "--kind", "upper")[0] == 5
    assert run(capsys, "certify", "--n", "2", "--kind", "upper", "--tol", "1e-9")[0] == 0
    monkeypatch.setenv("PBT_TOL", "abc")
    assert run(capsys, "certify", "--n", "2")[0] == 2


def test_sdp_command(capsys):
    code, out = run(capsys, "sdp", "--n", "2", "--dump-matrices")
    js = json.loads(out)
    assert code == 0 and abs(js["f"] - 2 / 3) < 1e-6 and "Omega" in js
    assert run(capsys, "sdp", "--n", "6")[0] == 3


def test_spectrum(capsys):
    _, out = run(capsys, "spectrum", "--n", "3")
    js = json.loads(out)
    assert sum(e["degeneracy"] for e in js["entries"]) == 16


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_simulate(capsys, tmp_path):
    inp = _write(tmp_path / "in.json", linalg.matrix_to_json(np.diag([1.0, 0.0])))
    code, out = run(capsys, "simulate", "--n", "1", "--input", inp)
    js = json.loads(out)
    avg = np.array(js["average"]["re"])
    assert code == 0 and np.abs(avg - np.eye(2) / 2).max() < 1e-12
    prog = _write(tmp_path / "x.json", {"kraus": [{"re": [[0, 1], [1, 0]]}]})
    code, out = run(capsys, "simulate", "--n", "3", "--input", inp, "--program", prog, "--out",
                    str(tmp_path / "o.json"))
    js = json.loads((tmp_path / "o.json").read_text())
    assert abs(js["average"]["re"][1][1] - 0.75) < 1e-12
    assert len(js["outcomes"]) == 3 and abs(js["F"] - 0.625) < 1e-9


def test_simulate_rejects_bad_files(capsys, tmp_path):
    bad = _write(tmp_path / "bad.json", {"re": [[1, 0, 0]], "im": [[0, 0, 0]]})
    assert run(capsys, "simulate", "--n", "1", "--input", bad)[0] == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert run(capsys, "simulate", "--n", "1", "--input", str(tmp_path / "junk.json"))[0] == 2
    assert run(capsys, "simulate", "--n", "1", "--input", str(tmp_path / "missing.json"))[0] == 2
    prog = _write(tmp_path / "p.json", {"ops": []})
    assert run(capsys, "simulate", "--n", "1", "--program", prog)[0] == 2
    wrong = _write(tmp_path / "w.json", linalg.matrix_to_json(np.eye(3) / 3))
    assert run(capsys, "simulate", "--n", "1", "--input", wrong)[0] == 2


def test_validation_exit_codes(capsys):
    assert run(capsys, "fidelity", "--n", "0")[0] == 2
    assert run(capsys, "fidelity", "--n", "2", "--method", "magic")[0] == 2
    assert run(capsys, "fidelity", "--n", "2", "--d", "3", "--method", "closed")[0] == 2
    assert run(capsys, "fidelity", "--n", "9", "--method", "dense")[0] == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pbt", "fidelity", "--n", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and abs(json.loads(res.stdout)["F"] - 0.25) < 1e-12
