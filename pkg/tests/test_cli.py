import json
import subprocess
import sys

import numpy as np
import pytest

from qirt import cli, qobjects as Q, sdp


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


@pytest.mark.parametrize(
    "argv, code",
    [
        (["classify", "--class", "web", "builtin:example1"], 0),
        (["classify", "--class", "eb", "builtin:example1"], 1),
        (["classify", "--class", "jm", "builtin:pauli-zx"], 1),
        (["classify", "--class", "tp", "builtin:identity"], 1),
        (["classify", "--class", "eb", "builtin:depolarizing:0.3"], 0),
        (["robustness", "--free", "ib", "builtin:identity"], 64),
        (["classify", "--class", "nope", "builtin:example1"], 64),
        (["classify", "--class", "eb", "builtin:unknown"], 64),
        ([], 64),
    ],
)
def test_exit_codes(argv, code):
    assert cli.run(argv)[0] == code


def test_inconclusive_exit(tmp_path):
    path = write(tmp_path, "d3.json", Q.dumps(Q.one_outcome(Q.depolarizing(3, 0.2))))
    code, rep = cli.run(["classify", "--class", "eb", path])
    assert code == 2 and rep["results"][0]["relaxation"] == "PptRelaxation"


def test_malformed_json_reports_position(tmp_path, capsys):
    path = write(tmp_path, "bad.json", '{\n  "format": "instrument.v1",\n  oops\n}')
    assert cli.main(["validate", path]) == 64
    err = capsys.readouterr().err
    assert "line 3" in err and "column" in err


def test_validate_and_round_trip(tmp_path):
    path = write(tmp_path, "ex1.json", Q.dumps(Q.example1_instrument()))
    code, rep = cli.run(["validate", path])
    assert code == 0 and rep["results"][0]["valid"]
    assert len(rep["inputs"][0]["sha256"]) == 64
    bad = json.loads(Q.dumps(Q.example1_instrument()))
    bad["branches"] = bad["branches"][:1]
    code, rep = cli.run(["validate", write(tmp_path, "bad.json", bad)])
    assert code == 1 and not rep["results"][0]["valid"]


def test_repro_example1():
    code, rep = cli.run(["repro", "example-1"])
    checks = {c["check"]: c for c in rep["results"][0]["checks"]}
    assert code == 0
    assert checks["EB"]["observed"] == "NonMember" and checks["WEB"]["observed"] == "Member"


def test_repro_example2_and_only():
    code, rep = cli.run(["repro", "--only", "example-2"])
    assert code == 0 and [r["case"] for r in rep["results"]] == ["example-2"]
    assert all(c["passed"] for c in rep["results"][0]["checks"])
    assert {p["tag"] for p in rep["provenance"]} <= {"reference", "derived", "trivial"}


def test_repro_list_and_unknown():
    code, rep = cli.run(["repro", "--list"])
    assert code == 0 and "harness" in {r["case"] for r in rep["results"]}
    assert cli.run(["repro", "no-such-case"])[0] == 64


def test_thresholds():
    res = cli.run(["thresholds"])[1]["results"][0]
    assert res["eb"] == pytest.approx(1 / 3, abs=1e-15)
    assert res["ibc2"] == pytest.approx(2 / 3, abs=1e-15)
    assert res["ibc"] == pytest.approx(5 / 12, abs=1e-15)
    assert cli.run(["thresholds", "--d", "3"])[1]["results"][0]["eb"] == pytest.approx(0.25, abs=1e-15)


def test_distance_and_measures():
    res = cli.run(["distance", "--kind", "channel", "builtin:identity", "builtin:depolarizing:0"])[1]["results"][0]
    assert res["distance"] == pytest.approx(1.5, abs=1e-6)
    assert cli.run(["robustness", "--free", "eb", "builtin:identity"])[1]["results"][0]["value"] == pytest.approx(1.0, abs=1e-6)
    assert cli.run(["weight", "--free", "tp", "builtin:identity"])[1]["results"][0]["value"] == "inf"
    code, rep = cli.run(["hierarchy", "builtin:example1"])
    assert code == 0 and rep["results"][0]["holds"]


def test_byte_stable_reports(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert cli.main(["measure", "--free", "eb", "builtin:example1", "-o", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, rep = cli.run(["measure", "--free", "eb", "builtin:example1", "--timings"])
    assert rep["timings"]


def test_config_file(tmp_path):
    before = dict(sdp.DEFAULTS)
    cfg = write(tmp_path, "q.cfg", "[solver]\nmax_iter = 150  # fewer\ntol_feas = 1e-8\n")
    code, rep = cli.run(["classify", "--class", "eb", "builtin:example1", "--config", cfg])
    assert code == 1
    assert sdp.DEFAULTS == before
    assert cli.run(["classify", "--class", "eb", "builtin:example1", "--config", write(tmp_path, "x.cfg", "bogus = 1\n")])[0] == 64


def test_transform_seed_propagation(tmp_path):
    src = write(tmp_path, "ex1.json", Q.dumps(Q.InstrumentSet([Q.example1_instrument()])))
    spec = write(tmp_path, "spec.json", {"random": True})

    def out(seed):
        code, rep = cli.run(["transform", "--theory", "ep", "--spec", spec, src, "--seed", str(seed)])
        assert code == 0
        return json.dumps(rep["results"][0]["output"])

    assert out(5) == out(5) and out(5) != out(6)
    target = tmp_path / "t.json"
    cli.run(["transform", "--theory", "sep", "--spec", spec, src, "--out", str(target)])
    assert len(Q.load_instruments(json.loads(target.read_text()))) == 2


def test_harness_command():
    code, rep = cli.run(["harness", "--theory", "ip", "--trials", "2", "--q", "0,1"])
    assert code == 0 and rep["results"][0]["passed"] and "records" not in rep["results"][0]


def test_seed_hex():
    _, rep = cli.run(["thresholds", "--seed", "0x10"])
    assert rep["seed"] == 16


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qirt", "thresholds"], capture_output=True, text=True, check=False)
    assert r.returncode == 0 and json.loads(r.stdout)["schema"] == "report.v1"
