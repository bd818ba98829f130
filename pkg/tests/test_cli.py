import json
import subprocess
import sys

import numpy as np
import pytest

from opendyn.dsl.cli import main
from opendyn.dsl.document import parse_document

from conftest import A_TANK, B_TANK, C_TANK, TANKS

BLOWUP = """box Solo
  out y:1
end
system quad on Solo expr
  states x:1
  der x = x*x
  out y = x
end
simulate quad
  x0 = 1
  t1 = 5
  dt = 0.01
end
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def matrices(text):
    env = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            key, _, value = line.partition(" = ")
            env[key] = np.array(json.loads(value), dtype=float)
    return env


def test_validate(capsys):
    code, out, err = run(capsys, "validate", TANKS)
    assert code == 0 and err == ""
    assert out == "ok: 3 boxes, 2 systems, 1 wirings\n"


def test_flatten_matrix_format(capsys):
    code, out, _ = run(capsys, "flatten", TANKS, "--wiring", "pipes", "--format", "matrix")
    assert code == 0
    assert out.splitlines()[:4] == ["# pipes", "# states:  Q1, Q2", "# inputs:  in_a, in_b", "# outputs: out_a"]
    m = matrices(out)
    assert np.abs(m["A"] - A_TANK).max() <= 1e-12
    assert np.abs(m["B"] - B_TANK).max() <= 1e-12
    assert np.abs(m["C"] - C_TANK).max() <= 1e-12


def test_flatten_json_format(capsys):
    code, out, _ = run(capsys, "flatten", TANKS, "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["states"] == ["Q1", "Q2"]
    assert np.allclose(data["A"], A_TANK, rtol=0, atol=1e-12)
    assert data["phi"]["YY"] == [[0.0, 0.0]]


def test_compose_then_flatten(capsys, tmp_path):
    dest = tmp_path / "pipes.wd"
    code, out, _ = run(capsys, "compose", TANKS, "--wiring", "pipes", "--out", dest)
    assert code == 0 and out == ""
    doc = parse_document(dest.read_text())
    assert list(doc.systems) == ["pipes_composed"]
    _, direct, _ = run(capsys, "flatten", TANKS, "--wiring", "pipes")
    _, again, _ = run(capsys, "flatten", dest, "--wiring", "pipes")
    a, b = matrices(direct), matrices(again)
    for k in "ABC":
        assert np.abs(a[k] - b[k]).max() <= 1e-12


def test_compose_json(capsys):
    code, out, _ = run(capsys, "compose", TANKS, "--json")
    systems = json.loads(out)["systems"]
    assert code == 0 and [(s["name"], s["kind"]) for s in systems] == [("pipes_composed", "linear")]


def test_simulate_fixture_defaults(capsys, tmp_path):
    dest = tmp_path / "traj.csv"
    code, _, err = run(capsys, "simulate", TANKS, "--csv", dest)
    assert code == 0 and err == ""
    lines = dest.read_text().splitlines()
    assert lines[0] == "t,Q1,Q2,out_a"
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == 400
    assert abs(last[1] - 42) <= 1e-5 and abs(last[2] - 36) <= 1e-5


def test_simulate_flag_overrides(capsys):
    code, out, _ = run(capsys, "simulate", TANKS, "--t1", "1", "--dt", "0.5", "--method", "euler",
                       "--x0", "1,2", "--input", "in_a=0", "--input", "in_b=0")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "t,Q1,Q2,out_a"
    assert rows[1] == "0,1,2,0.25"
    # one Euler step of A x with zero input
    assert [float(v) for v in rows[2].split(",")[1:3]] == pytest.approx([1 + 0.5 * (-0.1 + 0.15), 2 + 0.5 * (0.1 - 0.4)])
    assert len(rows) == 4 and rows[-1].startswith("1,")


def test_export_dot(capsys):
    code, out, _ = run(capsys, "export-dot", TANKS, "--wiring", "pipes")
    assert code == 0
    assert out.startswith("digraph")
    assert out.count("subgraph cluster_") == 2 and out.count("->") == 5


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["flatten", str(TANKS), "--format", "png"])
    assert info.value.code == 1
    code, _, err = run(capsys, "simulate", TANKS, "--input", "in_a")
    assert code == 1 and "PORT=VALUES" in err


def test_validation_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.wd"
    bad.write_text(TANKS.read_text().replace("X1.in_a -> Y.in_b", "X1.in_a -> Y.out_a"))
    code, out, err = run(capsys, "validate", bad)
    assert code == 2 and out == ""
    assert f"{bad}:" in err and "[invalid_wiring]" in err
    code, _, _ = run(capsys, "validate", tmp_path / "missing.wd")
    assert code == 2
    code, _, _ = run(capsys, "flatten", TANKS, "--wiring", "nope")
    assert code == 2


def test_simulation_config_errors_exit_2(capsys):
    code, _, err = run(capsys, "simulate", TANKS, "--dt", "-1")
    assert code == 2 and "invalid_simulation" in err
    code, _, _ = run(capsys, "simulate", TANKS, "--x0", "1,2,3")
    assert code == 2


def test_numeric_failure_exit_3(capsys, tmp_path):
    path = tmp_path / "blowup.wd"
    path.write_text(BLOWUP)
    code, out, err = run(capsys, "simulate", path)
    assert code == 3 and out == ""
    assert "non_finite" in err


def test_json_errors(capsys, tmp_path):
    bad = tmp_path / "bad.wd"
    bad.write_text("box A\n  in u:1\n  junk here\nend\n")
    code, _, err = run(capsys, "--json-errors", "validate", bad)
    assert code == 2
    records = [json.loads(line) for line in err.splitlines()]
    assert records == [{
        "severity": "error", "code": "syntax", "message": records[0]["message"],
        "file": str(bad), "line": 3, "col": 3,
    }]


@pytest.mark.parametrize("argv", [
    ["validate"],
    ["flatten", "--wiring", "pipes", "--format", "matrix"],
    ["compose", "--wiring", "pipes"],
    ["export-dot", "--wiring", "pipes"],
    ["simulate", "--t1", "20"],
])
def test_deterministic_across_processes(argv):
    cmd = [sys.executable, "-m", "opendyn.dsl.cli", argv[0], str(TANKS), *argv[1:]]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first and first == second
