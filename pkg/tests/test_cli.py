import json
import subprocess
import sys

import pytest
import yaml

from solitonlab.cli import main
from solitonlab.manifest import ManifestError, parse_manifest


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


CLASSIFY_SOL = {"metric": {"catalog": "sol3"}, "task": "classify", "grid": "(-1,1)^3:5"}
VERIFY_OK = {
    "metric": {"catalog": "r_x_s2"},
    "task": "verify-soliton",
    "grid": "(-1,1)x(0.5,2.6)x(0,3):3",
    "soliton": {"kind": "ricci", "f": "t^2/2", "lambda": 1},
}


def test_catalog_lists_eight_entries(capsys):
    code, out, _ = _run(["catalog", "--format", "json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert len(data["entries"]) == 8
    assert {e["name"]: e["ricci_eigenvalues"] for e in data["entries"]}["nil3"] == ["-1/2", "-1/2", "1/2"]
    code, out, _ = _run(["catalog"], capsys)
    assert "PseudoSymmetricConstantType" in out


def test_classify_sol_manifest(tmp_path, capsys):
    path = _write(tmp_path, "sol.yaml", CLASSIFY_SOL)
    code, out, _ = _run(["run", path], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1
    assert rep["region"]["cls"] == "PseudoSymmetricConstantType"
    assert rep["region"]["mean_L"] == pytest.approx(-1.0)
    assert len(rep["points"]) == 125
    # row-major: last coordinate fastest
    assert rep["points"][0]["point"][:2] == rep["points"][1]["point"][:2]
    assert rep["timing"] is None
    assert any("sphere has sectional curvature +1" in n for n in rep["notes"])


def test_classify_inline_text(capsys):
    code, out, _ = _run(["classify", "--metric", "nil3", "--grid", "(-1,1)^3:5", "--format", "text"], capsys)
    assert code == 0
    assert "0.25" in out and "PseudoSymmetricConstantType" in out


def test_verify_exit_codes(tmp_path, capsys):
    code, out, _ = _run(["run", _write(tmp_path, "ok.yaml", VERIFY_OK)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert rep["soliton"]["defining"]["sup"] <= 1e-9
    bad = dict(VERIFY_OK, soliton={"kind": "ricci", "f": "t^2/2", "lambda": 2})
    code, out, err = _run(["run", _write(tmp_path, "bad.yaml", bad)], capsys)
    rep = json.loads(out)
    assert code == 2 and not rep["passed"]
    assert rep["soliton"]["defining"]["sup"] == pytest.approx(1.0)
    assert "verification failed" in err


def test_verify_inline_fits_lambda(capsys):
    code, out, _ = _run(["verify-soliton", "--metric", "r_x_h2", "--f=-t^2/2"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["soliton"]["lambda"] == pytest.approx(-1.0) and rep["soliton"]["lambda_fitted"]
    assert rep["soliton"]["type"] == "shrinking"


def test_fit_soliton_degenerate_note(capsys):
    code, out, _ = _run(["fit-soliton", "--metric", "euclidean", "--grid", "(-1,1)^3:5", "--format", "text"], capsys)
    assert code == 0
    assert "degenerate yes" in out and "note:" in out


def test_fit_soliton_fails_on_nil(capsys):
    code, out, _ = _run(["fit-soliton", "--metric", "nil3", "--grid", "(-1,1)^3:5"], capsys)
    assert code == 2
    assert json.loads(out)["soliton"]["relative_residual"] > 1e-3


def test_diagnostics_task(capsys):
    code, out, _ = _run(["diagnostics", "--metric", "nil3", "--grid", "(-1,1)^3:2"], capsys)
    rep = json.loads(out)
    assert code == 0 and len(rep["points"]) == 8
    assert rep["points"][0]["L"] == pytest.approx(0.25)
    code, _, _ = _run(["diagnostics", "--metric", "sphere3", "--grid", "(-1,1)^3:2"], capsys)
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "--metric", "torus"],
        ["classify"],
        ["classify", "--metric", "nil3", "--tol", "multiplicity=-1"],
        ["classify", "--metric", "nil3", "--tol", "bogus=1"],
        ["classify", "--metric", "hyperbolic3", "--grid", "(-1,1)^3:3"],
        ["classify", "--metric", "nil3", "--param", "kappa=2"],
        ["verify-soliton", "--metric", "r_x_s2"],
        ["verify-soliton", "--metric", "r_x_s2", "--f", "t^^2"],
        ["run", "/nonexistent/manifest.yaml"],
        ["frobnicate"],
        ["classify", "--metric", "nil3", "--workers", "0"],
    ],
)
def test_input_errors_exit_1(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 1
    assert err


def test_manifest_and_inline_flags_conflict(tmp_path, capsys):
    path = _write(tmp_path, "sol.yaml", CLASSIFY_SOL)
    assert _run(["classify", "--manifest", path, "--metric", "nil3"], capsys)[0] == 1
    assert _run(["classify", "--manifest", path, "--grid", "(-1,1)^3:3"], capsys)[0] == 1
    assert _run(["verify-soliton", "--manifest", path], capsys)[0] == 1
    with_out = dict(CLASSIFY_SOL, output={"path": str(tmp_path / "a.json")})
    path2 = _write(tmp_path, "out.yaml", with_out)
    assert _run(["run", path2, "--out", str(tmp_path / "b.json")], capsys)[0] == 1
    assert _run(["classify", "--manifest", path, "--format", "text"], capsys)[0] == 0


def test_invalid_yaml_and_schema(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("task: [classify\n")
    assert _run(["run", bad], capsys)[0] == 1
    assert _run(["run", _write(tmp_path, "x.yaml", {"task": "classify"})], capsys)[0] == 1
    assert _run(["run", _write(tmp_path, "y.yaml", dict(CLASSIFY_SOL, extra=1))], capsys)[0] == 1


def test_reports_are_byte_identical(tmp_path, capsys):
    path = _write(tmp_path, "m.yaml", dict(VERIFY_OK, output={"path": str(tmp_path / "r.json")}))
    assert _run(["run", path], capsys)[0] == 0
    first = (tmp_path / "r.json").read_bytes()
    assert _run(["run", path], capsys)[0] == 0
    assert (tmp_path / "r.json").read_bytes() == first


def test_workers_do_not_change_output(tmp_path, capsys):
    path = _write(tmp_path, "sol.yaml", CLASSIFY_SOL)
    _, one, _ = _run(["run", path], capsys)
    _, two, _ = _run(["run", path, "--workers", "2"], capsys)
    assert one == two


def test_csv_and_timing(tmp_path, capsys):
    csv_path = tmp_path / "pts.csv"
    code, out, _ = _run(["classify", "--metric", "sol3", "--grid", "(-1,1)^3:2", "--csv", csv_path, "--timing"], capsys)
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x,y,z,L,residual"
    assert len(lines) == 9
    assert float(lines[1].split(",")[3]) == pytest.approx(-1.0)
    assert json.loads(out)["timing"]["seconds"] >= 0


def test_inline_metric_manifest(tmp_path, capsys):
    data = {
        "metric": {
            "name": "heisenberg",
            "coords": ["x", "y", "z"],
            "components": {"g00": "1", "g11": "1 + x^2", "g12": "-x", "g22": "1"},
        },
        "task": "classify",
        "grid": {"box": [[-1, 1], [-1, 1], [-1, 1]], "counts": 2},
        "random_points": 10,
        "seed": 3,
    }
    code, out, _ = _run(["run", _write(tmp_path, "inline.yaml", data)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert len(rep["points"]) == 10
    assert rep["region"]["mean_L"] == pytest.approx(0.25)


def test_manifest_validation_messages():
    with pytest.raises(ManifestError, match="task"):
        parse_manifest({"metric": {"catalog": "nil3"}, "task": "solve"})
    with pytest.raises(ManifestError, match="grid"):
        parse_manifest({"metric": {"components": {"g00": "1", "g11": "1", "g22": "1"}}, "task": "classify"})
    with pytest.raises(ManifestError, match="soliton block"):
        parse_manifest({"metric": {"catalog": "nil3"}, "task": "verify-soliton"})
    with pytest.raises(ManifestError, match="fit"):
        parse_manifest({"metric": {"catalog": "nil3"}, "task": "fit-soliton",
                        "soliton": {"kind": "ricci", "f": "x", "lambda": "fit"}})
    with pytest.raises(ManifestError, match="positive"):
        parse_manifest({"metric": {"catalog": "nil3"}, "task": "classify", "tolerances": {"semi": 0}})


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "solitonlab", "catalog"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sol3" in proc.stdout
