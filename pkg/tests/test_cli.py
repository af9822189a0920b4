import json
import subprocess
import sys
from importlib import resources

import pytest

from isacdp import __version__, cli, documents, regions

DATA = resources.files("isacdp") / "data"
BINARY = str(DATA / "binary_multiplicative.json")
XOR = str(DATA / "xor_deterministic.json")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_region_json_has_provenance(capsys):
    code, out, _ = run(capsys, "region", BINARY)
    assert code == 0
    body = json.loads(out)
    prov = body["provenance"]
    assert prov["version"] == __version__ and prov["seed"] == 0 and len(prov["config_sha256"]) == 64
    assert body["points"][0]["R_bits"] == pytest.approx(0.0877537, abs=1e-7)


def test_seed_changes_config_hash(capsys):
    _, a, _ = run(capsys, "region", BINARY)
    _, b, _ = run(capsys, "region", BINARY, "--seed", "5")
    assert json.loads(a)["provenance"]["config_sha256"] != json.loads(b)["provenance"]["config_sha256"]


@pytest.mark.parametrize("argv", [
    ("region", BINARY, "--kind", "all"),
    ("region", BINARY, "--trace", "--budget", "20", "--seed", "3", "--format", "csv"),
    ("gaussian", "--rho", "0,0.5", "--alpha", "0,0.25"),
    ("simulate", BINARY, "--n", "3", "--km", "1", "--mode", "monte_carlo", "--trials", "500", "--seed", "7"),
    ("secure", BINARY, "--re", "0.2"),
    ("binary-example",),
])
def test_outputs_are_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main([*argv, "--output", str(a)]) in (0, 1)
    assert cli.main([*argv, "--output", str(b)]) in (0, 1)
    assert a.read_bytes() == b.read_bytes()


def test_csv_outputs(capsys):
    code, out, _ = run(capsys, "region", XOR, "--kind", "deterministic-channel", "--format", "csv")
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == 0 and lines == [regions.CSV_HEADER, "1,0,0,,true"]
    assert "# config_sha256=" in out


def test_infeasible_exit_code(tmp_path, capsys):
    path = tmp_path / "best.json"
    path.write_text(json.dumps(documents.system_to_document(regions.best_estimator_example())))
    code, out, _ = run(capsys, "region", str(path))
    assert code == 1
    assert json.loads(out)["points"][0]["feasible"] is False


def test_input_errors_exit_with_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    raw = json.loads((DATA / "binary_multiplicative.json").read_text())
    raw["kernels"]["P_U"]["rows"][0] = [0.25, 0.749999]
    bad.write_text(json.dumps(raw))
    code, out, _ = run(capsys, "validate", str(bad))
    assert code == 2 and len(json.loads(out)["diagnostics"]) == 1
    code, _, err = run(capsys, "region", str(bad))
    assert code == 2 and "P_U" in err
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "simulate", BINARY)[0] == 2
    assert run(capsys, "region", str(tmp_path / "missing.json"))[0] == 2
    assert cli.dispatch(cli.RunConfig("nope")) == 2


def test_validate_bundled(capsys):
    for name in ("binary_multiplicative.json", "xor_deterministic.json", "gaussian_defaults.json"):
        code, out, _ = run(capsys, "validate", str(DATA / name))
        assert code == 0 and json.loads(out)["valid"]


def test_gaussian_csv_and_companion(tmp_path, capsys):
    comp = tmp_path / "cfg.json"
    code, out, _ = run(capsys, "gaussian", "--rho", "0", "--alpha", "0", "--config-out", str(comp))
    rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == 0 and rows[0] == "rho,alpha,a,R_bits,Rc_bits,achieved_D,feasible"
    assert rows[1].split(",")[3] == "0.368483"
    assert json.loads(comp.read_text())["config"]["var_s"] == 2.0


def test_bundled_gaussian_defaults_sweep(capsys):
    code, out, _ = run(capsys, "gaussian")
    rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == 0 and len(rows) == 1 + 3 * 201


def test_simulate_report_and_curve(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "simulate", BINARY, "--n", "2", "--kg", "1", "--curve-n", "1,2",
                       "--curve-out", str(curve))
    body = json.loads(out)
    assert code == 0 and body["config"]["delta"] == 0.1 and body["curves"]["n"] == [1, 2]
    assert "n,p_err" in curve.read_text()


def test_transport_subcommand(tmp_path, capsys):
    for name, p in (("p.json", 0.3), ("q.json", 0.5)):
        (tmp_path / name).write_text(json.dumps({"alphabets": {"A": 2},
                                                 "dists": {"P": {"alphabet": "A", "probs": [1 - p, p]}}}))
    (tmp_path / "cost.csv").write_text("0,1\n1,0\n")
    summary = tmp_path / "s.json"
    code, out, _ = run(capsys, "transport", "--p", str(tmp_path / "p.json"), "--q", str(tmp_path / "q.json"),
                       "--cost", str(tmp_path / "cost.csv"), "--format", "csv", "--summary-out", str(summary))
    assert code == 0
    rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert rows[0] == "source,t0,t1" and len(rows) == 3
    assert json.loads(summary.read_text())["cost"] == pytest.approx(0.2)


def test_secure_outputs(tmp_path, capsys):
    point = tmp_path / "pt.json"
    code, out, _ = run(capsys, "secure", BINARY, "--re", "0.1", "--format", "csv", "--point-out", str(point))
    rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert code == 0 and rows[0] == "rate_bits,distortion"
    assert json.loads(point.read_text())["point"]["DE"] is not None


@pytest.mark.parametrize("sub", ["region", "gaussian", "simulate", "transport", "secure", "binary-example"])
def test_help_documents_units(sub, capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([sub, "--help"])
    text = capsys.readouterr().out
    assert "bits" in text or "probabilit" in text
    assert "distortion" in text.lower() or "cost" in text.lower()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "isacdp", "binary-example", "--format", "csv"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "R_bits" in out.stdout
