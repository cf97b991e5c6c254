import json

import pytest

from singularma import suite
from singularma.cli import main, parse_point, parse_range

SMALL = {
    "schema": 1,
    "seed": 11,
    "checks": [
        {"id": "hn", "kind": "hn_identity", "provenance": "ODE for h_n", "n": [2, 3]},
        {"id": "det", "kind": "closed_form", "family": "EX1", "params": {"n": 2}, "eps": [0.0], "points": 50,
         "provenance": "closed-form determinant"},
        {"id": "psh", "kind": "psh", "family": "EX1", "params": {"n": 2}, "eps_pairs": [[0.2, 0.1]],
         "provenance": "decreasing regularization"},
    ],
}


def test_parse_helpers():
    assert parse_point("0,1+2i") == (0j, 1 + 2j)
    assert parse_range("1e-2:1e-4:3").tolist() == pytest.approx([1e-2, 1e-3, 1e-4])


def test_families(capsys):
    assert main(["families"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("family,domain,params,rhs\r\n") and out.count("\r\n") == 7


def test_eval(capsys):
    assert main(["eval", "--family", "EX1", "--point", "0.5,1"]) == 0
    assert "2.289268631168936" in capsys.readouterr().out


def test_verify_det(capsys):
    assert main(["verify", "det", "--family", "EX3_W", "--gamma", "0.5", "--grid", "5"]) == 0


def test_verify_psh(capsys):
    assert main(["verify", "psh", "--family", "EX1", "--eps", "0.2,0.1", "--grid", "6"]) == 0
    assert main(["verify", "psh", "--family", "EX1", "--eps", "0.2"]) == 2


def test_viscosity_commands(capsys):
    assert main(["viscosity", "super", "--family", "EX1", "--point", "0,1", "--jets", "20"]) == 0
    assert main(["viscosity", "contact", "--family", "EX1", "--point", "0,1"]) == 0
    assert main(["viscosity", "super", "--family", "EX1"]) == 2


def test_regularity_commands(capsys):
    assert main(["regularity", "holder", "--family", "EX2_V", "--beta", "0.5"]) == 0
    assert "alpha 0.5" in capsys.readouterr().err
    assert main(["regularity", "sobolev", "--family", "EX1", "--order", "2", "--exponent", "1.5", "--depth", "30"]) == 0
    assert "divergent" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--family", "EX1", "--eps-grid", "1e-2:1e-5:4", "--fit", "logpower", "--out", str(out)])
    assert code == 0
    assert out.read_bytes().startswith(b"eps,value,err_est\r\n")
    assert out.with_suffix(".json").exists()
    assert json.loads(capsys.readouterr().err)["initial"]["model"] == "logpower"


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--family", "EX9"],
        ["eval", "--family", "EX2_V", "--beta", "1.5"],
        ["eval", "--point", "abc"],
        ["nosuchcommand"],
        ["sweep", "--eps-grid", "1e-2"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_report_config_errors(tmp_path, capsys):
    assert main(["report", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": 1, "checks": [{"id": "x", "kind": "psh", "family": "EX9", "provenance": "p"}]}))
    assert main(["report", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("{not json")
    assert main(["report", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_report_small_config(tmp_path, capsys):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "out"
    assert main(["report", "--config", str(cfg), "--out", str(out), "--jobs", "2"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [s["id"] for s in summary] == ["hn", "det", "psh"]
    assert all(s["verdict"] == "pass" for s in summary)
    assert (out / "det.csv").exists() and (out / "runtime.log").exists()


def test_missing_field_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "checks": [
        {"id": "psh", "kind": "psh", "family": "EX1", "params": {"n": 2}, "provenance": "p"}]}))
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_load_config_validation():
    with pytest.raises(suite.ConfigError):
        suite.load_config({"schema": 2, "checks": []})
    dup = dict(SMALL, checks=SMALL["checks"] + [SMALL["checks"][0]])
    with pytest.raises(suite.ConfigError):
        suite.load_config(dup)
    with pytest.raises(suite.ConfigError):
        suite.load_config(dict(SMALL, checks=[{"id": "a", "kind": "magic", "provenance": "p"}]))
    cfg = suite.load_config(None)
    assert len(cfg.checks) == len({c["id"] for c in cfg.checks})


def test_failing_check_sets_exit_code(tmp_path):
    cfg = suite.load_config({
        "schema": 1,
        "checks": [{"id": "bad", "kind": "closed_form", "family": "EX1", "params": {"n": 2}, "eps": [0.0],
                    "points": 10, "tol_fd": 1e-30, "provenance": "impossible tolerance"}],
    })
    reports, code = suite.run_suite(cfg, tmp_path, jobs=1)
    assert code == 1 and reports[0].verdict == "fail"
