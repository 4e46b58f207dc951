import json

import pytest

from conftest import repeater_dict
from opaqnet import cli


def run(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def model_file(tmp_path):
    p = tmp_path / "repeater.json"
    p.write_text(json.dumps(repeater_dict()), encoding="utf-8")
    return p


def test_verify_exit_codes(tmp_path, model_file):
    out = tmp_path / "v.json"
    assert run("verify", model_file, "--target", "O_fg", "--epsilon", "0.05", "--out", out) == cli.EXIT_VIOLATION
    body = read(out)
    assert body["tool"] == "opaqnet" and body["command"] == "verify" and len(body["model_sha256"]) == 64
    (v,) = body["report"]["per_observation"]
    assert v["obs"] == "O_fg" and v["p0"] == "1/1" and v["p1"] == "1/1"
    assert run("verify", "repeater", "--target", "O_fg", "--epsilon", "0.5") == cli.EXIT_OK


def test_verify_structural_violation(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "repeater", "--target", "req≺fail", "--out", out) == cli.EXIT_VIOLATION
    (v,) = read(out)["report"]["per_observation"]
    assert v["leakage"] == pytest.approx(1.0)


def test_malformed_model(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"control_places": [', encoding="utf-8")
    assert run("verify", bad) == cli.EXIT_ERROR
    assert "line 1" in capsys.readouterr().err
    assert run("verify", tmp_path / "missing.json") == cli.EXIT_ERROR
    assert run("verify", "repeater", "--epsilon", "2") == cli.EXIT_ERROR
    assert run("verify", "repeater", "--target", "O_none") == cli.EXIT_ERROR


def test_deterministic_modulo_timestamp(tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("verify", "repeater", "--out", a) == run("verify", "repeater", "--out", b, "--jobs", "2")
    monkeypatch.setenv("OPAQNET_JOBS", "3")
    c = tmp_path / "c.json"
    run("verify", "repeater", "--out", c)
    da, db, dc = read(a), read(b), read(c)
    for d in (da, db, dc):
        d.pop("timestamp")
    assert da == db == dc


def test_enforce(tmp_path):
    assert run("enforce", "repeater", "--target", "O_fg", "--out", tmp_path) == cli.EXIT_OK
    pol = read(tmp_path / "policy.json")
    assert pol["success"]
    (mu,) = pol["policy"]["mu"]
    assert mu["p"] == "9/10"
    audit = read(tmp_path / "audit.json")
    assert audit["epsilon"] == 0.05 and audit["K"] == 8


def test_enforce_failures(tmp_path):
    argv = ["enforce", "repeater", "--target", "O_fg", "--catalog", "none", "--uncontrollable", "t_pur_sec"]
    assert run(*argv) == cli.EXIT_SYNTHESIS
    assert run("enforce", "repeater", "--target", "O_fg", "--K", "0") == cli.EXIT_SYNTHESIS
    assert run("enforce", "repeater", "--uncontrollable", "t_nope") == cli.EXIT_ERROR


def test_enforce_needs_architecture(tmp_path):
    d = repeater_dict()
    d.pop("architecture")
    p = tmp_path / "m.json"
    p.write_text(json.dumps(d), encoding="utf-8")
    assert run("enforce", p) == cli.EXIT_ERROR
    arch = tmp_path / "arch.json"
    arch.write_text(json.dumps(repeater_dict()["architecture"]), encoding="utf-8")
    assert run("enforce", p, "--target", "O_fg", "--arch", arch, "--out", tmp_path) == cli.EXIT_OK


def test_certify_and_check(tmp_path):
    assert run("certify", "repeater", "--target", "O_fg", "--out", tmp_path) == cli.EXIT_OK
    cert = read(tmp_path / "cert.json")
    classes = {(c["observation"], c["secret_bit"]): c["class"] for c in cert["certificates"]}
    assert classes == {("O_fg", 0): "pure-stabilizer", ("O_fg", 1): "maximally-mixed"}
    assert cert["zero_leakage"] == [{"obs": "O_fg", "alpha": None}]
    assert run("check-cert", tmp_path / "cert.json", tmp_path / "report.json") == cli.EXIT_OK

    cert["certificates"][0]["generators"] = ["-Z"]
    cert["certificates"][0]["raw_coefficients"] = {}
    (tmp_path / "bad.json").write_text(json.dumps(cert), encoding="utf-8")
    assert run("check-cert", tmp_path / "bad.json", tmp_path / "report.json") == cli.EXIT_ERROR


def test_certify_under_policy(tmp_path):
    pol = {"delta": [], "mu": [{"scope": "all", "mask": "t_mask", "registers": ["qM"], "p": "1", "channel": "twirl"}]}
    (tmp_path / "pol.json").write_text(json.dumps(pol), encoding="utf-8")
    rc = run("certify", "repeater", "--target", "O_fg", "--policy", tmp_path / "pol.json", "--out", tmp_path)
    assert rc == cli.EXIT_OK
    assert read(tmp_path / "cert.json")["zero_leakage"] == [{"obs": "O_fg", "alpha": "1/1"}]
    pol["mu"][0]["scope"] = "*"
    (tmp_path / "pol.json").write_text(json.dumps(pol), encoding="utf-8")
    assert run("certify", "repeater", "--policy", tmp_path / "pol.json", "--out", tmp_path) == cli.EXIT_ERROR


def test_oracle(capsys):
    assert run("oracle", "--cases", "30", "--toy-nets", "3") == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "30/30 pass" in out and "3/3 toy nets agree" in out


def test_bench(tmp_path, capsys):
    assert run("bench", "--m", "0,2", "--repeat", "1", "--min-time", "0", "--out", tmp_path) == cli.EXIT_OK
    rows = (tmp_path / "bench.csv").read_text().splitlines()
    assert rows[0].startswith("m,n_seq") and [r.split(",")[1] for r in rows[1:]] == ["1", "10"]
    assert read(tmp_path / "bench_plot.json")["rows"][1]["agree"]
    assert run("bench", "--m", "x") == cli.EXIT_ERROR
    assert run("bench", "--kernels", "--qubits", "8", "--rounds", "50") == cli.EXIT_OK


def test_fmt(tmp_path, model_file):
    out = tmp_path / "canon.json"
    assert run("fmt", model_file, "--out", out) == cli.EXIT_OK
    assert run("fmt", out, "--check") == cli.EXIT_OK
    assert run("fmt", model_file, "--check") == cli.EXIT_ERROR


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2
