import json

import pytest

from orlicz_regen.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, main

SINGLE_ATOM = """
command = "verify-bounds"

[chain]
kind = "single_atom"
h = 3

[phi]
family = "power"
p = 2.0

[psi]
family = "power"
p = 2.0
"""

CLT = """
command = "clt"

[chain]
kind = "geometric"

[run]
n_values = [300]
replicas = 200
sigma_blocks = 4000
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def load(out):
    return json.loads((out / "report.json").read_text())


def test_verify_bounds_single_atom(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, SINGLE_ATOM), "--out", str(out)]) == EXIT_OK
    rep = load(out)
    assert rep["status"] == "ok"
    reports = {r["theorem_id"]: r for r in rep["result"]["reports"]}
    assert reports["nu_bound"]["ratio"] == pytest.approx(0.5)
    # zeta_{x^2,x^2} is infinite, so the stationary bound is vacuous
    assert reports["pi_bound"]["status"] == "rhs_infinite" and reports["pi_bound"]["ratio"] is None
    assert all(r["status"] != "violated" for r in reports.values())
    assert (out / "bounds.csv").exists()
    assert rep["config"]["chain"]["h"] == 3


def test_missing_seed_for_stochastic_command(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, CLT), "--out", str(out)]) == EXIT_ERROR
    err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert err["status"] == "error" and "seed" in err["message"]
    assert json.loads((out / "error.json").read_text()) == err


def test_unknown_command_and_bad_flags(tmp_path, capsys):
    assert main(["frobnicate", "--out", str(tmp_path / "a")]) == EXIT_ERROR
    assert main(["--bogus"]) == EXIT_ERROR
    assert main(["clt", "--seed", "-3", "--out", str(tmp_path / "b")]) == EXIT_ERROR


def test_invalid_config(tmp_path):
    assert main(["--config", write(tmp_path, "command = [unclosed"), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    bad_chain = SINGLE_ATOM.replace('kind = "single_atom"', 'kind = "spiral"')
    assert main(["--config", write(tmp_path, bad_chain), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    bad_family = SINGLE_ATOM.replace('family = "power"\np = 2.0\n\n[psi]', 'family = "nope"\n\n[psi]')
    assert main(["--config", write(tmp_path, bad_family), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert main(["--config", str(tmp_path / "missing.toml")]) == EXIT_ERROR


def test_same_seed_same_report(tmp_path, monkeypatch):
    cfg = write(tmp_path, CLT)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--seed", "9", "--out", str(a)]) == EXIT_OK
    monkeypatch.setenv("ORLICZ_REGEN_WORKERS", "3")
    assert main(["--config", cfg, "--seed", "9", "--out", str(b)]) == EXIT_OK
    ra, rb = load(a), load(b)
    ra.pop("timestamp"), rb.pop("timestamp")
    assert ra == rb
    assert (a / "clt.csv").read_text() == (b / "clt.csv").read_text()


def test_seed_from_config(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, 'seed = 5\n' + CLT), "--out", str(out)]) == EXIT_OK
    assert load(out)["config"]["seed"] == 5


def test_failed_soundness_check_exits_2(tmp_path):
    cfg = """
command = "tail-bound"
seed = 1
[chain]
kind = "geometric"
[run]
n = 100
replicas = 500
K = 1e-6
"""
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == EXIT_FAILED
    assert load(out)["status"] == "failed"


def test_certify_counterexample(tmp_path):
    cfg = """
command = "certify-counterexample"
[phi]
family = "power"
p = 2.0
[psi]
family = "power"
p = 4.0
[candidate]
family = "power"
p = 2.5
[run]
kind = "nu"
"""
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    cert = load(out)["result"]["certificate"]
    assert cert["exceeded"] and cert["n_terms"] <= 200
    assert (out / "partial_sums.csv").exists()


def test_compute_rho(tmp_path):
    cfg = """
[phi]
family = "power"
p = 2.0
[psi]
family = "power"
p = 4.0
[run]
x = [1.0, 2.0]
"""
    out = tmp_path / "o"
    assert main(["compute-rho", "--config", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    assert load(out)["result"]["at_1"] == pytest.approx(2.0 / 3.0 ** 1.5, abs=1e-9)


def test_pitman_check_command(tmp_path):
    cfg = """
command = "pitman-check"
seed = 3
[chain]
kind = "atoms"
atoms = [{label = "a", alpha = 0.5, f_tilde = 1.0, h = 1}, {label = "b", alpha = 0.5, f_tilde = -2.0, h = 2}]
[run]
n_blocks = 5000
"""
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    rep = load(out)["result"]
    assert rep["E_nu_tau_plus_1"] == pytest.approx(4 / 3)
    assert {c["check"] for c in rep["checks"]} == {"pitman", "block_mean"}
