import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_regen.bound_verifier import (
    PAIRS,
    divergence_certificate,
    fit_K,
    random_specs,
    run_suite,
    verify_cor_nu,
    verify_cor_pi,
    verify_thm_nu,
    verify_thm_pi,
    write_jsonl,
    write_suite_csv,
)
from orlicz_regen.errors import PreconditionError
from orlicz_regen.tower_chain import build, geometric_tower, single_atom
from orlicz_regen.young_algebra import Linear, Power, rho_of


@pytest.fixture(scope="module")
def atom3():
    return build(single_atom(3), check_ergodic=False)


def test_nu_bound_single_atom(atom3):
    # S = 3 under nu, ||tau+1|| = 3, rho_{x^2,x^2} is the barrier at 1 so ||1|| = 1
    r = verify_thm_nu(atom3, Power(2.0), Power(2.0))
    assert r.lhs == pytest.approx(3.0) and r.rhs == pytest.approx(6.0)
    assert r.ratio == pytest.approx(0.5) and r.status == "holds"


def test_pi_bound_single_atom(atom3):
    # E_pi S = (3 + 2 + 1) / 3 = 2; rhs = a (1 + pi(C) a) ||1||_zeta = 3 * 2 * 1
    r = verify_thm_pi(atom3, Linear(1.0), Power(2.0), improved=True)
    assert r.lhs == pytest.approx(2.0) and r.rhs == pytest.approx(6.0)
    assert r.extra["g"] == pytest.approx(2.0)


def test_cor_nu_single_atom(atom3):
    phi, psi = Power(2.0), Power(4.0)
    r = verify_cor_nu(atom3, psi, rho_of(phi, psi))
    # rhs = 4 * ||tau+1||_{x^4} * ||1||_rho with rho(x) = 2/(3 sqrt 3) x^3
    want = 4.0 * 3.0 * (2.0 / (3.0 * math.sqrt(3.0))) ** (1.0 / 3.0)
    assert r.rhs == pytest.approx(want, rel=1e-9)
    assert r.ratio <= 1.0


def test_cor_pi_records_needed_constant(atom3):
    r = verify_cor_pi(atom3, Power(3.0), Power(2.0), Linear(1.0))
    assert r.status == "holds" and r.extra["K_needed"] == pytest.approx(r.lhs / r.rhs)
    assert fit_K([r]) == pytest.approx(r.extra["K_needed"])


def test_cor_pi_rejects_undominated_phi(atom3):
    with pytest.raises(PreconditionError):
        verify_cor_pi(atom3, Power(3.0), Power(2.0), Power(5.0))


def test_monte_carlo_lhs_close_to_exact():
    system = build(geometric_tower())
    exact = verify_thm_nu(system, Power(2.0), Power(4.0))
    mc = verify_thm_nu(system, Power(2.0), Power(4.0), method="monte_carlo", n_blocks=20000, seed=1)
    assert abs(mc.lhs - exact.lhs) <= 4 * mc.method["stderr"]
    assert mc.rhs == exact.rhs


def test_infinite_rhs_reported():
    # zeta_{x^2, x^2}(x) = sup_y x^2 y^2 - y is infinite for every x > 0
    system = build(single_atom(2, f_tilde=2.0), check_ergodic=False)
    r = verify_thm_pi(system, Power(2.0), Power(2.0))
    assert r.status == "rhs_infinite" and r.rhs == math.inf


def test_report_json_roundtrip(atom3):
    d = json.loads(verify_thm_nu(atom3, Power(2.0), Power(2.0)).to_json())
    assert d["theorem_id"] == "nu_bound" and d["status"] == "holds"


def test_zero_lhs_gives_zero_ratio():
    system = build(single_atom(2, f_tilde=0.0), check_ergodic=False)
    r = verify_thm_nu(system, Power(2.0), Power(4.0))
    assert r.lhs == 0.0 and r.ratio == 0.0


def test_divergence_certificate_on_explicit_series():
    # sum 2^n diverges: exceeds 1e6 after 20 terms
    cert = divergence_certificate(lambda theta: (n * math.log(2.0) for n in range(1000)), M=1e6)
    assert cert.exceeded and cert.n_terms == 20
    # geometric convergent series never exceeds
    cert = divergence_certificate(lambda theta: (-n * math.log(2.0) for n in range(1000)), M=1e6, term_budget=200)
    assert cert.status == "budget_exhausted" and cert.partial_sum == pytest.approx(2.0)
    cert = divergence_certificate(lambda theta: iter([0.0, 0.0]), M=1e6)
    assert cert.status == "series_ended"


def test_random_specs_deterministic():
    a = random_specs(5, seed=3)
    b = random_specs(5, seed=3)
    assert a == b and a != random_specs(5, seed=4)


def test_suite_writes(tmp_path):
    rows = run_suite(2, seed=0, pairs=("x2_x4",), checks=("nu", "pi"))
    assert len(rows) == 4
    write_suite_csv(rows, tmp_path / "s.csv")
    write_jsonl([r["report"] for r in rows], tmp_path / "s.jsonl")
    assert len((tmp_path / "s.jsonl").read_text().splitlines()) == 4


def test_pairs_registered():
    assert set(PAIRS) == {"x2_x4", "x2_exp1", "x3_x6"}


@given(seed=st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_nu_and_pi_bounds_hold_on_random_towers(seed):
    for rep in run_suite(1, seed=seed, pairs=("x2_x4",), checks=("nu", "pi", "cor_nu")):
        assert rep["report"].status != "violated"


def test_stationary_bound_inputs_single_atom():
    # phi = x, psi = x^2, f = 1 on the single atom of height H:
    # E_pi S = (H+1)/2 and ||tau+1||_{x^2} = H
    for H in (10, 100):
        r = verify_thm_pi(build(single_atom(H), check_ergodic=False), Linear(1.0), Power(2.0))
        assert r.lhs == pytest.approx((H + 1) / 2)
        assert r.inputs["tau_plus_1_norm"] == pytest.approx(H)
