import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_regen.bound_verifier import divergence_certificate, suite_pair
from orlicz_regen.errors import BuildError, ConfigError
from orlicz_regen.tower_chain import (
    Tower,
    TowerAtom,
    TowerChainSpec,
    build,
    geometric_tower,
    random_tower,
    single_atom,
    stationary_F_lower_bound,
    weak_opt_nu_spec,
    weak_opt_pi_spec,
)
from orlicz_regen.young_algebra import Power, rho_of, zeta_of

TWO = TowerChainSpec([TowerAtom("a", 0.5, 1.0, 1), TowerAtom("b", 0.5, -2.0, 2)])


def test_two_atom_exact_laws():
    _, laws = build(TWO)
    assert laws.R == pytest.approx(4 / 3)
    assert laws.nu == pytest.approx({"a": 2 / 3, "b": 1 / 3})
    assert laws.pi_C == pytest.approx(0.75)
    assert laws.E_nu_tau_plus_1 == pytest.approx(4 / 3)
    # S = f~ h under nu: 1 w.p. 2/3, -4 w.p. 1/3
    assert laws.S_law_under_nu.mean() == pytest.approx(-2 / 3)
    assert laws.E_nu_S_sq() == pytest.approx(6.0)
    assert laws.E_pi_f() == pytest.approx(-0.5)


def test_two_atom_stationary_states():
    _, laws = build(TWO)
    st_law = laws.tower.stationary_states().as_dict()
    assert st_law == pytest.approx({("a", 1): 0.5, ("b", 1): 0.25, ("b", 2): 0.25})
    assert laws.tower.stationarity_error() < 1e-15


def test_single_atom_lower_bound():
    _, laws = build(single_atom(3), check_ergodic=False)
    bound, exact = stationary_F_lower_bound(laws, lambda x: x**2)
    # [DERIVED] S from pi is 3, 2, 1 with mass 1/3 each; bound 1/2 (3/2)^2
    assert exact == pytest.approx(14 / 3)
    assert bound == pytest.approx(1.125)


def test_periodic_tower_needs_explicit_opt_out():
    with pytest.raises(BuildError):
        build(single_atom(3))
    build(single_atom(3), check_ergodic=False)


def test_spec_validation():
    with pytest.raises(BuildError):
        TowerChainSpec([TowerAtom("a", 0.5, 1.0, 1)]).validate()
    with pytest.raises(BuildError):
        TowerChainSpec([TowerAtom("a", 0.5, 1.0, 1), TowerAtom("a", 0.5, 1.0, 2)]).validate()
    with pytest.raises(BuildError):
        TowerChainSpec([TowerAtom("a", 1.0, 1.0, 0)]).validate()


def test_spec_config_and_csv_roundtrip(tmp_path):
    cfg = TWO.to_config()
    assert TowerChainSpec.from_config(cfg) == TWO
    p = tmp_path / "spec.csv"
    TWO.to_csv(p)
    assert TowerChainSpec.from_csv(p) == TWO
    with pytest.raises(ConfigError):
        TowerChainSpec.from_config({"atoms": [{"label": "a"}]})


def test_geometric_tower_is_centred_exactly():
    _, laws = build(geometric_tower())
    assert laws.E_pi_f() == 0.0


def test_exact_laws_csv(tmp_path):
    _, laws = build(TWO)
    p = tmp_path / "laws.csv"
    laws.to_csv(p)
    assert len(p.read_text().splitlines()) > 1


@given(seed=st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_occupation_identity_random_towers(seed):
    spec = random_tower(np.random.default_rng(seed))
    chain, laws = build(spec)
    t = laws.tower
    # E_nu(tau + 1) = 1 / (delta pi(C)) = R, and Pitman for f: E_nu S = R E_pi f
    assert laws.E_nu_tau_plus_1 == pytest.approx(chain.occupation_factor(), rel=1e-12)
    assert laws.S_law_under_nu.mean() == pytest.approx(laws.R * laws.E_pi_f(), rel=1e-10, abs=1e-12)
    assert t.stationarity_error() < 1e-12


@given(seed=st.integers(0, 2**32), start=st.sampled_from(["nu", "pi"]), n=st.integers(1, 80))
@settings(max_examples=30, deadline=None)
def test_path_decomposition_reconstructs(seed, start, n):
    spec = random_tower(np.random.default_rng(seed))
    t = Tower(spec)
    d = t.path_sums(n, 50, np.random.default_rng(seed + 1), start=start, trunc=2.0)
    np.testing.assert_allclose(d["head"] + d["blocks"] - d["over"], d["total"], rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(d["small"] + d["large"], d["blocks"])
    assert np.all(np.abs(d["total"]) <= d["head_abs"] + np.abs(d["blocks"]) + d["over_abs"] + 1e-9)


@given(seed=st.integers(0, 2**32), start=st.sampled_from(["nu", "pi"]), n=st.integers(1, 200))
@settings(max_examples=20, deadline=None)
def test_integer_valued_reconstruction_is_exact(seed, start, n):
    t = Tower(geometric_tower(12, values=(3.0, -2.0)))
    d = t.path_sums(n, 100, np.random.default_rng(seed), start=start)
    np.testing.assert_array_equal(d["head"] + d["blocks"] - d["over"], d["total"])


@given(seed=st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_path_sums_agree_with_path_values(seed):
    spec = random_tower(np.random.default_rng(seed))
    t = Tower(spec)
    v = t.path_values(40, np.random.default_rng(seed), start="pi")
    assert v.shape == (40,)
    assert set(np.unique(v)) <= set(t.f_tilde.tolist())


@given(seed=st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_stationary_lower_bound_property(seed):
    _, laws = build(random_tower(np.random.default_rng(seed)))
    for F in (lambda x: x, lambda x: x**2, lambda x: np.expm1(np.minimum(x, 50.0))):
        bound, exact = stationary_F_lower_bound(laws, F)
        assert bound <= exact * (1 + 1e-12) + 1e-12


def test_weak_opt_nu_refutes_smaller_candidate():
    phi, psi = suite_pair("x2_x4")
    con = weak_opt_nu_spec(phi, psi, Power(2.5))
    assert con.refuted and con.p_sum == pytest.approx(1.0, rel=1e-9)
    cert = divergence_certificate(con, M=1e6, term_budget=200)
    assert cert.exceeded and cert.n_terms <= 200


def test_weak_opt_nu_true_rho_not_refuted():
    phi, psi = suite_pair("x2_x4")
    con = weak_opt_nu_spec(phi, psi, rho_of(phi, psi))
    assert not con.refuted
    assert con.message == "candidate not refuted at budget"


def test_weak_opt_pi_mirror():
    phi, psi = suite_pair("x2_x4")
    con = weak_opt_pi_spec(phi, psi, Power(5.5))
    assert con.refuted
    assert divergence_certificate(con, M=1e6, term_budget=200).exceeded
    assert not weak_opt_pi_spec(phi, psi, zeta_of(phi, psi)).refuted


def test_weak_opt_spec_is_buildable():
    phi, psi = suite_pair("x2_x4")
    con = weak_opt_nu_spec(phi, psi, Power(2.5), n_max=30)
    spec = con.spec()
    spec.validate()
    assert math.isclose(sum(a.alpha for a in spec.atoms), 1.0, rel_tol=1e-12)
