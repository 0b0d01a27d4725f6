import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_regen.errors import PreconditionError
from orlicz_regen.young_algebra import (
    INF,
    Barrier,
    ExpPower,
    Linear,
    Power,
    PowerLog,
    conjugate,
    from_config,
    improvement_factor,
    kappa_of,
    rho_of,
    tabulate,
    tilde_phi,
    zeta_of,
)
from orlicz_regen.young_algebra.checks import builtin_pair, check_monotone_convex, log_grid, run_builtin_checks
from orlicz_regen.young_algebra.closed_forms import CASES, closed_form_lookup, fit_case
from orlicz_regen.young_algebra.domination import GridSpec, dominates, equivalent, normalize_assumption_A


def grid_sup(fn, y):
    return float(np.max(fn(y)))


Y = np.linspace(1e-6, 5.0, 2_000_001)


# basic families


def test_power_values_and_inverse():
    f = Power(3.0)
    assert f(2.0) == pytest.approx(8.0, rel=1e-14)
    assert f.inverse(27.0) == pytest.approx(3.0, rel=1e-14)
    assert f(0.0) == 0.0


def test_exp_power_alpha_one_is_expm1():
    f = ExpPower(1.0)
    x = np.array([1e-8, 0.5, 3.0, 20.0])
    np.testing.assert_allclose(f(x), np.expm1(x), rtol=1e-12)


def test_exp_power_patch_is_convex_for_small_alpha():
    f = ExpPower(0.5)
    assert check_monotone_convex(f, np.geomspace(1e-4, 1e3, 400))["holds"]
    raw = ExpPower(0.5, patch=False)
    # agrees with the formula far from the origin
    assert f(100.0) == pytest.approx(raw(100.0), rel=1e-12)


def test_barrier_is_generalized():
    b = Barrier(2.0)
    assert b(1.5) == 0.0
    assert b(2.5) == INF
    assert b.is_generalized


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        Power(2.0)(-1.0)


@given(p=st.floats(1.0, 6.0), y=st.floats(1e-6, 1e6))
@settings(max_examples=60, deadline=None)
def test_power_inverse_roundtrip(p, y):
    f = Power(p)
    assert f(f.inverse(y)) == pytest.approx(y, rel=1e-10)


@given(a=st.floats(0.3, 3.0), y=st.floats(1e-4, 1e8))
@settings(max_examples=60, deadline=None)
def test_exp_power_inverse_roundtrip(a, y):
    f = ExpPower(a)
    assert f(f.inverse(y)) == pytest.approx(y, rel=1e-8)


@given(p=st.floats(1.0, 4.0), c=st.floats(0.0, 3.0), y=st.floats(1e-3, 1e8))
@settings(max_examples=40, deadline=None)
def test_power_log_inverse_roundtrip(p, c, y):
    f = PowerLog(p, c)
    assert f(f.inverse(y)) == pytest.approx(y, rel=1e-8)


def test_config_roundtrip():
    for f in (Power(2.5, 3.0), ExpPower(0.7), PowerLog(2.0, 1.0), Barrier(4.0), Linear(2.0)):
        g = from_config(f.to_config())
        x = np.geomspace(0.01, 50, 20)
        np.testing.assert_allclose(np.asarray(g(x)), np.asarray(f(x)), rtol=1e-14)


def test_from_config_errors():
    with pytest.raises(PreconditionError):
        from_config({"family": "nope"})
    with pytest.raises(PreconditionError):
        from_config({"family": "power"})


# conjugates


def test_power_conjugate_closed_form():
    # (x^2)* = y^2 / 4
    c = conjugate(Power(2.0))
    assert c(3.0) == pytest.approx(2.25, rel=1e-14)


def test_linear_conjugate_is_barrier():
    c = conjugate(Linear(1.0))
    assert c(0.5) == 0.0 and c(1.5) == INF


def test_exp_conjugate_matches_grid():
    # [DERIVED] (e^x - 1)*(y) = y log y - y + 1 for y >= 1
    c = conjugate(ExpPower(1.0))
    for y in (1.5, 3.0, 10.0):
        assert c(y) == pytest.approx(y * math.log(y) - y + 1.0, rel=1e-8)
    assert c(0.5) == 0.0


@given(x=st.floats(0.01, 20.0), y=st.floats(0.01, 20.0))
@settings(max_examples=60, deadline=None)
def test_young_inequality(x, y):
    f = ExpPower(1.0)
    c = conjugate(f)
    assert x * y <= f(x) + c(y) + 1e-9 * (1 + x * y)


# rho and zeta


def test_rho_x2_x4_at_one():
    # [DERIVED] brute-force grid sup of y - y^3
    brute = grid_sup(lambda y: y - y**3, Y)
    val = rho_of(Power(2.0), Power(4.0))(1.0)
    assert val == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)), abs=1e-6)
    assert val == pytest.approx(brute, abs=1e-6)


def test_zeta_x2_x4_at_one():
    brute = grid_sup(lambda y: y**2 - y**3, Y)
    val = zeta_of(Power(2.0), Power(4.0))(1.0)
    assert val == pytest.approx(4.0 / 27.0, abs=1e-6)
    assert val == pytest.approx(brute, abs=1e-6)


def test_rho_power_pair_scaling():
    # rho_{x^2,x^4}(x) = sup y x^2 y - y^3 = 2/(3 sqrt 3) x^3
    rho = rho_of(Power(2.0), Power(4.0))
    for x in (0.1, 2.0, 50.0):
        assert rho(x) == pytest.approx(2.0 / (3.0 * math.sqrt(3.0)) * x**3, rel=1e-8)


def test_rho_requires_normalized_psi():
    with pytest.raises(PreconditionError):
        rho_of(Power(2.0), ExpPower(1.0))
    rho_of(Power(2.0), normalize_assumption_A(ExpPower(1.0), with_witness=False))


def test_zeta_infinite_when_psi_too_weak():
    # psi(y)/y = y cannot beat phi(xy) = x^2 y^2
    z = zeta_of(Power(2.0), Power(2.0))
    assert z(2.0) == INF


@given(x1=st.floats(0.05, 100.0), x2=st.floats(0.05, 100.0))
@settings(max_examples=30, deadline=None)
def test_rho_is_monotone(x1, x2):
    rho = rho_of(Power(2.0), Power(5.0))
    lo, hi = sorted((x1, x2))
    assert rho(lo) <= rho(hi) * (1 + 1e-10)


def test_rho_and_zeta_convex():
    phi, psi, _ = builtin_pair("x2_exp1")
    x = np.geomspace(0.05, 100, 200)
    assert check_monotone_convex(rho_of(phi, psi), x)["holds"]
    assert check_monotone_convex(zeta_of(phi, psi), x)["holds"]


# tabulation, domination, normalization


def test_tabulation_exact_for_power():
    t = tabulate(Power(3.0))
    x = np.geomspace(1e-3, 1e6, 50)
    np.testing.assert_allclose(t(x), x**3, rtol=1e-9)


def test_domination_powers():
    assert dominates(Power(2.0), Power(3.0)).holds
    w = dominates(Power(3.0), Power(2.0))
    assert not w.holds and w.max_violation > 1.0


def test_equivalence_of_scaled_power():
    a, b = equivalent(Power(2.0), Power(2.0, 7.0))
    assert a.holds and b.holds


def test_normalization_modes():
    n = normalize_assumption_A(ExpPower(1.0), with_witness=False)
    assert n(1.0) >= 1.0 - 1e-12
    assert n(1e-6) / 1e-6 < 1e-5
    # already normalized functions are untouched
    assert normalize_assumption_A(Power(4.0), with_witness=False)(3.0) == pytest.approx(81.0)


def test_improvement_factor_linear_phi():
    # g(r) = sup_x x / phi^{-1}(phi(x)/r) = r for phi linear
    assert improvement_factor(Linear(1.0), 4.0) == pytest.approx(4.0, rel=1e-9)


def test_tilde_phi_power_case():
    # psi = x^3, rho = x^2: phi ~ x^{3*2/(3+2-1)} = x^1.5
    phi = tilde_phi(Power(3.0), Power(2.0))
    u = np.log(np.array([10.0, 1e3]))
    slope = float(np.diff(phi.logf(u))[0] / np.diff(u)[0])
    assert slope == pytest.approx(1.5, abs=0.02)


def test_kappa_inverse_factorization():
    zeta = Power(2.0)
    psi = Power(3.0)
    kappa, _ = kappa_of(zeta, psi)
    # kappa^{-1}(y) = sqrt(y) * sqrt(y) = y, so kappa is the identity
    for y in (0.5, 10.0, 1e4):
        assert kappa(y) == pytest.approx(y, rel=1e-6)


# closed forms and checks


def test_twelve_cases_registered():
    assert sorted(CASES) == sorted([f"{k}{i}" for k in ("nu", "pi") for i in range(1, 7)])
    with pytest.raises(PreconditionError):
        closed_form_lookup("nu7")


def test_case_parameter_range_enforced():
    with pytest.raises(PreconditionError):
        CASES["nu1"].expected({"p": 3.0, "r": 2.0})


def test_fit_power_case_nu1():
    r = fit_case("nu1")
    assert r["expected"]["exponent"] == pytest.approx(3.0)
    assert abs(r["exponent_error"]) < 0.01


def test_pi3_log_power_approaches_formula_far_out():
    # the log power of zeta_{x^2, e^x-1} creeps towards 2 on very long ranges
    near = fit_case("pi3", x_lo=10.0, x_hi=1e3)["fitted"]["log_power"]
    far = fit_case("pi3", x_lo=1e50, x_hi=1e100)["fitted"]["log_power"]
    assert near < far < 2.0
    assert far > 1.85


def test_builtin_checks_report_structure():
    rows = run_builtin_checks(n=20)
    assert {r["check"] for r in rows} == {"inverse_sandwich", "nu_legendre_sandwich", "pi_legendre_sandwich",
                                          "auxiliary_estimate"}
    assert all(r["n_points"] == 20 for r in rows)


def test_log_grid_endpoints():
    g = log_grid(0.1, 100.0, 200)
    assert g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(100.0) and g.size == 200


def test_dominates_grid_spec_recorded():
    w = dominates(Power(2.0), Power(2.5), GridSpec(1.0, 1e10, 50))
    assert w.to_dict()["search_budget"]["x"] == [1.0, 1e10, 50]


def test_sup_window_follows_tiny_arguments():
    # maximizers move to y ~ x^{-2} (zeta) and y ~ x (rho) as x -> 0
    u = np.array([-100.0, -60.0, -35.0])
    assert np.all(zeta_of(Power(2.0), Power(2.0)).logf(u) == INF)
    got = rho_of(Power(2.0), Power(4.0)).logf(u) - 3.0 * u
    np.testing.assert_allclose(np.exp(got), 2.0 / (3.0 * math.sqrt(3.0)), rtol=1e-8)
