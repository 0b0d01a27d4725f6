import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_regen import limit_experiments as le
from orlicz_regen.errors import PreconditionError
from orlicz_regen.split_chain import finite_chain
from orlicz_regen.tower_chain import build, geometric_tower


@pytest.fixture(scope="module")
def geo():
    return build(geometric_tower())


def test_block_variance_exact_on_geometric_tower(geo):
    chain, laws = geo
    g, _ = le.centered(chain)
    v = le.block_variance(chain, g, n_blocks=20000, seed=0)
    # centred symmetric f: sigma^2 = delta pi(C) E_nu S^2 and E s1 s2 = 0
    want = chain.delta * chain.pi_C * laws.E_nu_S_sq()
    assert v.exact == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(2.0, rel=1e-5)
    assert abs(v.sigma_f_sq - want) < 5 * v.stderr


def test_centered_needs_exact_law(geo):
    chain, _ = geo
    g, mu = le.centered(chain)
    assert mu == 0.0
    P = np.array([[0.5, 0.5], [0.5, 0.5]])
    fc = finite_chain(P, [0])
    fc.pi_exact = None
    with pytest.raises(PreconditionError):
        le.centered(fc, lambda s: float(s))


def test_clt_small_run_and_determinism(geo):
    chain, _ = geo
    a = le.clt_experiment(chain, n_values=(500,), replicas=300, seed=4, sigma_blocks=5000)
    b = le.clt_experiment(chain, n_values=(500,), replicas=300, seed=4, sigma_blocks=5000, workers=2)
    assert a.to_json() == b.to_json()
    assert 0.0 <= a.ks_distance[0] < 0.2
    assert a.rows()[0]["n"] == 500


def test_clt_generic_chain():
    P = np.array([[0.6, 0.4], [0.3, 0.7]])
    chain = finite_chain(P, [0, 1])
    r = le.clt_experiment(chain, lambda s: float(s), n_values=(200,), replicas=200, seed=1, sigma_blocks=4000)
    assert r.sigma_f_sq > 0 and r.ks_distance[0] < 0.25


def test_lil_precondition(geo):
    chain, _ = geo
    with pytest.raises(PreconditionError):
        le.lil_statistic(chain, n_max=5, replicas=2, seed=0)


def test_lil_small(geo):
    chain, _ = geo
    r = le.lil_statistic(chain, n_max=2000, replicas=20, seed=2, sigma_blocks=5000)
    assert len(r.statistic) == 20 and r.quantiles["5"] <= r.quantiles["95"]


def test_sup_normal_distance_point_mass():
    assert le.sup_normal_distance(np.zeros(10), 1.0) == pytest.approx(0.5)


def test_berry_esseen_slope_fit(geo):
    chain, _ = geo
    r = le.berry_esseen_experiment(chain, n_values=(100, 400), replicas=500, seed=3, sigma_blocks=5000)
    d = np.log(r.delta_n)
    assert r.slope == pytest.approx((d[1] - d[0]) / math.log(4.0), rel=1e-9)


@given(t1=st.floats(0, 500), t2=st.floats(0, 500), start=st.sampled_from(["nu", "pi"]))
@settings(max_examples=50, deadline=None)
def test_tail_bound_nonincreasing_in_t(t1, t2, start):
    lo, hi = sorted((t1, t2))
    args = (1.0, 1000, 2.47, 1.44, 2.0, 0.5, start)
    assert le.tail_bound_value(hi, *args) <= le.tail_bound_value(lo, *args) + 1e-15
    assert le.tail_bound_value(lo, *args) <= 1.0


def test_stationary_bound_has_extra_term():
    c_nu = le.tail_components(10.0, 1.0, 1000, 2.0, 1.0, 1.0, 0.5, "nu")
    c_pi = le.tail_components(10.0, 1.0, 1000, 2.0, 1.0, 1.0, 0.5, "pi")
    assert set(c_pi) - set(c_nu) == {"stretched_tau"}
    # log||tau+1|| below 1 is floored at 1
    small = le.tail_components(10.0, 1.0, 1000, 1.5, 1.0, 1.0, 0.5, "pi")["stretched_tau"]
    assert small == pytest.approx(math.exp(-(10.0**0.5) / (1.5**0.5 * 1.0)))


def test_fit_tail_K_is_minimal():
    t = np.linspace(0, 50, 11)
    emp = {"nu": np.exp(-t / 20.0)}
    args = (1000, 2.0, 1.0, 1.0, 0.5)
    K = le.fit_tail_K(t, emp, *args)
    assert np.all(le.tail_bound_value(t, K, *args, "nu") >= emp["nu"])
    assert not np.all(le.tail_bound_value(t, K * 0.999, *args, "nu") >= emp["nu"])


def test_tail_experiment_small(geo, tmp_path):
    chain, _ = geo
    r = le.tail_bound_experiment(chain, n=200, replicas=2000, seed=5)
    for s in ("nu", "pi"):
        assert r.dominates[s]
        assert r.decomposition[s]["reconstruction_exact"] and r.decomposition[s]["triangle_holds"]
    assert r.gamma == 0.5
    le.write_rows_csv(r.rows(), tmp_path / "tail.csv")
    assert (tmp_path / "tail.csv").read_text().startswith("t,empirical_nu,bound_nu")
