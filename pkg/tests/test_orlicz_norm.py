import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_regen.errors import PreconditionError
from orlicz_regen.orlicz_norm import AtomicDist, orlicz_norm, psi_alpha_norm, read_sample_csv
from orlicz_regen.young_algebra import Barrier, ExpPower, Linear, Power

atoms = st.lists(st.tuples(st.floats(-50, 50), st.floats(0.01, 1.0)), min_size=1, max_size=6)


def dist_of(pairs):
    v = np.array([a for a, _ in pairs])
    p = np.array([b for _, b in pairs])
    return AtomicDist(v, p / p.sum())


def test_constant_has_norm_equal_to_value():
    assert orlicz_norm(AtomicDist([3.0], [1.0]), Power(2.0)).value == pytest.approx(3.0, rel=1e-12)


def test_two_point_square_norm():
    # E (X/C)^2 = 1 with X in {0, 2} equally likely gives C = sqrt 2
    r = orlicz_norm(AtomicDist([0.0, 2.0], [0.5, 0.5]), Power(2.0))
    assert r.finite and r.value == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_barrier_norm_is_sup():
    r = orlicz_norm(AtomicDist([1.0, -3.0], [0.5, 0.5]), Barrier(1.0))
    assert r.value == pytest.approx(3.0, rel=1e-9)


def test_linear_norm_is_mean_abs():
    d = AtomicDist([1.0, -3.0, 4.0], [0.2, 0.3, 0.5])
    assert orlicz_norm(d, Linear(1.0)).value == pytest.approx(0.2 + 0.9 + 2.0, rel=1e-12)


def test_exp_norm_of_constant():
    # [DERIVED] exp(1/C) - 1 = 1 => C = 1/log 2
    r = orlicz_norm(AtomicDist([1.0], [1.0]), ExpPower(1.0))
    assert r.value == pytest.approx(1.0 / math.log(2.0), rel=1e-12)


def test_psi_alpha_norm_target_two():
    r = psi_alpha_norm([1.0, 1.0], 1.0)
    assert r.value == pytest.approx(1.0 / math.log(2.0), rel=1e-12)
    with pytest.raises(PreconditionError):
        psi_alpha_norm([1.0], 0.0)


def test_zero_law_and_sample_input():
    assert orlicz_norm(AtomicDist([0.0], [1.0]), Power(2.0)).value == 0.0
    assert orlicz_norm([2.0, 2.0], Power(3.0)).value == pytest.approx(2.0)


def test_huge_atoms_through_logs():
    r = orlicz_norm(AtomicDist.from_logs([700.0], [0.0]), Power(2.0))
    assert r.finite and r.value / math.exp(700.0) == pytest.approx(1.0, rel=1e-12)
    # E (X/C)^2 = e^{2500} / C^2 + 1 / C^2: finite norm e^{1250} beyond float range
    r = orlicz_norm(AtomicDist.from_logs([2000.0, 0.0], [-1500.0, 0.0]), Power(2.0))
    assert r.status == "overflow" and r.value == math.inf
    assert r.certificate["log_value"] == pytest.approx(1250.0, rel=1e-12)


def test_unbounded_law_is_certified_infinite():
    r = orlicz_norm(AtomicDist.from_logs([math.inf, 0.0], [math.log(0.5), math.log(0.5)]), Power(2.0))
    assert r.status == "infinite_certified"


def test_residual_is_one_at_the_norm():
    d = AtomicDist([1.0, 5.0, -2.0], [0.5, 0.25, 0.25])
    r = orlicz_norm(d, ExpPower(1.0))
    assert r.residual == pytest.approx(1.0, abs=1e-9)


def test_truncated_law_without_tail_is_lower_bound():
    d = AtomicDist([1.0, 2.0], [0.3, 0.3], truncated=True)
    r = orlicz_norm(d, Power(2.0))
    assert r.status == "budget_exhausted"
    assert r.certificate["tail_mass"] == pytest.approx(0.4)


def test_read_sample_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("x\n1.5\n-2\n")
    np.testing.assert_allclose(read_sample_csv(p), [1.5, -2.0])


def test_aggregated_merges_atoms():
    d = AtomicDist([1.0, 1.0, 2.0], [0.25, 0.25, 0.5]).aggregated()
    assert len(d) == 2 and d.probs[0] == pytest.approx(0.5)


@given(pairs=atoms, c=st.floats(0.01, 100.0))
@settings(max_examples=50, deadline=None)
def test_homogeneity(pairs, c):
    d = dist_of(pairs)
    phi = Power(2.5)
    a = orlicz_norm(d, phi).value
    b = orlicz_norm(AtomicDist(d.values * c, d.probs), phi).value
    assert b == pytest.approx(c * a, rel=1e-9, abs=1e-12)


@given(pairs=atoms)
@settings(max_examples=50, deadline=None)
def test_norm_dominates_mean_abs_for_convex_phi(pairs):
    # Jensen: phi(E|X|/C) <= E phi(|X|/C) = 1 at C = the phi-norm of X
    d = dist_of(pairs)
    phi = Power(3.0)
    n = orlicz_norm(d, phi).value
    m = float(np.sum(np.abs(d.values) * d.probs))
    assert m <= n * (1 + 1e-9) + 1e-12


@given(pairs=atoms)
@settings(max_examples=40, deadline=None)
def test_triangle_inequality_for_comonotone_sum(pairs):
    d = dist_of(pairs)
    phi = ExpPower(1.0)
    x = d.values
    y = np.abs(x) + 1.0
    nx = orlicz_norm(AtomicDist(x, d.probs), phi).value
    ny = orlicz_norm(AtomicDist(y, d.probs), phi).value
    nxy = orlicz_norm(AtomicDist(x + y, d.probs), phi).value
    assert nxy <= (nx + ny) * (1 + 1e-9)
