import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcgo import recovery as rc
from magcgo.forward import Potentials, gauge_transform

X0 = np.array([1.5, 0.0, 0.0])


@pytest.fixture(scope="module")
def trivial(ball, pot):
    return rc.prepare(ball, X0, pot, pot, 0.25)


@pytest.fixture(scope="module")
def gauge(ball, pot):
    psi = "0.5*(1 - x1**2 - x2**2 - x3**2)*x1"
    return rc.prepare(ball, X0, pot, gauge_transform(pot, psi, ball), 0.25)


def test_identity_trivial_pair(trivial):
    r = rc.evaluate_identity(trivial, 0.4)
    assert abs(r.lhs) < 1e-10 and abs(r.rhs_zeroth) < 1e-10 and abs(r.rhs_first) < 1e-10
    d = r.as_dict()
    assert set(d) >= {"lhs_boundary", "rhs_zeroth", "relative_residual"}


def test_amplitude_product_cancels_for_equal_A(trivial):
    _, cancel = rc.q_moments_boundary(trivial, rc.legendre_moments(trivial, 0), 0.4)
    assert cancel < 1e-8


def test_q_needs_equal_magnetic_potentials(gauge):
    with pytest.raises(rc.PreconditionError) as err:
        rc.q_moments_boundary(gauge, rc.legendre_moments(gauge, 0), 0.4)
    assert err.value.code == "magnetic_potentials_differ"


def test_plane_functional_of_gradient_vanishes(gauge):
    lo, hi = rc.theta_window(gauge)
    for th in np.linspace(lo, hi, 7)[1:-1]:
        sl = rc.make_slice(gauge, th, 64)
        val, size = rc.plane_functional_A(gauge, sl)
        assert abs(val) <= 1e-6 * size


def test_theta_window_brackets_nonempty_slices(gauge):
    lo, hi = rc.theta_window(gauge)
    assert hi > lo
    rc.make_slice(gauge, 0.5 * (lo + hi), 32)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_extrapolate_exact_for_quadratics(a, b, c):
    hs = [0.4, 0.3, 0.2]
    v = [a + b * h + c * h * h for h in hs]
    lim, _ = rc.extrapolate(hs, v)
    assert lim == pytest.approx(a, abs=1e-9)


def test_extrapolate_needs_three_points():
    with pytest.raises(ValueError):
        rc.extrapolate([0.1, 0.2], [1, 2])


@pytest.mark.parametrize("j,k", [(0, 0), (1, 1), (2, 2), (0, 2), (1, 3), (3, 4)])
def test_legendre_moments_are_biorthogonal(j, k):
    m = [rc.LegendreMoment(0.3, 0.7, d) for d in range(5)]
    t, w = np.polynomial.legendre.leggauss(40)
    th = 0.3 + 0.7 * t
    val = np.sum(0.7 * w * m[j](th) * m[k].dual(th))
    assert val == pytest.approx(1.0 if j == k else 0.0, abs=1e-12)


def test_plane_integral_set_csv(tmp_path):
    s = rc.PlaneIntegralSet(provenance="boundary_data")
    s.add(0.1, "f0", 1 + 2j, 3 - 1j)
    s.add(0.2, "f0", 0.5, -4j)
    assert s.max_abs() == (pytest.approx(abs(1 + 2j)), pytest.approx(4.0))
    s.to_csv(tmp_path / "p.csv")
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0][0] == "theta" and rows[1][-1] == "boundary_data" and len(rows) == 3
