import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcgo.weights import (AngularPhase, CarlemanWeight, admissible, eikonal_residual,
                            lcw_condition_residual, project_constraint)

X0 = np.array([1.5, 0.0, 0.0])
OMEGA = np.array([-1.0, 0.2, 0.1])
points = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.asarray)


def _fd_gradient(fn, x, eps=1e-6):
    return np.array([(fn(x + eps * e) - fn(x - eps * e)) / (2 * eps) for e in np.eye(3)])


@settings(max_examples=50, deadline=None)
@given(points)
def test_phase_gradient_matches_finite_differences(x):
    ph = AngularPhase(X0, OMEGA)
    if not admissible(CarlemanWeight(X0), ph, x[None])[0]:
        return
    assert np.allclose(ph.gradient(x), _fd_gradient(ph.value, x), atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(points)
def test_weight_hessian_matches_finite_differences(x):
    w = CarlemanWeight(X0)
    fd = np.array([(w.gradient(x + 1e-6 * e) - w.gradient(x - 1e-6 * e)) / 2e-6 for e in np.eye(3)])
    assert np.allclose(w.hessian(x), fd, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(points)
def test_phase_is_harmonic_conjugate_in_3d_sense(x):
    # phi + i psi = log(t + i r): Laplacian of psi equals t / (r |y|^2)
    ph = AngularPhase(X0, OMEGA)
    if not admissible(CarlemanWeight(X0), ph, x[None])[0]:
        return
    eps = 1e-4
    lap = sum((ph.value(x + eps * e) - 2 * ph.value(x) + ph.value(x - eps * e)) / eps**2
              for e in np.eye(3))
    assert lap == pytest.approx(ph.laplacian(x), rel=1e-4, abs=1e-5)


def test_eikonal_residuals_small(rng):
    w, ph = CarlemanWeight(X0), AngularPhase(X0, OMEGA)
    x = rng.uniform(-1, 1, (1000, 3))
    x = x[admissible(w, ph, x)]
    e1, e2 = eikonal_residual(w, ph, x)
    assert np.max(np.abs(e1)) <= 1e-12 and np.max(np.abs(e2)) <= 1e-12


def test_lcw_condition(rng):
    w = CarlemanWeight(X0)
    x = rng.uniform(-1, 1, (1000, 3))
    xi = project_constraint(w, x, rng.normal(size=x.shape))
    assert np.max(np.abs(lcw_condition_residual(w, x, xi))) <= 1e-12


def test_lcw_rejects_unconstrained_xi():
    w = CarlemanWeight(X0)
    with pytest.raises(ValueError):
        lcw_condition_residual(w, np.zeros((1, 3)), np.ones((1, 3)))


def test_on_axis_point_inadmissible():
    w, ph = CarlemanWeight(X0), AngularPhase(X0, OMEGA)
    on_axis = X0 + 0.5 * OMEGA / np.linalg.norm(OMEGA)
    assert not admissible(w, ph, on_axis[None])[0]
