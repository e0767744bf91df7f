import numpy as np
import pytest

from magcgo import cgo
from magcgo.forward import Potentials, assemble
from magcgo.geometry import ObservationPoint, build_direction_cone, normalize_frame
from magcgo.weights import AngularPhase, CarlemanWeight, admissible

X0 = np.array([1.5, 0.0, 0.0])


@pytest.fixture(scope="module")
def frame_setup(ball):
    obs = ObservationPoint(X0, 0.05)
    cone = build_direction_cone(ball, obs)
    frame = normalize_frame(obs, cone.omega0, cone)
    return cone.omega0, frame


@pytest.mark.parametrize("sign", [+1, -1])
def test_amplitude_solves_transport(ball, pot, frame_setup, sign):
    omega, frame = frame_setup
    amp = cgo.build_amplitude(pot, ball, frame, sign)
    w, ph = CarlemanWeight(X0), AngularPhase(X0, omega)
    x = np.random.default_rng(3).uniform(-0.8, 0.8, (200, 3))
    x = x[ball.contains(x) & admissible(w, ph, x)]
    assert cgo.transport_residual_3d(amp, w, ph, x) < 1e-3   # amplitude derivatives are differenced


@pytest.mark.parametrize("sign", [+1, -1])
def test_cgo_residual_is_second_order(ball, pot, frame_setup, sign):
    omega, frame = frame_setup
    w, ph = CarlemanWeight(X0), AngularPhase(X0, omega)
    op = assemble(ball, pot.with_cutoff(ball), 0.2)
    amp = cgo.build_amplitude(pot, ball, frame, sign)
    smp = cgo.sample_amplitude(amp, op.grid, ball.boundary)
    sols = [cgo.build_cgo(ball, pot, w, ph, h, sign, op, amplitude=amp, samples=smp)
            for h in (0.4, 0.2)]
    res = [s.diagnostics["residual_l2"] for s in sols]
    assert np.log2(res[0] / res[1]) > 1.8
    for s in sols:
        assert s.diagnostics["discrete_check"] < 1e-8
    rem = [s.diagnostics["remainder_h1scl"] for s in sols]
    assert max(rem) / min(rem) < 3


def test_dirichlet_remainder_mode(ball, pot, frame_setup):
    omega, frame = frame_setup
    w, ph = CarlemanWeight(X0), AngularPhase(X0, omega)
    s = cgo.build_cgo(ball, pot, w, ph, 0.3, +1, 0.25, frame=frame, remainder="dirichlet")
    assert np.allclose(s.r_boundary, 0)
    with pytest.raises(ValueError):
        cgo.build_cgo(ball, pot, w, ph, 0.3, +1, 0.25, frame=frame, remainder="other")


def test_zero_potential_amplitude_is_power_of_r(ball, frame_setup):
    # with A = 0 the amplitude is r^{-1/2} (n = 3)
    omega, frame = frame_setup
    amp = cgo.build_amplitude(Potentials.zero(), ball, frame, +1)
    x = np.array([[0.1, 0.2, 0.3], [-0.4, 0.1, 0.0]])
    y = frame.apply(x)
    r = np.hypot(y[:, 1], y[:, 2])
    assert np.allclose(amp.value(x), r ** -0.5, rtol=1e-10)


def test_non_holomorphic_gauge_rejected(ball, pot, frame_setup):
    _, frame = frame_setup
    with pytest.raises(ValueError):
        cgo.build_amplitude(pot, ball, frame, +1, gauge=lambda z, th: np.conj(z))
