import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcgo.geometry import (GeometryError, ObservationPoint, PlanarRegion, RigidMotion,
                             build_direction_cone, build_domain, icosphere, normalize_frame,
                             slice_domain, validate_observation)


def test_icosphere_counts_and_unit_norm():
    v, tri = icosphere(3)
    assert len(v) == 642 and len(tri) == 1280
    assert np.allclose(np.linalg.norm(v, axis=1), 1)


def test_icosphere_returns_copies():
    v, _ = icosphere(2)
    v[:] = 0
    assert np.allclose(np.linalg.norm(icosphere(2)[0], axis=1), 1)


def test_ball_volume_and_radii(ball):
    assert ball.volume() == pytest.approx(4 * np.pi / 3, rel=1e-3)
    assert ball.max_radius == pytest.approx(1.0)
    assert ball.min_radius == pytest.approx(1.0)


def test_ellipsoid_volume():
    d = build_domain("ellipsoid", 1.0, 0.8, 0.7)
    assert d.volume() == pytest.approx(4 * np.pi / 3 * 0.56, rel=2e-3)


def test_bumped_ball_rejects_large_bump():
    with pytest.raises(GeometryError) as err:
        build_domain("bumped_ball", 1.0, 0.3)
    assert err.value.code == "not_star_shaped"


def test_unknown_profile():
    with pytest.raises(GeometryError):
        build_domain("torus", 1.0)


def test_empty_slice_reports_code(ball):
    obs = ObservationPoint(np.array([1.5, 0.0, 0.0]), 0.05)
    cone = build_direction_cone(ball, obs)
    frame = normalize_frame(obs, cone.omega0, cone)
    with pytest.raises(GeometryError) as err:
        slice_domain(ball, frame, np.pi / 2, resolution=32)
    assert err.value.code == "empty_slice"


def test_observation_inside_hull_rejected(ball):
    with pytest.raises(GeometryError) as err:
        validate_observation(ball, ObservationPoint(np.array([0.5, 0.0, 0.0]), 0.05))
    assert err.value.code == "x0_in_convex_hull"


def test_observation_outside_accepted(ball):
    validate_observation(ball, ObservationPoint(np.array([1.5, 0.0, 0.0]), 0.05))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_ray_exit_lands_on_boundary(direction):
    d = np.asarray(direction)
    if np.linalg.norm(d) < 1e-3:
        return
    d = d / np.linalg.norm(d)
    dom = build_domain("ellipsoid", 1.0, 0.8, 0.7)
    t = dom.ray_exit(np.zeros(3), d[None], 3.0)
    assert abs(dom.level(t[:, None] * d[None])[0]) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_rigid_motion_roundtrip(x):
    obs = ObservationPoint(np.array([1.5, 0.2, -0.1]), 0.05)
    dom = build_domain("ball", 1.0)
    cone = build_direction_cone(dom, obs)
    m = normalize_frame(obs, cone.omega0, cone)
    x = np.asarray(x)[None]
    assert np.allclose(m.inverse(m.apply(x)), x)
    assert np.allclose(m.apply(obs.x0[None]), 0, atol=1e-12)
    v = m.apply_vector(cone.omega0[None])
    assert np.allclose(v, [[1, 0, 0]], atol=1e-12)


def test_disk_area_and_perimeter():
    d = PlanarRegion.disk(0j, 1.0, 256)
    assert d.area() == pytest.approx(np.pi, rel=1e-10)
    assert d.perimeter == pytest.approx(2 * np.pi, rel=1e-10)


def test_slice_is_in_upper_half_plane(ball):
    obs = ObservationPoint(np.array([1.5, 0.0, 0.0]), 0.05)
    cone = build_direction_cone(ball, obs)
    frame = normalize_frame(obs, cone.omega0, cone)
    sl = slice_domain(ball, frame, 0.0, resolution=32)
    assert np.all(sl.boundary.imag > 0)
    assert np.allclose(ball.level(sl.to_world(sl.boundary)), 0, atol=1e-8)
