import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcgo import radon
from magcgo.geometry import build_domain

C = np.array([0.2, 0.1, 0.0])
SIG = 0.15          # tails below 1e-9 on the unit sphere


def gauss(x):
    return 2.0 * np.exp(-np.sum((x - C) ** 2, -1) / (2 * SIG**2))


def gauss_radon(family):
    # plane integral of the 3D Gaussian: 2 * 2 pi sigma^2 exp(-(s - n.c)^2 / (2 sigma^2))
    s = family.offsets[None, :] - (family.normals @ (C - family.center))[:, None]
    return 2.0 * 2 * np.pi * SIG**2 * np.exp(-s**2 / (2 * SIG**2))


@pytest.fixture(scope="module")
def small_family(ball):
    return radon.hemisphere_family(ball, 12, 12, 48)


def test_family_weights_and_basis(small_family):
    assert small_family.weights.sum() == pytest.approx(2 * np.pi)
    m1, m2 = small_family.basis()
    n = small_family.normals
    assert np.allclose(np.cross(m1, m2), n)
    assert np.allclose(np.sum(m1 * n, 1), 0)


def test_coverage_error(ball):
    with pytest.raises(radon.CoverageError):
        radon.hemisphere_family(ball, 3, 3, 16)
    fam = radon.hemisphere_family(ball, 4, 4, 16)
    sub = radon.PlaneFamily(fam.normals[:8], fam.weights[:8], fam.offsets, fam.center)
    with pytest.raises(radon.CoverageError):
        radon.fbp(sub, np.zeros((8, 16)), np.zeros((1, 3)))


def test_plane_integrals_match_analytic(ball, small_family):
    num = radon.plane_integrals(ball, small_family, lambda p, m1, m2: gauss(p))[..., 0]
    ref = gauss_radon(small_family)
    assert np.max(np.abs(num - ref)) / np.max(ref) < 2e-3


def test_fbp_of_analytic_sinogram(ball):
    fam = radon.hemisphere_family(ball, 24, 24, 64)
    x, mask = radon.reconstruction_grid(ball, 24)
    rec = radon.fbp(fam, gauss_radon(fam), x)
    assert radon.relative_l2(rec, gauss(x), mask) < 0.03


def test_zero_data_gives_zero(small_family):
    x = np.random.default_rng(0).normal(size=(10, 3)) * 0.3
    assert np.allclose(radon.fbp(small_family, np.zeros((144, 48)), x), 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 3.0))
def test_ramp_filter_on_gaussian(width):
    # -d^2/ds^2 exp(-s^2 / (2 w^2)) = (1/w^2 - s^2/w^4) exp(-s^2 / (2 w^2))
    s = np.linspace(-20, 20, 512)
    g = np.exp(-s**2 / (2 * width**2))
    exact = (1 / width**2 - s**2 / width**4) * g
    assert np.max(np.abs(radon.ramp_filter(g, s[1] - s[0], taper=False).real - exact)) < 1e-6


def test_central_difference_linear():
    s = np.arange(10.0)
    d = radon.central_difference(3 * s[None], 1.0, offset=2)
    assert np.allclose(d[0, 2:-2], 3)


def test_curl_sinograms_of_gradient_vanish(ball, small_family):
    # V = grad(chi) with chi compactly supported: tangential functionals of V have zero curl data
    def field(p):
        return -(p - C) / SIG**2 * gauss(p)[..., None]
    M = radon.tangential_functionals(ball, small_family, field)
    size = radon.plane_integrals(ball, small_family,
                                 lambda p, m1, m2: np.linalg.norm(field(p), axis=-1))
    assert np.max(np.abs(M)) < 1e-6 * np.max(size)
    sinos = radon.curl_sinograms(small_family, M)
    assert max(np.max(np.abs(s)) for s in sinos) < 1e-4 * np.max(size)
