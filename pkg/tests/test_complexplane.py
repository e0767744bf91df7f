import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcgo import cgo
from magcgo import complexplane as cp
from magcgo.geometry import PlanarRegion


@pytest.fixture(scope="module")
def disk():
    return PlanarRegion.disk(0j, 1.0, 512, grid=128)


def test_dbar_disk_indicator(disk):
    T = cgo.solve_dbar(np.ones(disk.cell_fraction.shape), disk)
    z = disk.grid_z[disk.mask]
    assert np.max(np.abs(T[disk.mask] - np.conj(z))) <= 0.01


def test_plemelj_jump(disk):
    f = cp.BoundaryFunction.from_function(disk, lambda w: np.exp(w) + 1 / (w - 0.3))
    inner, outer = cp.plemelj_jump(f)
    zb = disk.boundary
    assert np.max(np.abs(inner - np.exp(zb))) <= 1e-5
    assert np.max(np.abs(outer + 1 / (zb - 0.3))) <= 1e-5
    assert np.max(np.abs(inner - outer - f.values)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.complex_numbers(max_magnitude=0.5))
def test_holomorphic_moments_vanish(k, c):
    disk = PlanarRegion.disk(0j, 1.0, 256)
    f = cp.BoundaryFunction.from_function(disk, lambda z: (z - c) ** k * np.exp(z))
    assert np.max(np.abs(cp.moments(f, 8))) < 1e-10


def test_holomorphic_extend_reproduces_function(disk):
    f = cp.BoundaryFunction.from_function(disk, lambda z: np.exp(z) * z**2)
    pts = np.array([0.1 + 0.2j, -0.5j, 0.7])
    ext = cp.holomorphic_extend(f, points=pts)
    assert np.allclose(ext.interior_values, np.exp(pts) * pts**2, atol=1e-10)


def test_holomorphic_extend_rejects_conjugate(disk):
    f = cp.BoundaryFunction.from_function(disk, np.conj)
    with pytest.raises(cp.CauchyError):
        cp.holomorphic_extend(f, points=np.array([0j]))


@pytest.mark.parametrize("k", [0, 1, 3, -2])
def test_winding(k):
    disk = PlanarRegion.disk(0j, 1.0, 256)
    f = cp.BoundaryFunction.from_function(disk, lambda z: z ** k * np.exp(z / 3))
    assert cp.winding_number(f) == k


def test_boundary_values_shape_checked(disk):
    with pytest.raises(ValueError):
        cp.BoundaryFunction(disk, np.zeros(3))
