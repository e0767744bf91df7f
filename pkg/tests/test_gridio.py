import numpy as np
import pytest

from magcgo.gridio import GridFormatError, read_grid, write_cube, write_grid


@pytest.mark.parametrize("dtype", [float, complex])
def test_roundtrip(tmp_path, rng, dtype):
    v = rng.normal(size=(4, 5, 6, 2)).astype(dtype)
    if dtype is complex:
        v = v + 1j * rng.normal(size=v.shape)
    v[0, 0, 0] = np.nan
    write_grid(tmp_path / "a.grid", v, 0.25, (-1, -2, -3))
    g = read_grid(tmp_path / "a.grid")
    assert g.values.dtype == np.dtype(dtype)
    assert np.array_equal(np.isnan(g.values), np.isnan(v))
    assert np.allclose(g.values[~np.isnan(v)], v[~np.isnan(v)])
    assert g.step == 0.25 and np.allclose(g.origin, [-1, -2, -3])


def test_header_is_64_bytes(tmp_path):
    write_grid(tmp_path / "b.grid", np.zeros((2, 2, 2)), 1.0, (0, 0, 0))
    raw = (tmp_path / "b.grid").read_bytes()
    assert raw[:8] == b"MSGRID01" and len(raw) == 64 + 8 * 8


def test_bad_magic(tmp_path):
    (tmp_path / "c.grid").write_bytes(b"X" * 80)
    with pytest.raises(GridFormatError):
        read_grid(tmp_path / "c.grid")


def test_truncated(tmp_path):
    write_grid(tmp_path / "d.grid", np.zeros((3, 3, 3)), 1.0, (0, 0, 0))
    raw = (tmp_path / "d.grid").read_bytes()
    (tmp_path / "d.grid").write_bytes(raw[:-8])
    with pytest.raises(GridFormatError):
        read_grid(tmp_path / "d.grid")


def test_cube_masks_outside(tmp_path):
    n = 4
    ax = np.linspace(-1, 1, n)
    x = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    mask = np.linalg.norm(x, axis=1) < 1
    write_cube(tmp_path / "e.grid", x, x[:, 0], n, mask)
    g = read_grid(tmp_path / "e.grid")
    assert np.isnan(g.values[0, 0, 0, 0])
    assert g.step == pytest.approx(2 / 3)
