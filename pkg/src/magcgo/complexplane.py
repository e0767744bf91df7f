"""Cauchy integrals on closed slice curves, jump relations and holomorphic extension.

The curve is sampled at equispaced parameter values, so the trapezoidal rule
is spectrally accurate for smooth data. Near the curve, interior values use
the barycentric quotient sum(f w/(zeta - z)) / sum(w/(zeta - z)), whose
errors cancel for holomorphic data, and exterior values use the subtraction
form (1/2 pi i) int (f - f0)/(zeta - z) dzeta with f0 the nearest nodal value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PlanarRegion


class CauchyError(ValueError):
    pass


@dataclass(eq=False)
class BoundaryFunction:
    region: PlanarRegion
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, complex)
        if self.values.shape != (self.region.n_nodes,):
            raise ValueError("boundary values must match the curve node count")

    @classmethod
    def from_function(cls, region, fn):
        return cls(region, fn(region.boundary))

    @property
    def nodes(self):
        return self.region.boundary

    @property
    def weights(self):
        return self.region.arclength_weights

    @property
    def dzeta(self):
        return self.region.dzeta * self.region.dalpha

    def dalpha(self):
        """Spectral derivative of the values with respect to the curve parameter."""
        n = len(self.values)
        k = np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        return np.fft.ifft(1j * k * np.fft.fft(self.values))


def _spacing(f: BoundaryFunction):
    return float(np.max(np.abs(f.dzeta)))


def distance_to_curve(region: PlanarRegion, z):
    z = np.atleast_1d(np.asarray(z, complex))
    return np.min(np.abs(z[:, None] - region.boundary[None, :]), axis=1)


def curve_winding(region: PlanarRegion, z):
    """Winding number of the curve about each z (1 inside, 0 outside)."""
    z = np.atleast_1d(np.asarray(z, complex))
    d = region.boundary[None, :] - z[:, None]
    ang = np.angle(np.roll(d, -1, axis=1) / d)
    return np.rint(ang.sum(axis=1) / (2 * np.pi)).astype(int)


def cauchy_integral(f: BoundaryFunction, z, near_ok: bool = False):
    """(1/2 pi i) int f(zeta)/(zeta - z) dzeta by the trapezoidal rule.

    Points closer than two node spacings raise unless ``near_ok``, in which
    case the subtraction form is used.
    """
    z = np.asarray(z, complex)
    flat = np.atleast_1d(z).ravel()
    dist = distance_to_curve(f.region, flat)
    if np.any(dist < 2 * _spacing(f)) and not near_ok:
        raise CauchyError("evaluation point within two node spacings of the curve; "
                          "use near_ok=True (subtraction form) or plemelj_jump")
    out = np.empty(len(flat), complex)
    far = dist >= 2 * _spacing(f)
    zeta, dz = f.nodes, f.dzeta
    if far.any():
        k = dz[None, :] / (zeta[None, :] - flat[far, None])
        out[far] = k @ f.values / (2j * np.pi)
    if (~far).any():
        out[~far] = _cauchy_subtracted(f, flat[~far])
    return out.reshape(z.shape) if z.ndim else out[0]


def _cauchy_subtracted(f: BoundaryFunction, z):
    """Interior points: barycentric form; exterior points: subtraction form."""
    zeta, dz = f.nodes, f.dzeta
    inside = curve_winding(f.region, z)
    out = np.empty(len(z), complex)
    for i in range(len(z)):
        diff = zeta - z[i]
        hit = np.abs(diff) == 0
        if hit.any():
            out[i] = f.values[np.argmax(hit)]
            continue
        k = dz / diff
        if inside[i]:
            out[i] = (k @ f.values) / k.sum()
        else:
            j = np.argmin(np.abs(diff))
            out[i] = (k @ (f.values - f.values[j])) / (2j * np.pi)
    return out


def cauchy_field(f: BoundaryFunction, z):
    """Cauchy integral anywhere off the curve (near-curve forms throughout)."""
    z = np.asarray(z, complex)
    return _cauchy_subtracted(f, np.atleast_1d(z).ravel()).reshape(z.shape)


def plemelj_jump(f: BoundaryFunction, index=None):
    """Interior and exterior boundary limits of the Cauchy integral at nodes."""
    zeta, dz = f.nodes, f.dzeta
    n = len(zeta)
    idx = np.arange(n) if index is None else np.atleast_1d(index)
    dfa = f.dalpha()
    da = f.region.dalpha
    pv = np.empty(len(idx), complex)
    for k, j in enumerate(idx):
        diff = zeta - zeta[j]
        num = f.values - f.values[j]
        diff[j] = 1.0
        integrand = num / diff * dz
        integrand[j] = dfa[j] * da
        pv[k] = integrand.sum() / (2j * np.pi)
    f0 = f.values[idx]
    interior, exterior = pv + f0, pv
    if index is not None and np.ndim(index) == 0:
        return complex(interior[0]), complex(exterior[0])
    return interior, exterior


def moments(f: BoundaryFunction, kmax=12, extra=()):
    """Normalized moments int g f dzeta for g = (z - c)^k, k <= kmax, and extra callables."""
    zeta, dz = f.nodes, f.dzeta
    c = f.region.center
    scale = np.max(np.abs(zeta - c))
    w = np.max(np.abs(f.values)) * f.region.perimeter
    out = [np.sum(((zeta - c) / scale) ** k * f.values * dz) / w for k in range(kmax + 1)]
    out += [np.sum(g(zeta) * f.values * dz) / (w * np.max(np.abs(g(zeta)))) for g in extra]
    return np.array(out)


def winding_number(f: BoundaryFunction, tol=1e-12):
    v = f.values
    if np.min(np.abs(v)) < tol:
        raise CauchyError("boundary function vanishes at a node; winding undefined")
    incr = np.angle(np.roll(v, -1) / v)
    total = incr.sum() / (2 * np.pi)
    w = int(np.rint(total))
    if abs(total - w) > 0.1:
        raise CauchyError(f"argument variation {total:.3f} is not close to an integer")
    return w


def log_branch(f: BoundaryFunction):
    """Continuous branch of log f along the curve; returns (values, closure defect)."""
    v = f.values
    incr = np.angle(np.roll(v, -1) / v)
    arg = np.angle(v[0]) + np.concatenate([[0.0], np.cumsum(incr)])
    logs = np.log(np.abs(v)) + 1j * arg[:-1]
    closure = abs((np.log(abs(v[0])) + 1j * arg[-1]) - logs[0] - 2j * np.pi * np.rint(
        (arg[-1] - arg[0]) / (2 * np.pi)))
    return logs, float(closure)


@dataclass
class HolomorphicExtension:
    interior_values: np.ndarray
    points: np.ndarray
    boundary_match_error: float
    exterior_norm: float
    winding: int
    moments: np.ndarray


def exterior_ring(region: PlanarRegion, offset):
    """Points at distance ``offset`` outside the curve along the outward normal."""
    t = region.dzeta / np.abs(region.dzeta)
    return region.boundary - 1j * t * offset


def holomorphic_extend(f: BoundaryFunction, kmax=12, moment_tol=1e-6, exterior_tol=1e-6,
                       ring_offset=None, points=None, check=True) -> HolomorphicExtension:
    """Cauchy-integral extension of boundary data that has no exterior part."""
    region = f.region
    mom = moments(f, kmax)
    scale = np.max(np.abs(f.values))
    offset = 3 * _spacing(f) if ring_offset is None else ring_offset
    ext = cauchy_field(f, exterior_ring(region, offset))
    ext_norm = float(np.max(np.abs(ext)))
    if check and (np.max(np.abs(mom)) > moment_tol or ext_norm > exterior_tol * scale):
        raise CauchyError("data has non-holomorphic content: moments "
                          f"{np.max(np.abs(mom)):.2e}, exterior {ext_norm / scale:.2e}")
    inner, _ = plemelj_jump(f)
    match = float(np.max(np.abs(inner - f.values)))
    if points is None:
        if region.grid_t is None:
            raise ValueError("region has no grid; pass points")
        zz = region.grid_z
        points = zz[region.mask]
    vals = cauchy_field(f, points)
    try:
        wind = winding_number(f)
    except CauchyError:
        wind = None
    return HolomorphicExtension(vals, np.asarray(points), match, ext_norm, wind, mom)
