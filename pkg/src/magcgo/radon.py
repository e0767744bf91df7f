"""Plane integrals over sections of the domain and their inversion.

Planes are {x : n . (x - c) = s} with unit normals n on a hemisphere and
offsets s. Section integrals use polar Gauss quadrature about a seed point
of the section (sections of the shipped domains are star-shaped about it).
Inversion uses the three-dimensional formula

    f(x) = -(1 / 8 pi^2) int_{S^2} (d^2/ds^2 Rf)(n, n . x) dn,

applied as a spectral filter |2 pi k|^2 with a cosine taper, followed by
back-projection over the hemisphere (each plane counted once).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Domain


class CoverageError(ValueError):
    pass


@dataclass(eq=False)
class PlaneFamily:
    normals: np.ndarray        # [Nd, 3] on the upper hemisphere
    weights: np.ndarray        # [Nd] solid-angle weights, sum 2 pi
    offsets: np.ndarray        # [Ns] equispaced
    center: np.ndarray

    @property
    def ds(self):
        return float(self.offsets[1] - self.offsets[0])

    def basis(self):
        """In-plane orthonormal (m1, m2) with m1 x m2 = n."""
        n = self.normals
        ref = np.where(np.abs(n[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
        m1 = np.cross(ref, n)
        m1 /= np.linalg.norm(m1, axis=1, keepdims=True)
        m2 = np.cross(n, m1)
        return m1, m2


def hemisphere_family(domain: Domain, n_polar=32, n_azimuth=32, n_offsets=64, pad=1.02):
    """Gauss-Legendre in cos(polar) on [-1, 1] times equispaced azimuth on [0, pi)."""
    if n_polar * n_azimuth < 16 or min(n_polar, n_azimuth) < 4:
        raise CoverageError("angular coverage needs at least 16 directions")
    mu, wmu = np.polynomial.legendre.leggauss(n_polar)
    az = np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    s = np.sqrt(1 - mu**2)
    normals = np.stack([np.outer(s, np.cos(az)), np.outer(s, np.sin(az)),
                        np.outer(mu, np.ones_like(az))], -1).reshape(-1, 3)
    weights = np.outer(wmu, np.full(n_azimuth, np.pi / n_azimuth)).ravel()
    R = pad * domain.max_radius
    offsets = np.linspace(-R, R, n_offsets)
    return PlaneFamily(normals, weights, offsets, np.asarray(domain.center, float))


def _seeds(domain: Domain, base, m1, m2, R, scan=21):
    """A point inside each section (base point if inside, else the deepest of a coarse scan)."""
    seeds = base.copy()
    empty = np.zeros(len(base), bool)
    bad = np.flatnonzero(domain.level(base) >= 0)
    if len(bad):
        g = np.linspace(-R, R, scan)
        aa, bb = np.meshgrid(g, g, indexing="ij")
        for i in bad:
            pts = base[i] + aa.ravel()[:, None] * m1[i] + bb.ravel()[:, None] * m2[i]
            lv = domain.level(pts)
            k = int(np.argmin(lv))
            if lv[k] >= 0:
                empty[i] = True
            else:
                seeds[i] = pts[k]
    return seeds, empty


def section_quadrature(domain: Domain, family: PlaneFamily, index, n_ang=48, n_rad=16):
    """Polar Gauss nodes on the sections of the planes with normals family.normals[index].

    Returns (points [B, Ns, n_ang * n_rad, 3], weights [B, Ns, n_ang * n_rad]);
    empty sections get zero weight.
    """
    index = np.atleast_1d(index)
    R = 1.05 * domain.max_radius
    n = family.normals[index]
    m1, m2 = (b[index] for b in family.basis())
    B, ns = len(index), len(family.offsets)
    base = family.center + family.offsets[None, :, None] * n[:, None, :]       # [B, Ns, 3]
    rep = lambda v: np.repeat(v, ns, axis=0)
    seeds, empty = _seeds(domain, base.reshape(-1, 3), rep(m1), rep(m2), R)
    alpha = 2 * np.pi * np.arange(n_ang) / n_ang
    dirs = (np.cos(alpha)[None, :, None] * m1[:, None, :]
            + np.sin(alpha)[None, :, None] * m2[:, None, :])                     # [B, n_ang, 3]
    dirs = np.repeat(dirs, ns, axis=0)                                          # [B*Ns, n_ang, 3]
    sx, sw = np.polynomial.legendre.leggauss(n_rad)
    sx, sw = 0.5 * (sx + 1), 0.5 * sw
    pts = np.zeros((B * ns, n_ang, n_rad, 3))
    wts = np.zeros((B * ns, n_ang, n_rad))
    live = np.flatnonzero(~empty)
    if len(live):
        org = np.broadcast_to(seeds[live, None, :], dirs[live].shape)
        rho = domain.ray_exit(org, dirs[live], 2.5 * R)                          # [L, n_ang]
        rr = rho[:, :, None] * sx
        pts[live] = seeds[live, None, None, :] + rr[..., None] * dirs[live][:, :, None, :]
        wts[live] = (2 * np.pi / n_ang) * rho[:, :, None] * sw * rr
    return (pts.reshape(B, ns, n_ang * n_rad, 3), wts.reshape(B, ns, n_ang * n_rad))


def plane_integrals(domain: Domain, family: PlaneFamily, fn, n_ang=48, n_rad=16, batch=16):
    """int_{P cap Omega} fn dlambda for every plane; fn(x[..., 3], m1, m2) -> [...] or [..., k].

    The in-plane basis of each normal is passed so that tangential components
    can be formed. Returns an array [Nd, Ns, k].
    """
    m1s, m2s = family.basis()
    nd = len(family.normals)
    out = None
    for j0 in range(0, nd, batch):
        idx = np.arange(j0, min(nd, j0 + batch))
        pts, wts = section_quadrature(domain, family, idx, n_ang, n_rad)
        for b, j in enumerate(idx):
            vals = np.asarray(fn(pts[b], m1s[j], m2s[j]))
            if vals.ndim == 2:
                vals = vals[..., None]
            res = np.einsum("spk,sp->sk", vals, wts[b])
            if out is None:
                out = np.zeros((nd, len(family.offsets), res.shape[-1]), res.dtype)
            out[j] = res
    return out


# ----------------------------------------------------------------------------
# inversion


def ramp_filter(data, ds, taper=True):
    """-d^2/ds^2 along the last axis as the spectral multiplier (2 pi k)^2, zero-padded."""
    ns = data.shape[-1]
    npad = 2 * ns
    k = np.fft.fftfreq(npad, d=ds)
    mult = (2 * np.pi * k) ** 2
    if taper:
        mult = mult * np.cos(0.5 * np.pi * k / np.max(np.abs(k)))
    spec = np.fft.fft(data, n=npad, axis=-1) * mult
    return np.fft.ifft(spec, axis=-1)[..., :ns]


def reconstruction_grid(domain: Domain, n=64):
    R = domain.max_radius
    c = np.asarray(domain.center, float)
    ax = [np.linspace(c[i] - R, c[i] + R, n) for i in range(3)]
    x = np.stack(np.meshgrid(*ax, indexing="ij"), -1).reshape(-1, 3)
    return x, domain.contains(x)


def back_project(family: PlaneFamily, filtered, x):
    """(1 / 4 pi^2) sum_n w_n g_n(n . (x - c)) over the hemisphere."""
    y = x - family.center
    out = np.zeros(len(x), complex if np.iscomplexobj(filtered) else float)
    s = family.offsets
    for j, n in enumerate(family.normals):
        t = y @ n
        g = filtered[j]
        if np.iscomplexobj(g):
            val = np.interp(t, s, g.real, left=0, right=0) + 1j * np.interp(t, s, g.imag, left=0, right=0)
        else:
            val = np.interp(t, s, g, left=0, right=0)
        out += family.weights[j] * val
    return out / (4 * np.pi**2)


def fbp(family: PlaneFamily, sinogram, x, taper=True):
    """Inverse plane transform of sinogram [Nd, Ns] at points x."""
    if len(family.normals) < 16:
        raise CoverageError("angular coverage needs at least 16 directions")
    filt = ramp_filter(sinogram, family.ds, taper)
    if not np.iscomplexobj(sinogram):
        filt = filt.real
    return back_project(family, filt, x)


def relative_l2(rec, truth, mask=None):
    if mask is not None:
        rec, truth = rec[mask], truth[mask]
    den = np.sqrt(np.sum(np.abs(truth) ** 2))
    num = np.sqrt(np.sum(np.abs(rec - truth) ** 2))
    return float(num / den) if den > 0 else float(num)


def central_difference(data, ds, offset=2):
    """d/ds by central differences over +-offset samples; zero outside the sampled range."""
    pad = np.zeros(data.shape[:-1] + (offset,), data.dtype)
    ext = np.concatenate([pad, data, pad], axis=-1)
    return (ext[..., 2 * offset:] - ext[..., :-2 * offset]) / (2 * offset * ds)


def tangential_functionals(domain: Domain, family: PlaneFamily, field, **quad):
    """M_k(n, s) = int_{P cap Omega} m_k . V for the in-plane basis (m1, m2); [Nd, Ns, 2]."""

    def fn(p, m1, m2):
        v = field(p)
        return np.stack([v @ m1, v @ m2], -1)

    return plane_integrals(domain, family, fn, **quad)


def curl_sinograms(family: PlaneFamily, tangential, offset=2):
    """Plane transforms of the three components of W = curl V from tangential functionals.

    d/ds M_1 = R[W . m2] and d/ds M_2 = -R[W . m1] (since m1 x m2 = n), and
    R[W . n] = 0 because div W = 0, which fixes every component.
    """
    m1, m2 = family.basis()
    d1 = central_difference(tangential[..., 0], family.ds, offset)
    d2 = central_difference(tangential[..., 1], family.ds, offset)
    rw_m1, rw_m2 = -d2, d1
    return [m1[:, j, None] * rw_m1 + m2[:, j, None] * rw_m2 for j in range(3)]


def invert_curl(domain: Domain, family: PlaneFamily, tangential, x, offset=2):
    """Reconstruct curl V at x from tangential plane functionals; returns [len(x), 3]."""
    sinos = curl_sinograms(family, tangential, offset)
    return np.stack([fbp(family, s, x) for s in sinos], -1)
