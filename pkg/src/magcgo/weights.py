"""Logarithmic Carleman weight, its conjugate angular phase, and checks on both."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import Potentials
from .geometry import Domain, GeometryError


@dataclass(frozen=True)
class CarlemanWeight:
    """phi(x) = log |x - x0|."""

    x0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, float))

    def value(self, x):
        return np.log(np.linalg.norm(np.asarray(x) - self.x0, axis=-1))

    def gradient(self, x):
        y = np.asarray(x) - self.x0
        return y / np.sum(y * y, -1, keepdims=True)

    def hessian(self, x):
        y = np.asarray(x) - self.x0
        r2 = np.sum(y * y, -1)[..., None, None]
        eye = np.eye(3)
        return (eye - 2 * y[..., :, None] * y[..., None, :] / r2) / r2

    def laplacian(self, x):
        y = np.asarray(x) - self.x0
        return 1.0 / np.sum(y * y, -1)


@dataclass(frozen=True)
class LinearWeight:
    """phi(x) = alpha . x, the flat limiting weight (zero Hessian)."""

    alpha: np.ndarray

    def value(self, x):
        return np.asarray(x) @ np.asarray(self.alpha, float)

    def gradient(self, x):
        return np.broadcast_to(np.asarray(self.alpha, float), np.shape(x)).copy()

    def hessian(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))


@dataclass(frozen=True)
class AngularPhase:
    """psi(x) = angle between (x - x0)/|x - x0| and omega, in (0, pi).

    With t = omega . y and r = |y - t omega|, psi = atan2(r, t); in the frame
    where omega = e1 this is the argument of z = t + i r, so phi + i psi = log z.
    """

    x0: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, float))
        w = np.asarray(self.omega, float)
        object.__setattr__(self, "omega", w / np.linalg.norm(w))

    def _tr(self, x):
        y = np.asarray(x, float) - self.x0
        t = y @ self.omega
        yp = y - t[..., None] * self.omega
        r = np.linalg.norm(yp, axis=-1)
        return y, t, yp, r

    def value(self, x):
        _, t, _, r = self._tr(x)
        return np.arctan2(r, t)

    def value_arccos(self, x):
        y = np.asarray(x, float) - self.x0
        c = (y @ self.omega) / np.linalg.norm(y, axis=-1)
        return np.arccos(np.clip(c, -1.0, 1.0))

    def radial_direction(self, x):
        _, _, yp, r = self._tr(x)
        if np.any(r <= 0):
            raise GeometryError("point lies on the axis through x0 along omega",
                                code="on_axis")
        return yp / r[..., None]

    def gradient(self, x):
        _, t, _, r = self._tr(x)
        e_r = self.radial_direction(x)
        y2 = (t * t + r * r)[..., None]
        return (t[..., None] * e_r - r[..., None] * self.omega) / y2

    def laplacian(self, x):
        _, t, _, r = self._tr(x)
        return t / (r * (t * t + r * r))

    def complex_coordinate(self, x):
        _, t, _, r = self._tr(x)
        return t + 1j * r


def admissible(weight: CarlemanWeight, phase: AngularPhase, x, tol=1e-9):
    """True where x is off the x0-omega axis (psi strictly inside (0, pi))."""
    psi = phase.value(x)
    return (psi > tol) & (psi < np.pi - tol)


def eikonal_residual(weight: CarlemanWeight, phase: AngularPhase, x):
    """((grad psi)^2 - (grad phi)^2, grad phi . grad psi), each relative to |grad phi|^2."""
    x = np.asarray(x, float)
    if not np.all(admissible(weight, phase, x)):
        raise GeometryError("eikonal residual requested at an inadmissible point",
                            code="inadmissible_point")
    gp = weight.gradient(x)
    gq = phase.gradient(x)
    scale = np.sum(gp * gp, -1)
    return (np.sum(gq * gq, -1) - scale) / scale, np.sum(gp * gq, -1) / scale


def lcw_condition_residual(weight, x, xi, tol=1e-12):
    """<phi'' grad phi, grad phi> + <phi'' xi, xi> relative to |grad phi|^4.

    xi must satisfy |xi| = |grad phi| and xi . grad phi = 0.
    """
    x = np.asarray(x, float)
    xi = np.asarray(xi, float)
    g = weight.gradient(x)
    g2 = np.sum(g * g, -1)
    if np.any(np.abs(np.sum(xi * xi, -1) - g2) > tol * g2) or \
            np.any(np.abs(np.sum(xi * g, -1)) > tol * g2):
        raise ValueError("xi violates |xi| = |grad phi|, xi . grad phi = 0")
    hess = weight.hessian(x)
    val = np.einsum("...i,...ij,...j->...", g, hess, g) + np.einsum("...i,...ij,...j->...", xi, hess, xi)
    return val / np.where(g2 > 0, g2 * g2, 1.0)


def project_constraint(weight, x, v):
    """Project v onto {xi : xi . grad phi = 0, |xi| = |grad phi|}."""
    g = weight.gradient(x)
    g2 = np.sum(g * g, -1, keepdims=True)
    w = v - np.sum(v * g, -1, keepdims=True) * g / g2
    return w * np.sqrt(g2) / np.linalg.norm(w, axis=-1, keepdims=True)


# ----------------------------------------------------------------------------
# empirical Carleman constant


def _bump(x, center, radius):
    """exp(-1/(1 - s)) with s = |x - c|^2 / radius^2, with gradient and Laplacian."""
    y = x - center
    s = np.sum(y * y, -1) / radius**2
    inside = s < 1
    om = np.where(inside, 1.0 - s, 1.0)
    b = np.where(inside, np.exp(-1.0 / om), 0.0)
    b1 = -b / om**2
    b2 = b * (1.0 / om**4 - 2.0 / om**3)
    grad = (2 * b1 / radius**2)[..., None] * y
    lap = b2 * 4 * s / radius**2 + b1 * 6 / radius**2
    return b, grad, lap


def random_bumps(domain: Domain, rng, n_max=3, spread=0.3, radius_range=(0.6, 0.98)):
    """Random combination of compactly supported bumps inside the domain."""
    k = int(rng.integers(1, n_max + 1))
    out = []
    rmin = domain.min_radius
    for _ in range(k):
        while True:
            c = domain.center + rng.uniform(-rmin, rmin, 3) * spread
            if domain.level(c) < -0.2 * rmin:
                break
        dist = -domain.level(c)
        radius = rng.uniform(*radius_range) * dist
        coef = rng.normal() + 1j * rng.normal()
        out.append((c, radius, coef))
    return out


def _modulation(weight, x0, omega, x, h):
    """e^{-(phi + i psi)/h} with its gradient factor and Laplacian pieces."""
    phase = AngularPhase(x0, omega)
    f = weight.value(x) + 1j * phase.value(x)
    grad_f = weight.gradient(x) + 1j * phase.gradient(x)
    lap_f = weight.laplacian(x) + 1j * phase.laplacian(x)
    return f, grad_f, lap_f


def carleman_constant(domain: Domain, pot: Potentials, weight, h: float, samples: int = 50,
                      seed: int = 0, n_quad: int = 48, modulated: float = 0.0, return_all=False):
    """Largest ratio (|e^{phi/h}u| + h|e^{phi/h}grad u|) / (h |e^{phi/h} L u|) over random u.

    Each sample is a combination of compact bumps b_k. A fraction ``modulated``
    of the samples multiplies the combination by e^{-(phi + i psi)/h} for a
    random admissible direction; these nearly saturate the estimate. Only the
    logarithm of the weight is formed, so nothing overflows.
    """
    if h > 0.5 or samples < 1:
        raise ValueError("need h <= 0.5 and at least one sample")
    rng = np.random.default_rng(seed)
    xg, wg = np.polynomial.legendre.leggauss(n_quad)
    axis = domain.center - weight.x0
    axis /= np.linalg.norm(axis)
    ratios = []
    for k in range(samples):
        bumps = random_bumps(domain, rng)
        lo = np.min([c - r for c, r, _ in bumps], axis=0)
        hi = np.max([c + r for c, r, _ in bumps], axis=0)
        axes = [0.5 * (hi[j] - lo[j]) * (xg + 1) + lo[j] for j in range(3)]
        w1 = [0.5 * (hi[j] - lo[j]) * wg for j in range(3)]
        x = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
        w = np.einsum("i,j,k->ijk", *w1).ravel()
        b = np.zeros(len(x), complex)
        gb = np.zeros((len(x), 3), complex)
        lb = np.zeros(len(x), complex)
        for c, r, coef in bumps:
            bk, g, lap = _bump(x, c, r)
            b += coef * bk
            gb += coef * g
            lb += coef * lap
        logw = 2 * weight.value(x) / h
        if k < modulated * samples:
            v = rng.normal(size=3)
            omega = v - (v @ axis) * axis
            f, gf, lf = _modulation(weight, weight.x0, omega, x, h)
            # u = e^{-f/h} b; derivatives carry the common factor e^{-f/h}
            gu = gb - gf * b[:, None] / h
            lu = (lb - 2 * np.sum(gf * gb, -1) / h - lf * b / h
                  + np.sum(gf * gf, -1) * b / h**2)
            u = b
            logw = logw - 2 * f.real / h
        else:
            u, gu, lu = b, gb, lb
        a = pot.eval_A(x)
        op_u = (-lu - 2j * np.sum(a * gu, -1) - 1j * pot.eval_div_A(x) * u
                + np.sum(a * a, -1) * u + pot.eval_q(x) * u)
        logw -= logw.max()
        ew = w * np.exp(logw)
        nu = np.sqrt(np.sum(ew * np.abs(u) ** 2))
        ng = np.sqrt(np.sum(ew[:, None] * np.abs(gu) ** 2))
        nl = np.sqrt(np.sum(ew * np.abs(op_u) ** 2))
        ratios.append((nu + h * ng) / (h * nl))
    ratios = np.array(ratios)
    return (float(ratios.max()), ratios) if return_all else float(ratios.max())
