"""Integral identity between two potential pairs, its h -> 0 limits, and plane functionals.

All volume and boundary integrands are formed from amplitudes a + h r; the
exponential factors of u2 and conj(u1) cancel because the phases are
conjugate, so no e^{phi/h} is ever stored.

Sign convention: with u2 solving L_{A2,q2} u2 = 0, u1 solving
L_{A1,conj q1} u1 = 0 and w solving L_{A1,q1} w = 0 with w = u2 on the
boundary,

    int_bdry d_nu(u2 - w) conj(u1) = int (|A2|^2 - |A1|^2 + q2 - q1) u2 conj(u1)
                                   + int (A2 - A1) . (D u2 conj(u1) + u2 conj(D u1))
                                   + (1/i) int_bdry (A2 - A1) . nu u2 conj(u1)

with D = -i grad.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
import sympy as sp

from . import cgo
from . import radon
from . import expressions as ex
from .forward import (Potentials, assemble, build_grid, hat_interpolation, normal_sampler,
                      normalize_normal_component)
from .geometry import (Domain, GeometryError, ObservationPoint, build_direction_cone,
                       front_back_split, normalize_frame, slice_domain)
from .weights import AngularPhase, CarlemanWeight

N_DIM = 3


class PreconditionError(ValueError):
    def __init__(self, message, code="precondition"):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------------------
# setup shared by every functional of one (x0, omega) frame


@dataclass(eq=False)
class Setup:
    domain: Domain
    obs: ObservationPoint
    omega: np.ndarray
    frame: object
    cone: object
    pot1: Potentials           # A1 after matching the boundary normal component
    pot2: Potentials
    normal_gauge: sp.Expr      # pot1 = original A1 + grad normal_gauge
    pot1_original: Potentials
    weight: CarlemanWeight
    phase: AngularPhase
    grid_step: float
    gauge: object = None       # holomorphic factor g(z, theta) carried by u2
    quad: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def nodes(self):
        return self.domain.boundary

    @property
    def grid(self):
        if "grid" not in self._cache:
            self._cache["grid"] = build_grid(self.domain, self.grid_step)
        return self._cache["grid"]

    def operator(self, which):
        """'u1': L_{A1, conj q1};  'u2': L_{A2, q2};  'w': L_{A1, q1}."""
        key = "op_" + which
        if key not in self._cache:
            pot = {"u1": self.pot1.conjugate_q(), "u2": self.pot2, "w": self.pot1}[which]
            self._cache[key] = assemble(self.domain, pot, self.grid)
        return self._cache[key]

    def amplitude(self, which):
        key = "amp_" + which
        if key not in self._cache:
            if which == "u1":
                amp = cgo.build_amplitude(self.pot1_original, self.domain, self.frame, -1,
                                          psi=self.normal_gauge, **self.quad)
            else:
                amp = cgo.build_amplitude(self.pot2, self.domain, self.frame, +1, gauge=self.gauge,
                                          **self.quad)
            self._cache[key] = amp
        return self._cache[key]

    def samples(self, which):
        key = "smp_" + which
        if key not in self._cache:
            self._cache[key] = cgo.sample_amplitude(self.amplitude(which), self.grid, self.nodes,
                                                    probe_stride=None)
        return self._cache[key]

    @property
    def sampler(self):
        if "sampler" not in self._cache:
            self._cache["sampler"] = normal_sampler(self.grid, self.nodes)
        return self._cache["sampler"]

    @property
    def hat(self):
        if "hat" not in self._cache:
            self._cache["hat"] = hat_interpolation(self.nodes, self.domain.center, self.grid.points)
        return self._cache["hat"]

    @property
    def split(self):
        if "split" not in self._cache:
            self._cache["split"] = front_back_split(self.domain, self.obs, self.nodes)
        return self._cache["split"]

    def solvers(self, h):
        """Remainder solvers for u1 and u2 and the factorized w problem at this h."""
        key = ("solvers", h)
        if key not in self._cache:
            for k in [k for k in self._cache if isinstance(k, tuple) and k[0] == "solvers"]:
                del self._cache[k]          # keep one h at a time (memory)
            g1 = cgo.phase_function(self.weight, self.phase, -1)
            g2 = cgo.phase_function(self.weight, self.phase, +1)
            n = self.grid.n
            P1 = cgo.conjugated_operator(self.operator("u1"), *g1, h)
            P2 = cgo.conjugated_operator(self.operator("u2"), *g2, h)
            Pw = cgo.conjugated_operator(self.operator("w"), *g2, h)
            s1 = cgo.RemainderSolver(P1, self.hat, n)
            s2 = cgo.RemainderSolver(P2, self.hat, n)
            lu_w = spla.splu(Pw[:, :n].tocsc())
            self._cache[key] = (s1, s2, Pw, lu_w)
        return self._cache[key]

    def with_gauge(self, gauge):
        """Same setup with a different holomorphic factor on u2 (shares grid and operators)."""
        new = Setup(self.domain, self.obs, self.omega, self.frame, self.cone, self.pot1, self.pot2,
                    self.normal_gauge, self.pot1_original, self.weight, self.phase, self.grid_step,
                    gauge, self.quad)
        keep = ("grid", "op_u1", "op_u2", "op_w", "amp_u1", "smp_u1", "sampler", "hat", "split")
        new._cache.update({k: v for k, v in self._cache.items() if k in keep or
                           (isinstance(k, tuple) and k[0] == "solvers")})
        return new


def prepare(domain: Domain, x0, pot1: Potentials, pot2: Potentials, grid_step: float,
            omega=None, epsilon=0.05, gauge=None, quad=None) -> Setup:
    """Validate the observation point, pick the frame and match normal components."""
    obs = ObservationPoint(np.asarray(x0, float), epsilon)
    cone = build_direction_cone(domain, obs)
    omega = cone.omega0 if omega is None else np.asarray(omega, float) / np.linalg.norm(omega)
    frame = normalize_frame(obs, omega, cone)
    p1 = pot1 if pot1.cutoff is not None else pot1.with_cutoff(domain)
    p2 = pot2 if pot2.cutoff is not None else pot2.with_cutoff(domain)
    p1n, p2, psi = normalize_normal_component(p1, p2, domain)
    return Setup(domain, obs, omega, frame, cone, p1n, p2, psi, p1, CarlemanWeight(obs.x0),
                 AngularPhase(obs.x0, omega), grid_step, gauge, dict(quad or {}))


# ----------------------------------------------------------------------------
# integral identity


@dataclass
class IdentityReport:
    h: float
    lhs_boundary: complex          # over the boundary minus the front face F_eps
    lhs_front: complex             # over F_eps
    rhs_zeroth: complex
    rhs_first: complex
    boundary_normal: complex       # (1/i) int (A2 - A1) . nu u2 conj(u1); ~0 after matching
    residual: float
    scale: float

    @property
    def lhs(self):
        return self.lhs_boundary + self.lhs_front

    @property
    def relative_residual(self):
        return self.residual / self.scale

    def as_dict(self):
        out = {}
        for k in ("lhs_boundary", "lhs_front", "rhs_zeroth", "rhs_first", "boundary_normal"):
            v = getattr(self, k)
            out[k] = [float(v.real), float(v.imag)]
        out.update(h=self.h, residual=self.residual, scale=self.scale,
                   relative_residual=self.relative_residual)
        return out


@dataclass(eq=False)
class _Traces:
    """a~ = a + h r for one CGO solution, on grid, crossings and boundary nodes."""

    interior: np.ndarray
    crossings: np.ndarray
    boundary: np.ndarray

    @property
    def full(self):
        return np.concatenate([self.interior, self.crossings])


def _solve_traces(solver, samples, hat, h):
    hr, hr_b = solver.solve(-(solver.P @ samples.full))
    return _Traces(samples.interior + hr, samples.crossings + hat @ hr_b, samples.boundary + hr_b)


def front_cutoff(st: Setup, x, width=0.1):
    """Smooth indicator of the front face: 1 where (x - x0) . nu < (eps - width/2) |x - x0|^2."""
    y = x - st.obs.x0
    s = np.einsum("ij,ij->i", y, st.domain.normal(x)) / np.einsum("ij,ij->i", y, y)
    return 1.0 - ex.smooth_step((s - st.obs.epsilon) / width + 0.5)


def _flux(st: Setup, h, v, t1: _Traces, weight=None):
    """int_bdry chi d_nu(u2 - w) conj(u1) in weak form, with v = (u2 - w) e^{-F2/h}.

    Uses d_nu v = 0-trace Green formula int chi (lap v conj(u1) + grad v . grad conj(u1))
    + conj(u1) grad v . grad chi, written for amplitudes; grad F2 . grad F2 = 0
    removes the 1/h^2 terms.
    """
    grid = st.grid
    op = st.operator("w")
    x = grid.nodes
    vf = np.concatenate([v, np.zeros(grid.m, complex)])
    gv = np.stack([d @ vf for d in op.d1], -1)
    lap_v = sum(d @ vf for d in op.d2)
    ab = np.conj(t1.interior)
    gab = np.conj(np.stack([d @ t1.full for d in op.d1], -1))
    gF, lF = cgo.phase_function(st.weight, st.phase, +1)
    gF2, lF2 = gF(x), lF(x)
    dens = (ab * lap_v + np.sum(gv * gab, -1)
            + (ab * np.sum(gF2 * gv, -1) + lF2 * v * ab + v * np.sum(gF2 * gab, -1)) / h)
    vw = grid.volume_weights
    if weight is None:
        return complex(np.sum(vw * dens))
    chi_n = weight(x)
    chi_f = np.concatenate([chi_n, weight(grid.points)])
    gchi = np.stack([d @ chi_f for d in op.d1], -1)
    extra = ab * np.sum((gF2 * (v / h)[:, None] + gv) * gchi, -1)
    return complex(np.sum(vw * (chi_n * dens + extra)))


def _identity_terms(st: Setup, h, t1: _Traces, t2: _Traces, Pw, lu_w, terms=True):
    grid = st.grid
    n = grid.n
    # w~ : conjugated Dirichlet problem with the u2 trace on the boundary
    w_int = lu_w.solve(-(Pw[:, n:] @ t2.crossings))
    diff = t2.interior - w_int
    total = _flux(st, h, diff, t1)
    lhs_f = _flux(st, h, diff, t1, lambda p: front_cutoff(st, p))
    lhs_b = total - lhs_f
    wb = st.nodes.weights
    if not terms:
        return lhs_b, lhs_f, None
    x = grid.nodes
    vw = grid.volume_weights
    A1 = st.pot1.eval_A(x)
    A2 = st.pot2.eval_A(x)
    dA = A2 - A1
    c0 = np.sum(A2 * A2, -1) - np.sum(A1 * A1, -1) + st.pot2.eval_q(x) - st.pot1.eval_q(x)
    rhs0 = complex(np.sum(vw * c0 * t2.interior * np.conj(t1.interior)))
    d2 = [d @ t2.full for d in st.operator("u2").d1]
    d1 = [d @ t1.full for d in st.operator("u1").d1]
    grad2 = np.stack(d2, -1)
    grad1 = np.stack(d1, -1)
    gF2 = cgo.phase_function(st.weight, st.phase, +1)[0](x)
    gF1 = cgo.phase_function(st.weight, st.phase, -1)[0](x)
    a1c = np.conj(t1.interior)
    du2 = -1j * (gF2 * (t2.interior / h)[:, None] + grad2) * a1c[:, None]
    du1 = 1j * t2.interior[:, None] * (np.conj(gF1) * (a1c / h)[:, None] + np.conj(grad1))
    rhs1 = complex(np.sum(vw[:, None] * dA * (du2 + du1)))
    xb = st.nodes.points
    dAb = np.einsum("ij,ij->i", st.pot2.eval_A(xb) - st.pot1.eval_A(xb), st.nodes.normals)
    bnd = complex(np.sum(wb * dAb * t2.boundary * np.conj(t1.boundary)) / 1j)
    return lhs_b, lhs_f, (rhs0, rhs1, bnd)


def evaluate_identity(st: Setup, h: float) -> IdentityReport:
    """All terms of the identity at one h, from grid and boundary quadrature."""
    s1, s2, Pw, lu_w = st.solvers(h)
    t1 = _solve_traces(s1, st.samples("u1"), st.hat, h)
    t2 = _solve_traces(s2, st.samples("u2"), st.hat, h)
    lhs_b, lhs_f, (rhs0, rhs1, bnd) = _identity_terms(st, h, t1, t2, Pw, lu_w)
    lhs = lhs_b + lhs_f
    res = abs(lhs - rhs0 - rhs1 - bnd)
    scale = max(abs(lhs), abs(rhs0), abs(rhs1), abs(rhs0 + rhs1), 1e-300)
    return IdentityReport(h, lhs_b, lhs_f, rhs0, rhs1, bnd, float(res), float(scale))


def extrapolate(hs, values, degree=None):
    """Polynomial extrapolation to h = 0; returns (limit, spread of lower-degree fits)."""
    hs = np.asarray(hs, float)
    v = np.asarray(values, complex)
    if len(hs) < 3:
        raise ValueError("extrapolation needs at least three h values")
    degree = min(len(hs) - 1, 2) if degree is None else degree
    fits = []
    for d in range(1, degree + 1):
        cr = np.polyfit(hs, v.real, d)
        ci = np.polyfit(hs, v.imag, d)
        fits.append(cr[-1] + 1j * ci[-1])
    return complex(fits[-1]), float(abs(fits[-1] - fits[-2])) if len(fits) > 1 else 0.0


def scaled_limit_A(st: Setup, h_sweep, reports=None):
    """h (rhs_zeroth + rhs_first) as h -> 0, and its directly integrated target.

    The target is -2i int (A2 - A1) . (grad phi + i grad psi) a2 conj(a1) dx,
    the leading order of h times the first-order term.
    """
    h_sweep = sorted(h_sweep)
    if len(h_sweep) < 3:
        raise ValueError("scaled limit needs at least three h values")
    reports = [evaluate_identity(st, h) for h in h_sweep] if reports is None else reports
    scaled = [r.h * (r.rhs_zeroth + r.rhs_first) for r in reports]
    limit, spread = extrapolate(h_sweep, scaled)
    x = st.grid.nodes
    vw = st.grid.volume_weights
    a1 = st.samples("u1").interior
    a2 = st.samples("u2").interior
    gF2 = cgo.phase_function(st.weight, st.phase, +1)[0](x)
    dA = st.pot2.eval_A(x) - st.pot1.eval_A(x)
    target = complex(-2j * np.sum(vw * np.sum(dA * gF2, -1) * a2 * np.conj(a1)))
    lhs_scaled = np.array([abs(r.h * r.lhs_boundary) for r in reports])
    with np.errstate(divide="ignore"):
        ok = lhs_scaled > 0
        decay = (float(np.polyfit(np.log(np.asarray(h_sweep)[ok]), np.log(lhs_scaled[ok]), 1)[0])
                 if ok.sum() >= 2 else float("nan"))
    return {"limit": limit, "target": target, "spread": spread, "scaled": scaled,
            "lhs_decay_exponent": decay, "reports": reports}


# ----------------------------------------------------------------------------
# slice functionals


def _exp_sum(st: Setup, x):
    """e^{conj(Phi1) + Phi2} at world points (no gauge factor)."""
    p1 = st.amplitude("u1").phi(x)
    p2 = st.amplitude("u2").phi(x)
    return np.exp(np.conj(p1) + p2)


def make_slice(st: Setup, theta, resolution=128, n_nodes=256):
    return slice_domain(st.domain, st.frame, theta, resolution=resolution, n_nodes=n_nodes)


def slice_moment(st: Setup, sl, g=None, n_ang=64, n_rad=24):
    """Boundary moment of g e^{conj(Phi1)+Phi2} (z - zbar) dz and its interior (Stokes) form.

    The interior form uses the transport equations:
    dbar[g e^{conj(Phi1)+Phi2} (z - zbar)] = -r g e^{...} (A1 - A2) . (e1 + i e_r) in Omega_theta,
    integrated against dzbar ^ dz = 2i dt dr.
    """
    g = (lambda z: np.ones_like(z)) if g is None else g
    zb = sl.boundary
    dz = sl.dzeta * sl.dalpha
    E = _exp_sum(st, sl.to_world(zb))
    boundary = complex(np.sum(g(zb) * E * (zb - np.conj(zb)) * dz))
    zq, wq = sl.quadrature(n_ang, n_rad)
    xq = sl.to_world(zq)
    Eq = _exp_sum(st, xq)
    V = st.pot1.eval_A(xq) - st.pot2.eval_A(xq)
    proj = V @ sl.world_e1() + 1j * (V @ sl.world_e_r())
    interior = complex(np.sum(wq * 2j * (-zq.imag) * g(zq) * Eq * proj))
    scale = float(np.sum(np.abs(g(zb) * E * (zb - np.conj(zb)) * dz)))
    return {"boundary": boundary, "interior": interior, "scale": scale}


def plane_functional_A(st: Setup, sl, n_ang=96, n_rad=32):
    """int_{Omega_theta} (A1 - A2) . (e1 + i e_r) dt dr by polar Gauss quadrature of the slice."""
    z, w = sl.quadrature(n_ang, n_rad)
    x = sl.to_world(z)
    V = st.pot1.eval_A(x) - st.pot2.eval_A(x)
    proj = V @ sl.world_e1() + 1j * (V @ sl.world_e_r())
    return complex(np.sum(w * proj)), float(np.sum(w * np.abs(proj)))


def _same_A(p1: Potentials, p2: Potentials):
    return all(sp.simplify(a - b) == 0 for a, b in zip(p1.A, p2.A))


def theta_window(st: Setup, n=720):
    """Angles whose half-plane meets the domain."""
    y = st.frame.apply(st.domain.sample_boundary(10242).points)
    th = np.arctan2(y[:, 2], y[:, 1])
    c = np.angle(np.mean(np.exp(1j * th)))
    d = np.angle(np.exp(1j * (th - c)))
    return float(c + d.min()), float(c + d.max())


def half_plane_normal(st: Setup, theta):
    """World unit normal e1 x e_theta of the plane containing the half-plane at angle theta."""
    th = np.atleast_1d(np.asarray(theta, float))
    n_frame = np.stack([np.zeros_like(th), -np.sin(th), np.cos(th)], -1)
    return st.frame.inverse_vector(n_frame)


@dataclass(frozen=True)
class LegendreMoment:
    """g(theta) = P_k(u), u = (theta - center) / half_width, on a range covering the domain."""

    center: float
    half_width: float
    degree: int

    def __call__(self, theta):
        u = np.angle(np.exp(1j * (np.asarray(theta, float) - self.center))) / self.half_width
        c = np.zeros(self.degree + 1)
        c[-1] = 1.0
        return np.where(np.abs(u) <= 1, np.polynomial.legendre.legval(np.clip(u, -1, 1), c), 0.0)

    def dual(self, theta):
        """(2k + 1) / (2 half_width) P_k: reconstructs Q from its moments."""
        return (2 * self.degree + 1) / (2 * self.half_width) * self(theta)


def legendre_moments(st: Setup, degree=4, pad=1.02):
    lo, hi = theta_window(st)
    c, w = 0.5 * (lo + hi), 0.5 * pad * (hi - lo)
    return [LegendreMoment(c, w, k) for k in range(degree + 1)]


def plane_integral_q_direct(st: Setup, thetas):
    """int_{P_theta cap Omega} (q1 - q2) by polar quadrature of the plane sections."""
    n = half_plane_normal(st, thetas)
    c = np.asarray(st.domain.center, float)
    out = np.zeros(len(n), complex)
    fn = lambda p, m1, m2: st.pot1.eval_q(p) - st.pot2.eval_q(p)
    for j, nj in enumerate(n):
        fam = radon.PlaneFamily(nj[None], np.ones(1), np.array([nj @ (st.obs.x0 - c)]), c)
        out[j] = radon.plane_integrals(st.domain, fam, fn)[0, 0, 0]
    return out


def q_moments_direct(st: Setup, windows, n_theta=48):
    """int g(theta) (plane integral of q1 - q2) dtheta for each g, by Gauss quadrature in theta."""
    out = []
    for win in windows:
        lo, hi = win.center - win.half_width, win.center + win.half_width
        t, w = np.polynomial.legendre.leggauss(n_theta)
        th = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        out.append(complex(np.sum(0.5 * (hi - lo) * w * win(th) * plane_integral_q_direct(st, th))))
    return np.array(out)


def q_moments_boundary(st: Setup, windows, h):
    """The same moments from the boundary side of the identity at one h.

    With A1 = A2 the amplitude product is a2 conj(a1) = 1/r, so multiplying
    the u2 amplitude by g(theta) (constant on each slice, hence holomorphic)
    turns the volume term into int g(theta) (plane integral of q2 - q1) dtheta.
    Returns (values, amplitude-cancellation error).
    """
    if not _same_A(st.pot1, st.pot2):
        raise PreconditionError("plane integrals of q need A1 = A2: with different magnetic "
                                "potentials the amplitude product depends on both unknowns",
                                code="magnetic_potentials_differ")
    grid, nodes = st.grid, st.nodes
    y = st.frame.apply(grid.nodes)
    r = np.hypot(y[:, 1], y[:, 2])
    s1, s2 = st.samples("u1"), st.samples("u2")
    cancel = float(np.max(np.abs(r * s2.interior * np.conj(s1.interior) - 1)))
    sol1, sol2, Pw, lu_w = st.solvers(h)
    t1 = _solve_traces(sol1, s1, st.hat, h)
    vals = []
    for win in windows:
        def fn(p, win=win):
            yy = st.frame.apply(p)
            return win(np.arctan2(yy[:, 2], yy[:, 1]))
        t2 = _solve_traces(sol2, s2.times(grid, nodes, fn), st.hat, h)
        lb, lf, _ = _identity_terms(st, h, t1, t2, Pw, lu_w, terms=False)
        vals.append(-(lb + lf))
    return np.array(vals), cancel

def plane_integral_q(st: Setup, thetas, h_sweep, degree=4, n_theta=48):
    """Plane integrals of q1 - q2 over Omega_theta from the boundary side of the identity.

    The theta-dependence is isolated through Legendre moments g = P_k on the
    angular range of the domain (k <= degree). Each boundary-data moment is
    extrapolated to h = 0 over ``h_sweep``; the plane integrals at ``thetas``
    are the Legendre series of the extrapolated moments. The same series built
    from directly computed moments separates truncation from h-bias.
    """
    moms = legendre_moments(st, degree)
    hs = sorted(h_sweep)
    per_h, cancel = [], 0.0
    for h in hs:
        vals, cancel = q_moments_boundary(st, moms, h)
        per_h.append(vals)
    per_h = np.array(per_h)
    if len(hs) >= 3:
        coef = np.array([extrapolate(hs, per_h[:, k])[0] for k in range(len(moms))])
    else:
        coef = per_h[0]
    ref = q_moments_direct(st, moms, n_theta)
    thetas = np.atleast_1d(np.asarray(thetas, float))
    basis = np.array([m.dual(thetas) for m in moms])            # [K, n]
    boundary = coef @ basis
    direct = plane_integral_q_direct(st, thetas)
    projected = ref @ basis
    scale = float(np.max(np.abs(direct)))
    return {"theta": thetas, "boundary_data": boundary, "direct": direct, "projected": projected,
            "moments_boundary": coef, "moments_direct": ref, "per_h": per_h, "h": hs,
            "mismatch": float(np.max(np.abs(boundary - direct)) / scale),
            "mismatch_projected": float(np.max(np.abs(boundary - projected)) / scale),
            "truncation": float(np.max(np.abs(projected - direct)) / scale),
            "mismatch_per_h": [float(np.max(np.abs(v @ basis - direct)) / scale) for v in per_h],
            "moment_errors": np.abs(coef - ref) / abs(ref[0]),
            "cancellation_error": cancel}


# ----------------------------------------------------------------------------
# plane-integral sets


@dataclass
class PlaneIntegralSet:
    """(theta, frame id, value_A, value_q) entries and how they were obtained."""

    entries: list = field(default_factory=list)
    provenance: str = "direct"

    def add(self, theta, frame_id, value_A, value_q):
        self.entries.append((float(theta), str(frame_id), complex(value_A), complex(value_q)))

    def max_abs(self):
        if not self.entries:
            return 0.0, 0.0
        a = max(abs(e[2]) for e in self.entries)
        q = max(abs(e[3]) for e in self.entries)
        return a, q

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "frame", "re_A", "im_A", "re_q", "im_q", "provenance"])
            for th, fid, va, vq in self.entries:
                w.writerow([th, fid, va.real, va.imag, vq.real, vq.imag, self.provenance])


def frame_family(st: Setup, n_offsets=5, n_omega=5, x0_radius=0.05, omega_radius=0.05, seed=0):
    """Perturbed (x0, omega) pairs around the setup's frame, all admissible."""
    rng = np.random.default_rng(seed)
    out = [(st.obs.x0.copy(), st.omega.copy())]
    d = st.domain.diameter
    while len(out) < n_offsets * n_omega:
        x0 = st.obs.x0 + x0_radius * d * rng.normal(size=3) / np.sqrt(3)
        om = st.omega + omega_radius * rng.normal(size=3)
        om /= np.linalg.norm(om)
        try:
            obs = ObservationPoint(x0, st.obs.epsilon)
            cone = build_direction_cone(st.domain, obs)
            normalize_frame(obs, om, cone)
        except GeometryError:
            continue
        out.append((x0, om))
    return out
