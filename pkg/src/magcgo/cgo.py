"""Complex geometrical optics solutions u = e^{(sigma phi + i psi)/h} (a + h r).

In the frame where omega = e1 and x0 = 0, write z = t + i r with t = x1 and
r = |x'|. The amplitude a = e^Phi g solves a Cauchy-Riemann equation in z on
every half-plane theta = const:

    sigma = +1:  dbar Phi       = (n-2)/(2(z - zbar)) - (i/2) A . (e1 + i e_r)
    sigma = -1:  dbar conj(Phi) = (n-2)/(2(z - zbar)) + (i/2) A . (e1 + i e_r)

The singular part has the closed form -(n-2)/2 log r; the A-part is the
solid Cauchy transform T f = -(1/pi) int f(zeta)/(zeta - z) dA of the
compactly supported right-hand side. The pointwise evaluator below
integrates in polar coordinates about z, which removes the 1/|zeta - z|
singularity and keeps T f smooth in (t, r, theta).

Fields that carry e^{sigma phi/h} are held only through their amplitudes
a + h r; products u2 conj(u1) never form an exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
import sympy as sp

from . import expressions as ex
from .forward import DiscreteOperator, GridField, Potentials, assemble, hat_interpolation
from .geometry import Domain, RigidMotion, SliceSpec
from .weights import AngularPhase, CarlemanWeight

N_DIM = 3


# ----------------------------------------------------------------------------
# slice-grid transport


def transport_rhs(pot: Potentials, sl: SliceSpec, sign: int, z=None, axis_cutoff=None):
    """Right-hand side of the slice Cauchy-Riemann equation (for Phi, or conj(Phi) if sign=-1)."""
    z = sl.grid_z if z is None else np.asarray(z)
    x = sl.to_world(z)
    a = pot.eval_A_ext(x)
    proj = a @ sl.world_e1() + 1j * (a @ sl.world_e_r())
    if axis_cutoff is not None:
        proj = proj * axis_cutoff(z.imag)
    with np.errstate(divide="ignore", invalid="ignore"):
        sing = (N_DIM - 2) / (2 * (z - np.conj(z)))
    return sing - sign * 0.5j * proj


def cauchy_kernel_cells(n_t, n_r, ht, hr):
    """Cell-quadrature kernel 1/(zeta - z) on the index-difference lattice, zero at the origin."""
    it = np.arange(-(n_t - 1), n_t) * ht
    ir = np.arange(-(n_r - 1), n_r) * hr
    dz = it[:, None] + 1j * ir[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(dz == 0, 0.0, 1.0 / dz)
    return k


def solve_dbar(rhs, sl, fraction=None):
    """Particular solution T(rhs) on the slice grid by cell quadrature and FFT convolution.

    Cells are weighted by their inside fraction; the departing self-cell
    integral of 1/(zeta - z) over a square vanishes by symmetry.
    """
    from scipy.signal import fftconvolve

    rhs = np.where(np.isfinite(rhs), rhs, 0.0)
    frac = sl.cell_fraction if fraction is None else fraction
    ht = sl.grid_t[1] - sl.grid_t[0]
    hr = sl.grid_r[1] - sl.grid_r[0]
    n_t, n_r = rhs.shape
    kern = cauchy_kernel_cells(n_t, n_r, ht, hr)
    dens = rhs * frac * ht * hr
    # Phi(z_i) = -(1/pi) sum_j dens_j / (z_j - z_i) = (1/pi) sum_j dens_j k(z_i - z_j)
    conv = fftconvolve(dens, kern, mode="full")
    return conv[n_t - 1: 2 * n_t - 1, n_r - 1: 2 * n_r - 1] / np.pi


def dbar_residual(phi, sl):
    """Centered-difference dbar of a grid field (interior cells only)."""
    ht = sl.grid_t[1] - sl.grid_t[0]
    hr = sl.grid_r[1] - sl.grid_r[0]
    out = np.full(phi.shape, np.nan, complex)
    out[1:-1, 1:-1] = 0.5 * ((phi[2:, 1:-1] - phi[:-2, 1:-1]) / (2 * ht)
                             + 1j * (phi[1:-1, 2:] - phi[1:-1, :-2]) / (2 * hr))
    return out


# ----------------------------------------------------------------------------
# pointwise amplitude


@dataclass(eq=False)
class Amplitude:
    """a(x) = g(x) exp(Phi(x)) with Phi evaluated pointwise by polar Cauchy quadrature."""

    pot: Potentials
    frame: RigidMotion
    sign: int
    axis_band: tuple           # (r_a, r_b): axis cutoff ramps from 0 at r_a to 1 at r_b
    support: tuple             # (center, radius) of a ball containing supp A_ext
    gauge: object = None       # callable g(z, theta) holomorphic in z, or None
    psi: object = None         # compiled Psi: amplitude for A + grad Psi is e^{-i Psi} times this one
    n_alpha: int = 64
    n_rho: int = 64
    chunk: int = 256
    fd_step: float = 2e-3
    _cache: dict = field(default_factory=dict, repr=False)

    def axis_cutoff(self, r):
        ra, rb = self.axis_band
        return ex.smooth_step((np.asarray(r) - ra) / (rb - ra))

    def coords(self, x):
        y = self.frame.apply(x)
        t = y[..., 0]
        r = np.hypot(y[..., 1], y[..., 2])
        th = np.arctan2(y[..., 2], y[..., 1])
        return t, r, th

    def _density(self, zeta, theta):
        """f(zeta; theta) = -sign (i/2) chi A . (e1 + i e_r); zero for Im zeta <= r_a."""
        ct, st = np.cos(theta), np.sin(theta)
        y = np.stack([zeta.real, zeta.imag * ct, zeta.imag * st], -1)
        x = self.frame.inverse(y)
        a_world = self.pot.eval_A_ext(x)
        a_frame = self.frame.apply_vector(a_world)
        proj = a_frame[..., 0] + 1j * (a_frame[..., 1] * ct + a_frame[..., 2] * st)
        return -self.sign * 0.5j * self.axis_cutoff(zeta.imag) * proj

    def cauchy_part(self, t, r, th):
        """T f at the points (t, r, theta); f is the A-dependent density."""
        t, r, th = (np.atleast_1d(np.asarray(v, float)) for v in (t, r, th))
        out = np.zeros(t.shape, complex)
        if self.pot.is_zero_A:
            return out
        xa, wa = np.polynomial.legendre.leggauss(self.n_rho)
        alpha = 2 * np.pi * np.arange(self.n_alpha) / self.n_alpha
        ea = np.exp(1j * alpha)
        c, rad = self.support
        cf = self.frame.apply(c)
        for i0 in range(0, t.size, self.chunk):
            sl = slice(i0, i0 + self.chunk)
            z = t[sl] + 1j * r[sl]
            ths = th[sl]
            er_c = cf[1] * np.cos(ths) + cf[2] * np.sin(ths)
            perp2 = cf[1] ** 2 + cf[2] ** 2 - er_c**2
            disk_r = np.sqrt(np.maximum(rad**2 - perp2, 0.0))
            reach = np.abs(z - (cf[0] + 1j * er_c)) + disk_r
            rho = 0.5 * (xa + 1)[None, :] * reach[:, None]          # [p, n_rho]
            wr = 0.5 * wa[None, :] * reach[:, None]
            zeta = z[:, None, None] + rho[:, None, :] * ea[None, :, None]   # [p, n_alpha, n_rho]
            f = self._density(zeta, ths[:, None, None])
            vals = np.einsum("pak,a,pk->p", f, np.conj(ea), wr)
            out[sl] = -vals * (2 * np.pi / self.n_alpha) / np.pi
        return out

    def phi(self, x):
        """Phi at world points (for sign = -1 this is conj of the conj(Phi) solution)."""
        t, r, th = self.coords(np.asarray(x, float))
        base = -0.5 * (N_DIM - 2) * np.log(r)
        val = base + self.cauchy_part(t.ravel(), r.ravel(), th.ravel()).reshape(t.shape)
        val = val if self.sign > 0 else np.conj(val)
        if self.psi is not None:
            val = val - 1j * self.psi(np.asarray(x, float))
        return val

    def gauge_value(self, x):
        if self.gauge is None:
            return 1.0
        t, r, th = self.coords(np.asarray(x, float))
        return self.gauge(t + 1j * r, th)

    def value(self, x):
        return self.gauge_value(x) * np.exp(self.phi(x))

    def derivatives(self, x):
        """a, grad a and lap a by fourth-order central differences of the pointwise evaluator."""
        x = np.asarray(x, float)
        d = self.fd_step
        offs = [np.zeros(3)]
        for k in range(3):
            for m in (-2, -1, 1, 2):
                e = np.zeros(3)
                e[k] = m * d
                offs.append(e)
        offs = np.array(offs)
        pts = x[:, None, :] + offs[None]
        vals = self.value(pts.reshape(-1, 3)).reshape(len(x), len(offs))
        a0 = vals[:, 0]
        grad = np.empty((len(x), 3), complex)
        lap = np.zeros(len(x), complex)
        for k in range(3):
            vm2, vm1, vp1, vp2 = (vals[:, 1 + 4 * k + j] for j in range(4))
            grad[:, k] = (vm2 - 8 * vm1 + 8 * vp1 - vp2) / (12 * d)
            lap += (-vm2 + 16 * vm1 - 30 * a0 + 16 * vp1 - vp2) / (12 * d * d)
        return a0, grad, lap


def default_axis_band(domain: Domain, frame: RigidMotion):
    """Axis cutoff band below the smallest distance of the domain to the axis."""
    pts = domain.sample_boundary(10242).points
    y = frame.apply(pts)
    rmin = float(np.min(np.hypot(y[:, 1], y[:, 2])))
    if rmin <= 0:
        raise ValueError("domain meets the axis of the normalized frame")
    return 0.3 * rmin, 0.8 * rmin


def build_amplitude(pot: Potentials, domain: Domain, frame: RigidMotion, sign: int,
                    gauge=None, check_gauge=True, psi=None, **quad) -> Amplitude:
    """Amplitude for L_{A + grad psi, *}; ``gauge`` is an optional g(z, theta) holomorphic in z.

    With ``psi`` the transport equation is solved for ``pot`` and the result
    multiplied by e^{-i psi}, which solves the transport equation for
    A + grad psi while keeping the expensive density evaluation on A.
    """
    if pot.cutoff is None:
        pot = pot.with_cutoff(domain)
    c, _, r_out = pot.cutoff
    if psi is not None and sp.sympify(psi) != 0:
        psi = ex.compile_scalar(psi)
    else:
        psi = None
    amp = Amplitude(pot, frame, int(sign), default_axis_band(domain, frame), (np.asarray(c), r_out),
                    gauge, psi, **quad)
    if gauge is not None and check_gauge:
        res = gauge_dbar_residual(gauge, domain, frame)
        if res > 1e-8:
            raise ValueError(f"gauge factor is not holomorphic in z (dbar residual {res:.2e})")
    return amp


def gauge_dbar_residual(gauge, domain, frame, n=200, seed=0, step=1e-4):
    """Relative size of dbar g at random domain points (complex-step-free central differences)."""
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box
    x = rng.uniform(lo, hi, (4 * n, 3))
    x = x[domain.contains(x)][:n]
    y = frame.apply(x)
    z = y[:, 0] + 1j * np.hypot(y[:, 1], y[:, 2])
    th = np.arctan2(y[:, 2], y[:, 1])
    gt = (gauge(z + step, th) - gauge(z - step, th)) / (2 * step)
    gr = (gauge(z + 1j * step, th) - gauge(z - 1j * step, th)) / (2 * step)
    dbar = 0.5 * (gt + 1j * gr)
    scale = np.max(np.abs(gauge(z, th))) / domain.diameter
    return float(np.max(np.abs(dbar)) / max(scale, 1e-300))


# ----------------------------------------------------------------------------
# full CGO solution


def phase_function(weight: CarlemanWeight, phase: AngularPhase, sign: int):
    """F = sigma phi + i psi with gradient and Laplacian callables."""

    def grad(x):
        return sign * weight.gradient(x) + 1j * phase.gradient(x)

    def lap(x):
        return sign * weight.laplacian(x) + 1j * phase.laplacian(x)

    return grad, lap


def conjugated_operator(op: DiscreteOperator, grad_f, lap_f, h):
    """Discrete P w = h^2 L w - h (2 grad F . grad w + (lap F + 2i A . grad F) w).

    P w = h^2 e^{-F/h} L (e^{F/h} w); an n x (n + m) sparse matrix.
    """
    g = op.grid
    x = g.nodes
    gf = grad_f(x)
    a = op.pot.eval_A(x)
    c0 = lap_f(x) + 2j * np.sum(a * gf, -1)
    first = sum(sps.diags(2 * gf[:, k]) @ op.d1[k] for k in range(3))
    full = h * h * op.full - h * (first + sps.diags(c0, shape=op.full.shape))
    return full.tocsr()


def continuum_residual(pot: Potentials, x, a, grad_a, lap_a, grad_f, lap_f, h):
    """h^2 e^{-F/h} L(e^{F/h} a) pointwise; returns (total, transport part, h^2 L a)."""
    A = pot.eval_A(x)
    gf = grad_f(x)
    transport = 2 * np.sum(gf * grad_a, -1) + (lap_f(x) + 2j * np.sum(A * gf, -1)) * a
    la = (-lap_a - 2j * np.sum(A * grad_a, -1) - 1j * pot.eval_div_A(x) * a
          + np.sum(A * A, -1) * a + pot.eval_q(x) * a)
    return -h * transport + h * h * la, transport, la


def h1_scl_norm(op: DiscreteOperator, f: GridField, h):
    w = op.grid.volume_weights
    grad = op.gradient(f)
    l2 = np.sqrt(np.sum(w * np.abs(f.interior) ** 2))
    g2 = np.sqrt(np.sum(w[:, None] * np.abs(grad) ** 2))
    return float(np.sqrt(l2**2 + (h * g2) ** 2)), float(l2), float(g2)


@dataclass(eq=False)
class AmplitudeSamples:
    """Amplitude values on a grid, plus derivatives at a subsample of interior nodes."""

    interior: np.ndarray
    crossings: np.ndarray
    boundary: np.ndarray
    probe_index: np.ndarray | None = None
    probe_value: np.ndarray | None = None
    probe_grad: np.ndarray | None = None
    probe_lap: np.ndarray | None = None

    @property
    def full(self):
        return np.concatenate([self.interior, self.crossings])

    def times(self, grid, nodes, fn):
        """Samples of fn(x) a(x); probe derivatives are dropped."""
        return AmplitudeSamples(fn(grid.nodes) * self.interior, fn(grid.points) * self.crossings,
                                fn(nodes.points) * self.boundary)


def sample_amplitude(amplitude: Amplitude, grid, nodes, probe_stride: int | None = 7):
    """Values at interior nodes, crossings and boundary nodes; derivatives every ``probe_stride`` nodes."""
    a_n = amplitude.value(grid.nodes)
    a_c = amplitude.value(grid.points)
    a_b = amplitude.value(nodes.points)
    if probe_stride is None:
        return AmplitudeSamples(a_n, a_c, a_b)
    idx = np.arange(0, grid.n, probe_stride)
    a, ga, la = amplitude.derivatives(grid.nodes[idx])
    return AmplitudeSamples(a_n, a_c, a_b, idx, a, ga, la)


class RemainderSolver:
    """Solves P (h r) = s for the remainder, reusing one factorization.

    ``minimal``: least-norm solution over interior values and boundary-node
    values (crossings tied to the nodes by the hat basis).
    ``dirichlet``: r = 0 on the boundary, square interior solve.
    """

    def __init__(self, P, hat, n, mode="minimal"):
        self.P, self.hat, self.n, self.mode = P, hat, n, mode
        if mode == "dirichlet":
            self._lu = spla.splu(P[:, :n].tocsc())
        elif mode == "minimal":
            self.M = sps.hstack([P[:, :n], P[:, n:] @ hat]).tocsr()
            self._lu = spla.splu((self.M @ self.M.conj().T).tocsc())
        else:
            raise ValueError(f"unknown remainder mode {mode!r}")

    def solve(self, s):
        if self.mode == "dirichlet":
            return self._lu.solve(s), np.zeros(self.hat.shape[1], complex)
        sol = self.M.conj().T @ self._lu.solve(s)
        return sol[: self.n], sol[self.n:]


@dataclass(eq=False)
class CgoSolution:
    weight: CarlemanWeight
    phase: AngularPhase
    h: float
    sign: int
    amplitude: Amplitude
    op: DiscreteOperator
    samples: AmplitudeSamples
    r_nodes: np.ndarray            # remainder at interior nodes
    r_boundary: np.ndarray         # remainder at domain boundary nodes
    r_crossings: np.ndarray
    diagnostics: dict

    @property
    def total(self) -> GridField:
        """a + h r as a grid field; the solution is e^{(sigma phi + i psi)/h} times this."""
        s = self.samples
        return GridField(self.op.grid, s.interior + self.h * self.r_nodes,
                         s.crossings + self.h * self.r_crossings, s.boundary + self.h * self.r_boundary)

    @property
    def remainder(self) -> GridField:
        return GridField(self.op.grid, self.r_nodes, self.r_crossings, self.r_boundary)

    def grad_F(self, x):
        return phase_function(self.weight, self.phase, self.sign)[0](x)


def build_cgo(domain: Domain, pot: Potentials, weight: CarlemanWeight, phase: AngularPhase,
              h: float, sign: int, grid_step, amplitude: Amplitude | None = None,
              frame: RigidMotion | None = None, remainder: str = "minimal", nodes=None,
              samples: AmplitudeSamples | None = None, solver: RemainderSolver | None = None) -> CgoSolution:
    """CGO solution of L_{A,q} u = 0 with phase sigma phi + i psi.

    The remainder makes a + h r an exact solution of the discrete conjugated
    equation, so e^{F/h}(a + h r) solves the grid problem. The reported
    residual is the continuum quantity h^2 e^{-F/h} L(e^{F/h} a) at the probe
    nodes.
    """
    op = grid_step if isinstance(grid_step, DiscreteOperator) else assemble(domain, pot, grid_step)
    grid = op.grid
    nodes = domain.boundary if nodes is None else nodes
    if amplitude is None:
        if frame is None:
            raise ValueError("need an amplitude or a frame")
        amplitude = build_amplitude(pot, domain, frame, sign)
    grad_f, lap_f = phase_function(weight, phase, sign)
    samples = sample_amplitude(amplitude, grid, nodes) if samples is None else samples
    if solver is None:
        P = conjugated_operator(op, grad_f, lap_f, h)
        solver = RemainderSolver(P, hat_interpolation(nodes, domain.center, grid.points), grid.n, remainder)
    P = solver.P
    disc = P @ samples.full
    hr, hr_b = solver.solve(-disc)
    r_n, r_b = hr / h, hr_b / h
    r_c = solver.hat @ r_b
    rem = GridField(grid, r_n, r_c, r_b)
    norm, l2, g2 = h1_scl_norm(op, rem, h)
    vw = grid.volume_weights
    diag = {
        "discrete_residual_l2": float(np.sqrt(np.sum(vw * np.abs(disc) ** 2))),
        "remainder_h1scl": norm,
        "remainder_l2": l2,
        "remainder_grad_l2": g2,
        "remainder_mode": solver.mode,
    }
    if samples.probe_index is not None:
        idx = samples.probe_index
        x = grid.nodes[idx]
        total, transport, la = continuum_residual(pot, x, samples.probe_value, samples.probe_grad,
                                                  samples.probe_lap, grad_f, lap_f, h)
        w = vw[idx] * (grid.n / len(idx))
        diag["residual_l2"] = float(np.sqrt(np.sum(w * np.abs(total) ** 2)))
        diag["transport_l2"] = float(np.sqrt(np.sum(w * np.abs(transport) ** 2)))
        diag["La_l2"] = float(np.sqrt(np.sum(w * np.abs(la) ** 2)))
    full = np.concatenate([hr, hr_b]) if solver.mode == "minimal" else hr
    lhs = solver.M @ full if solver.mode == "minimal" else P[:, :grid.n] @ hr
    diag["discrete_check"] = float(np.linalg.norm(lhs + disc) / max(np.linalg.norm(disc), 1e-300))
    return CgoSolution(weight, phase, h, sign, amplitude, op, samples, r_n, r_b, r_c, diag)


def transport_residual_3d(amplitude: Amplitude, weight, phase, x):
    """Relative residual of 2 grad F . grad a + (lap F + 2i A . grad F) a at points x."""
    grad_f, lap_f = phase_function(weight, phase, amplitude.sign)
    a, ga, la = amplitude.derivatives(x)
    A = amplitude.pot.eval_A(x)
    gf = grad_f(x)
    res = 2 * np.sum(gf * ga, -1) + (lap_f(x) + 2j * np.sum(A * gf, -1)) * a
    scale = np.abs(lap_f(x) * a)
    return float(np.max(np.abs(res)) / np.max(scale))
