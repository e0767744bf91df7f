"""Finite-difference magnetic Schrodinger operator and its Dirichlet-to-Neumann map.

L_{A,q} u = -lap u - 2i A . grad u - i (div A) u + |A|^2 u + q u, discretized on a
Cartesian grid intersected with a star-shaped domain. Nodes next to the
boundary use Shortley-Weller stencils whose outer arm ends at the exact
boundary crossing of the grid line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
import sympy as sp
from scipy.spatial import cKDTree

from . import expressions as ex
from .geometry import BoundaryNodes, Domain, GeometryError, icosphere


class SolverError(RuntimeError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


SOLVER_RTOL = 1e-10
DIRECT_LIMIT = 40000


# ----------------------------------------------------------------------------
# potentials


@dataclass(frozen=True, eq=False)
class Potentials:
    """Real magnetic potential A (3 expressions) and electric potential q."""

    A: tuple
    q: sp.Expr
    name: str = "potentials"
    cutoff: tuple | None = None  # (center, r_in, r_out) for the compact extension of A

    @classmethod
    def from_strings(cls, A=("0", "0", "0"), q="0", name="potentials", cutoff=None):
        A = tuple(ex.parse(a) for a in A)
        for a in A:
            if sp.im(a).simplify() != 0 and a.has(sp.I):
                raise ex.ExpressionError("magnetic potential must be real-valued")
        return cls(A, ex.parse(q), name, cutoff)

    @classmethod
    def zero(cls, name="zero"):
        return cls.from_strings(name=name)

    @cached_property
    def div_A(self):
        return ex.divergence(self.A)

    @cached_property
    def curl_A(self):
        return ex.curl(self.A)

    @cached_property
    def _compiled(self):
        return (ex.compile_vector(self.A), ex.compile_scalar(self.q),
                ex.compile_scalar(self.div_A), ex.compile_vector(self.curl_A))

    def eval_A(self, x):
        return self._compiled[0](x).real

    def eval_q(self, x):
        return self._compiled[1](x)

    def eval_div_A(self, x):
        return self._compiled[2](x).real

    def eval_curl_A(self, x):
        return self._compiled[3](x).real

    def eval_A_ext(self, x):
        """Compactly supported extension chi * A, with chi = 1 near the domain."""
        a = self.eval_A(x)
        if self.cutoff is None:
            return a
        c, r_in, r_out = self.cutoff
        s = (np.linalg.norm(np.asarray(x) - np.asarray(c), axis=-1) - r_in) / (r_out - r_in)
        return a * (1.0 - ex.smooth_step(s))[..., None]

    def with_cutoff(self, domain: Domain, factor_in=1.05, factor_out=1.6):
        rmax = domain.max_radius
        return Potentials(self.A, self.q, self.name,
                          (domain.center.copy(), factor_in * rmax, factor_out * rmax))

    def conjugate_q(self):
        return Potentials(self.A, sp.conjugate(self.q), self.name + "*", self.cutoff)

    @property
    def is_zero_A(self):
        return all(sp.simplify(a) == 0 for a in self.A)

    def check_finite(self, domain: Domain, n=2000, seed=0):
        lo, hi = domain.bounding_box
        x = np.random.default_rng(seed).uniform(lo, hi, (n, 3))
        vals = [self.eval_A(x), self.eval_q(x), self.eval_div_A(x), self.eval_curl_A(x)]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ex.ExpressionError(f"potentials {self.name} are not finite on the bounding box")


def gauge_transform(pot: Potentials, psi, domain: Domain | None = None, tol=1e-8) -> Potentials:
    """A -> A + grad psi (symbolic); psi is required to vanish on the boundary."""
    psi = ex.parse(psi)
    if domain is not None:
        vals = ex.compile_scalar(psi)(domain.sample_boundary(10242).points)
        if np.max(np.abs(vals)) > tol:
            raise GeometryError(f"gauge function does not vanish on the boundary "
                                f"(max {np.max(np.abs(vals)):.2e})", code="gauge_not_zero")
    grad = ex.gradient(psi)
    return Potentials(tuple(a + g for a, g in zip(pot.A, grad)), pot.q,
                      pot.name + "+grad", pot.cutoff)


def normal_jump_gauge(domain: Domain, jump_A) -> sp.Expr:
    """Psi with Psi = 0 and d_nu Psi = jump_A . nu on the boundary.

    Psi = d(x) g(x) (|y|/R(u))^4 with d = |y| - R(u) the radial level function,
    y = x - c, u = y/|y| and g = jump_A . grad d / |grad d|^2. On the boundary
    grad Psi = g grad d, which gives the required normal derivative.
    """
    c = domain.center
    y = [ex.X1 - c[0], ex.X2 - c[1], ex.X3 - c[2]]
    rho = sp.sqrt(sum(v**2 for v in y))
    u = [v / rho for v in y]
    sub_u = {ex.X1: u[0], ex.X2: u[1], ex.X3: u[2]}
    radius = domain.radius_expr.subs(sub_u, simultaneous=True)
    level = rho - radius
    grad_level = [sp.diff(level, v) for v in ex.COORDS]
    g = sum(sp.sympify(j) * b for j, b in zip(jump_A, grad_level)) / sum(v**2 for v in grad_level)
    return level * g * (rho / radius) ** 4


def normalize_normal_component(pot1: Potentials, pot2: Potentials, domain: Domain):
    """Gauge pot1 so that A1 . nu = A2 . nu on the boundary."""
    nodes = domain.sample_boundary(2562)
    diff = np.einsum("ij,ij->i", pot2.eval_A(nodes.points) - pot1.eval_A(nodes.points), nodes.normals)
    if np.max(np.abs(diff)) < 1e-14:
        return pot1, pot2, sp.Integer(0)
    jump = [b - a for a, b in zip(pot1.A, pot2.A)]
    psi = normal_jump_gauge(domain, jump)
    new1 = Potentials(tuple(a + sp.diff(psi, x) for a, x in zip(pot1.A, ex.COORDS)),
                      pot1.q, pot1.name + "+normalized", pot1.cutoff)
    return new1, pot2, psi


# ----------------------------------------------------------------------------
# grid


INTERIOR, BOUNDARY, EXTERIOR = 1, 2, 0


@dataclass(eq=False)
class Grid:
    """Cartesian grid restricted to a domain, with Shortley-Weller crossings."""

    domain: Domain
    step: float
    origin: np.ndarray
    dims: tuple
    index: np.ndarray          # dims-shaped int array, -1 outside
    nodes: np.ndarray          # [n, 3] interior node positions
    ijk: np.ndarray            # [n, 3] integer coordinates
    points: np.ndarray         # [m, 3] boundary crossings of grid lines
    arms: list = field(default_factory=list)  # per axis: (h_minus, h_plus, j_minus, j_plus)

    @property
    def n(self):
        return len(self.nodes)

    @property
    def m(self):
        return len(self.points)

    @cached_property
    def tags(self):
        t = np.full(self.dims, EXTERIOR, np.int8)
        t[self.index >= 0] = INTERIOR
        inner = self.index >= 0
        near = np.zeros_like(inner)
        for ax in range(3):
            near |= np.roll(inner, 1, ax) | np.roll(inner, -1, ax)
        t[near & ~inner] = BOUNDARY
        return t

    @cached_property
    def cell_volume(self):
        return self.step**3

    @cached_property
    def volume_weights(self):
        """Quadrature weights: exact-ish volume of each node's cell inside the domain.

        Cells cut by the boundary are subsampled; the inside part of a cell
        whose node is exterior goes to an interior axis neighbour.
        """
        sub = 6
        off = (np.arange(sub) + 0.5) / sub - 0.5
        o = np.stack(np.meshgrid(off, off, off, indexing="ij"), -1).reshape(-1, 3) * self.step
        w = np.full(self.n, self.step**3)
        near = self.tags > 0
        for ax in range(3):
            near |= np.roll(self.tags == BOUNDARY, 1, ax) | np.roll(self.tags == BOUNDARY, -1, ax)
        cand = np.argwhere(near & (self.tags > 0))
        pos = self.origin + cand * self.step
        frac = np.empty(len(cand))
        for i0 in range(0, len(cand), 2048):
            pts = pos[i0:i0 + 2048, None, :] + o[None]
            frac[i0:i0 + 2048] = (self.domain.level(pts) < 0).mean(axis=1)
        idx = self.index[tuple(cand.T)]
        inner = idx >= 0
        w[idx[inner]] = frac[inner] * self.step**3
        for c, f in zip(cand[~inner], frac[~inner]):
            if f == 0:
                continue
            for ax in range(3):
                for sgn in (-1, 1):
                    nb = c.copy()
                    nb[ax] += sgn
                    j = self.index[tuple(nb)]
                    if j >= 0:
                        w[j] += f * self.step**3
                        break
                else:
                    continue
                break
        return w


def build_grid(domain: Domain, step: float) -> Grid:
    lo, hi = domain.bounding_box
    if domain.diameter / step < 8:
        raise GeometryError("grid step does not resolve the domain (need >= 8 cells across)",
                            code="grid_too_coarse")
    origin = lo - step
    dims = tuple(int(np.ceil((hi[k] - origin[k]) / step)) + 2 for k in range(3))
    axes = [origin[k] + step * np.arange(dims[k]) for k in range(3)]
    xx = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    inside = domain.level(xx) < 0
    index = np.full(dims, -1, np.int64)
    ijk = np.argwhere(inside)
    index[tuple(ijk.T)] = np.arange(len(ijk))
    nodes = xx[tuple(ijk.T)]
    n = len(nodes)
    points = []
    arms = []
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = 1.0
        h = np.full((n, 2), step)
        j = np.zeros((n, 2), np.int64)
        for side, sgn in enumerate((-1, 1)):
            nb = ijk.copy()
            nb[:, ax] += sgn
            jn = index[tuple(nb.T)]
            j[:, side] = jn
            cut = np.flatnonzero(jn < 0)
            if len(cut):
                d = _crossing(domain, nodes[cut], sgn * e, step)
                d = np.maximum(d, 1e-10 * step)
                h[cut, side] = d
                j[cut, side] = n + sum(len(p) for p in points) + np.arange(len(cut))
                points.append(nodes[cut] + d[:, None] * sgn * e)
        arms.append((h[:, 0], h[:, 1], j[:, 0], j[:, 1]))
    points = np.concatenate(points) if points else np.zeros((0, 3))
    return Grid(domain, float(step), origin, dims, index, nodes, ijk, points, arms)


def _crossing(domain: Domain, x, direction, step, iters=60):
    lo = np.zeros(len(x))
    hi = np.full(len(x), step)
    for _ in range(iters):
        m = 0.5 * (lo + hi)
        inside = domain.level(x + m[:, None] * direction) < 0
        lo = np.where(inside, m, lo)
        hi = np.where(inside, hi, m)
    return 0.5 * (lo + hi)


def difference_matrices(grid: Grid):
    """Shortley-Weller second- and first-derivative matrices, n x (n + m), per axis."""
    n, m = grid.n, grid.m
    rows = np.arange(n)
    d2, d1 = [], []
    for hm, hp, jm, jp in grid.arms:
        s = hm + hp
        c2 = (2 / (hp * s), 2 / (hm * s), -2 / (hp * hm))
        c1 = (hm / (hp * s), -hp / (hm * s), (hp - hm) / (hp * hm))
        for c, out in ((c2, d2), (c1, d1)):
            data = np.concatenate(c)
            r = np.concatenate([rows, rows, rows])
            col = np.concatenate([jp, jm, rows])
            out.append(sps.csr_matrix((data, (r, col)), shape=(n, n + m)))
    return d2, d1


# ----------------------------------------------------------------------------
# grid fields


@dataclass(eq=False)
class GridField:
    """Values at interior nodes, at boundary crossings and (optionally) at boundary nodes."""

    grid: Grid
    interior: np.ndarray
    crossings: np.ndarray
    boundary: np.ndarray | None = None

    @property
    def full(self):
        return np.concatenate([self.interior, self.crossings], axis=0)

    def at(self, ijk):
        idx = self.grid.index[tuple(np.atleast_2d(ijk).T)]
        if np.any(idx < 0):
            raise IndexError("grid field is not defined at exterior nodes")
        return self.interior[idx]

    def as_array(self):
        """Dense dims-shaped array with NaN outside the domain."""
        a = np.full(self.grid.dims + self.interior.shape[1:], np.nan,
                    dtype=np.result_type(self.interior, np.float64))
        a[tuple(self.grid.ijk.T)] = self.interior
        return a

    @classmethod
    def sample(cls, grid: Grid, fn, nodes: BoundaryNodes | None = None):
        b = None if nodes is None else np.asarray(fn(nodes.points))
        return cls(grid, np.asarray(fn(grid.nodes)), np.asarray(fn(grid.points)), b)

    def __sub__(self, other):
        b = None if self.boundary is None or other.boundary is None else self.boundary - other.boundary
        return GridField(self.grid, self.interior - other.interior,
                         self.crossings - other.crossings, b)


# ----------------------------------------------------------------------------
# operator


@dataclass(eq=False)
class DiscreteOperator:
    grid: Grid
    pot: Potentials
    full: sps.csr_matrix       # n x (n + m)
    d2: list
    d1: list
    diag: np.ndarray

    @property
    def K(self):
        return self.full[:, : self.grid.n].tocsc()

    @property
    def B(self):
        return self.full[:, self.grid.n:].tocsc()

    def apply(self, u: GridField):
        return self.full @ u.full

    def gradient(self, u: GridField):
        return np.stack([d @ u.full for d in self.d1], -1)

    @cached_property
    def factor(self):
        return _Solver(self.K)


def assemble(domain: Domain, pot: Potentials, grid_step: float | Grid) -> DiscreteOperator:
    grid = grid_step if isinstance(grid_step, Grid) else build_grid(domain, grid_step)
    d2, d1 = difference_matrices(grid)
    x = grid.nodes
    a = pot.eval_A(x)
    c0 = -1j * pot.eval_div_A(x) + np.sum(a * a, -1) + pot.eval_q(x)
    full = -(d2[0] + d2[1] + d2[2])
    for k in range(3):
        if np.any(a[:, k] != 0):
            full = full - 2j * sps.diags(a[:, k]) @ d1[k]
    full = full.astype(complex) + sps.diags(c0, shape=(grid.n, grid.n + grid.m))
    return DiscreteOperator(grid, pot, full.tocsr(), d2, d1, c0)


class _Solver:
    def __init__(self, K):
        self.K = K
        self.n = K.shape[0]
        self.lu = spla.splu(K.tocsc()) if self.n <= DIRECT_LIMIT else None
        if self.lu is None:
            d = K.diagonal()
            self.M = spla.LinearOperator(K.shape, lambda v: v / d, dtype=complex)

    def solve(self, rhs):
        rhs = np.asarray(rhs, complex)
        if self.lu is not None:
            return self.lu.solve(rhs)
        if rhs.ndim == 2:
            return np.stack([self.solve(rhs[:, k]) for k in range(rhs.shape[1])], 1)
        history = []
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0:
            return np.zeros_like(rhs)

        def cb(xk):
            history.append(np.linalg.norm(self.K @ xk - rhs) / bnorm)

        x, info = spla.bicgstab(self.K, rhs, rtol=SOLVER_RTOL, atol=0.0, maxiter=20000,
                                M=self.M, callback=cb)
        if info != 0:
            raise SolverError(f"BiCGStab did not converge (info={info})", history)
        return x


def hat_interpolation(nodes: BoundaryNodes, center, x) -> sps.csr_matrix:
    """Sparse matrix evaluating piecewise-linear boundary data (on the direction mesh) at x."""
    x = np.atleast_2d(np.asarray(x, float))
    u = x - center
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    tri = nodes.triangles
    dirs = nodes.directions
    cen = dirs[tri].mean(axis=1)
    tree = cKDTree(cen)
    k = min(12, len(tri))
    _, cand = tree.query(u, k)
    rows, cols, vals = [], [], []
    for i in range(len(u)):
        best, best_lam = None, None
        for t in cand[i]:
            m = dirs[tri[t]].T
            lam = np.linalg.solve(m, u[i])
            if best is None or lam.min() > best_lam.min():
                best, best_lam = t, lam
            if lam.min() >= -1e-12:
                break
        lam = best_lam / best_lam.sum()
        rows += [i] * 3
        cols += list(tri[best])
        vals += list(lam)
    return sps.csr_matrix((vals, (rows, cols)), shape=(len(u), len(dirs)))


def solve_dirichlet(op: DiscreteOperator, f, nodes: BoundaryNodes | None = None) -> GridField:
    """Solve L u = 0 with u = f on the boundary.

    ``f`` is a callable on world points or an array of values at the domain
    boundary nodes (extended by the hat basis).
    """
    grid = op.grid
    if callable(f):
        fp = np.asarray(f(grid.points), complex)
        fb = np.asarray(f(nodes.points), complex) if nodes is not None else None
    else:
        nodes = grid.domain.boundary if nodes is None else nodes
        fb = np.asarray(f, complex)
        fp = hat_interpolation(nodes, grid.domain.center, grid.points) @ fb
    rhs = -(op.B @ fp)
    u = op.factor.solve(rhs)
    res = np.linalg.norm(op.K @ u - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > 1e-8:
        raise SolverError(f"Dirichlet solve residual {res:.2e} too large", [res])
    return GridField(grid, u, fp, fb)


def solve_grid(op: DiscreteOperator, source, boundary_points) -> np.ndarray:
    """Interior values of the solution of L u = source with crossing values given."""
    rhs = np.asarray(source, complex) - op.B @ np.asarray(boundary_points, complex)
    return op.factor.solve(rhs)


# ----------------------------------------------------------------------------
# normal derivatives and DN maps


@dataclass(eq=False)
class NormalSampler:
    """Trilinear samples at x - delta nu and x - 2 delta nu for boundary nodes x."""

    delta: np.ndarray
    t1: sps.csr_matrix
    t2: sps.csr_matrix

    def derivative(self, u_interior, u_boundary):
        """One-sided second-order outward normal derivative."""
        u1 = self.t1 @ u_interior
        u2 = self.t2 @ u_interior
        d = self.delta.reshape((-1,) + (1,) * (np.ndim(u_boundary) - 1))
        return (3 * u_boundary - 4 * u1 + u2) / (2 * d)


def _trilinear(grid: Grid, x):
    """Rows of trilinear weights; returns (matrix, ok mask) where ok means all corners interior."""
    s = (x - grid.origin) / grid.step
    base = np.floor(s).astype(np.int64)
    f = s - base
    rows, cols, vals = [], [], []
    ok = np.ones(len(x), bool)
    for c in range(8):
        off = np.array([(c >> 2) & 1, (c >> 1) & 1, c & 1])
        idx = base + off
        valid = np.all((idx >= 0) & (idx < np.array(grid.dims)), axis=1)
        j = np.full(len(x), -1)
        j[valid] = grid.index[tuple(idx[valid].T)]
        ok &= j >= 0
        w = np.prod(np.where(off == 1, f, 1 - f), axis=1)
        rows.append(np.arange(len(x)))
        cols.append(np.maximum(j, 0))
        vals.append(w)
    mat = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(len(x), grid.n))
    return mat, ok


def normal_sampler(grid: Grid, nodes: BoundaryNodes) -> NormalSampler:
    delta = np.full(len(nodes), 1.01 * np.sqrt(3) * grid.step)
    todo = np.arange(len(nodes))
    t1 = sps.lil_matrix((len(nodes), grid.n))
    t2 = sps.lil_matrix((len(nodes), grid.n))
    for _ in range(40):
        x = nodes.points[todo]
        nu = nodes.normals[todo]
        m1, ok1 = _trilinear(grid, x - delta[todo, None] * nu)
        m2, ok2 = _trilinear(grid, x - 2 * delta[todo, None] * nu)
        ok = ok1 & ok2
        good = todo[ok]
        t1[good] = m1[ok]
        t2[good] = m2[ok]
        todo = todo[~ok]
        if len(todo) == 0:
            break
        delta[todo] *= 1.1
    else:
        raise GeometryError("normal samples could not be placed inside the grid")
    return NormalSampler(delta, t1.tocsr(), t2.tocsr())


def magnetic_normal_derivative(op: DiscreteOperator, u: GridField, nodes: BoundaryNodes,
                               sampler: NormalSampler | None = None):
    """(d_nu + i A . nu) u at boundary nodes; u.boundary must hold the nodal values."""
    sampler = normal_sampler(op.grid, nodes) if sampler is None else sampler
    anu = np.einsum("ij,ij->i", op.pot.eval_A(nodes.points), nodes.normals)
    return sampler.derivative(u.interior, u.boundary) + 1j * anu * u.boundary


@dataclass(eq=False)
class DnMap:
    basis: np.ndarray        # [N, 3] boundary node positions (ordering of the basis)
    matrix: np.ndarray       # [N, N] complex
    grid_step: float
    potentials_id: str
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix.shape != (len(self.basis), len(self.basis)):
            raise ValueError("DN matrix dimensions must equal the boundary node count")

    def apply(self, f):
        return self.matrix @ f

    def weighted(self):
        w = np.sqrt(self.weights)
        return w[:, None] * self.matrix / w[None, :]

    def norm(self):
        return float(np.linalg.norm(self.weighted()))

    def distance(self, other: "DnMap"):
        """dsigma-weighted Frobenius distance."""
        w = np.sqrt(self.weights)
        return float(np.linalg.norm(w[:, None] * (self.matrix - other.matrix) / w[None, :]))

    def hermitian_defect(self):
        """Relative size of W N - N^H W (zero for a self-adjoint real problem)."""
        wn = self.weights[:, None] * self.matrix
        return float(np.linalg.norm(wn - wn.conj().T) / np.linalg.norm(wn))

    def to_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(b"DNMAP001")
            fh.write(struct.pack("<qd", len(self.basis), self.grid_step))
            pid = self.potentials_id.encode()[:48].ljust(48, b"\0")
            fh.write(pid)
            fh.write(np.ascontiguousarray(self.basis, "<f8").tobytes())
            w = self.weights if self.weights is not None else np.zeros(len(self.basis))
            fh.write(np.ascontiguousarray(w, "<f8").tobytes())
            fh.write(np.ascontiguousarray(self.matrix, "<c16").tobytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            if fh.read(8) != b"DNMAP001":
                raise ValueError("not a DN map file")
            n, step = struct.unpack("<qd", fh.read(16))
            pid = fh.read(48).rstrip(b"\0").decode()
            basis = np.frombuffer(fh.read(24 * n), "<f8").reshape(n, 3).copy()
            w = np.frombuffer(fh.read(8 * n), "<f8").copy()
            mat = np.frombuffer(fh.read(16 * n * n), "<c16").reshape(n, n).copy()
        return cls(basis, mat, step, pid, w)

    def to_csv(self, path):
        n = len(self.basis)
        rows = np.column_stack([np.repeat(np.arange(n), n), np.tile(np.arange(n), n),
                                self.matrix.real.ravel(), self.matrix.imag.ravel()])
        np.savetxt(path, rows, delimiter=",", header="row,col,re,im", comments="",
                   fmt=["%d", "%d", "%.17g", "%.17g"])


def dn_map(domain: Domain, pot: Potentials, grid_step, nodes: BoundaryNodes | None = None,
           block: int = 256) -> DnMap:
    """Dense DN matrix, one column per boundary hat function."""
    op = grid_step if isinstance(grid_step, DiscreteOperator) else assemble(domain, pot, grid_step)
    grid = op.grid
    nodes = domain.boundary if nodes is None else nodes
    hat = hat_interpolation(nodes, domain.center, grid.points)
    sampler = normal_sampler(grid, nodes)
    s = (-4 * sampler.t1 + sampler.t2).multiply(1.0 / (2 * sampler.delta)[:, None]).tocsr()
    anu = np.einsum("ij,ij->i", pot.eval_A(nodes.points), nodes.normals)
    nb = len(nodes)
    mat = np.diag(3 / (2 * sampler.delta) + 1j * anu).astype(complex)
    rhs_all = -(op.B @ hat)
    for j0 in range(0, nb, block):
        cols = slice(j0, min(nb, j0 + block))
        u = op.factor.solve(rhs_all[:, cols].toarray())
        mat[:, cols] += s @ u
    return DnMap(nodes.points.copy(), mat, float(grid.step), pot.name, nodes.weights.copy())


# ----------------------------------------------------------------------------
# spectral checks and Green identity


def check_assumption_1(domain: Domain, pot: Potentials, coarse_step: float, flag_factor=10.0,
                       tol=SOLVER_RTOL):
    """Smallest-magnitude eigenvalue of the zero-Dirichlet discrete operator.

    Returns (lambda_min, usable) where usable is False when |lambda_min| is
    below ``flag_factor * tol``.
    """
    op = assemble(domain, pot, coarse_step)
    K = op.K
    if K.shape[0] <= 600:
        vals = np.linalg.eigvals(K.toarray())
    else:
        vals = spla.eigs(K, k=3, sigma=0.0, which="LM", return_eigenvectors=False, tol=1e-12)
    lam = complex(vals[np.argmin(np.abs(vals))])
    return lam, bool(abs(lam) >= flag_factor * tol)


def green_residual(domain: Domain, pot: Potentials, u: GridField, v: GridField,
                   nodes: BoundaryNodes | None = None, op: DiscreteOperator | None = None):
    """Discrete Green-formula defect for the magnetic Schrodinger operator."""
    nodes = domain.boundary if nodes is None else nodes
    op = assemble(domain, pot, u.grid) if op is None else op
    op_bar = assemble(domain, pot.conjugate_q(), u.grid)
    vol = op.grid.cell_volume
    lu = op.apply(u)
    lv = op_bar.apply(v)
    volume = vol * (np.vdot(v.interior, lu) - np.vdot(lv, u.interior))
    sampler = normal_sampler(op.grid, nodes)
    nu_ = magnetic_normal_derivative(op, u, nodes, sampler)
    nv_ = magnetic_normal_derivative(op, v, nodes, sampler)
    w = nodes.weights
    surface = np.sum(w * u.boundary * np.conj(nv_)) - np.sum(w * nu_ * np.conj(v.boundary))
    return complex(volume - surface)


# ----------------------------------------------------------------------------
# convergence and reference checks


def apply_continuum(pot: Potentials, u: sp.Expr) -> sp.Expr:
    """L_{A,q} u symbolically."""
    grad = ex.gradient(u)
    return (-ex.laplacian(u) - 2 * sp.I * sum(a * g for a, g in zip(pot.A, grad))
            - sp.I * pot.div_A * u + sum(a**2 for a in pot.A) * u + pot.q * u)


def manufactured_error(domain: Domain, pot: Potentials, u, grid_step) -> float:
    """Max nodal error of the discrete solution of L u = f with exact Dirichlet data."""
    u = ex.parse(u)
    f = ex.compile_scalar(apply_continuum(pot, u))
    ue = ex.compile_scalar(u)
    op = assemble(domain, pot, grid_step)
    x = op.grid.nodes
    v = solve_grid(op, f(x), ue(op.grid.points))
    return float(np.max(np.abs(v - ue(x))))


def convergence_slope(steps, errors):
    """Least-squares slope of log(error) against log(step)."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


# Homogeneous harmonic polynomials of degree 1, 2, 3; on the unit ball their
# DN data (A = 0, q = 0) is degree times the boundary values.
HARMONIC_PROBES = ((1, "x1"), (2, "x1*x2"), (2, "x1**2 - x2**2"), (3, "x1*x2*x3"),
                   (3, "x1**3 - 3*x1*x2**2"))


def harmonic_reference_error(dn: DnMap, nodes: BoundaryNodes, probes=HARMONIC_PROBES) -> float:
    """Worst relative dsigma-L2 error of N Y_l against l Y_l (unit ball, A = 0, q = 0)."""
    w = nodes.weights
    worst = 0.0
    for degree, text in probes:
        y = ex.compile_scalar(ex.parse(text))(nodes.points)
        err = dn.apply(y) - degree * y
        worst = max(worst, float(np.sqrt(np.sum(w * np.abs(err) ** 2) / np.sum(w * np.abs(degree * y) ** 2))))
    return worst


# Gauge functions vanishing on the unit sphere, used for the DN gauge-invariance check.
GAUGE_PROBES = ("0.5*(1 - x1**2 - x2**2 - x3**2)*x1",
                "0.3*(1 - x1**2 - x2**2 - x3**2)*exp(x2)",
                "(1 - x1**2 - x2**2 - x3**2)**2*sin(2*x3)")


def gauge_invariance(domain: Domain, pot: Potentials, grid_step, nodes: BoundaryNodes | None = None,
                     gauges=GAUGE_PROBES):
    """||N_{A + grad psi, q} - N_{A, q}||_F / ||N_{A, q}||_F for each gauge function."""
    nodes = domain.boundary if nodes is None else nodes
    ref = dn_map(domain, pot, grid_step, nodes)
    out = []
    for psi in gauges:
        other = dn_map(domain, gauge_transform(pot, psi, domain), grid_step, nodes)
        out.append(ref.distance(other) / ref.norm())
    return out
