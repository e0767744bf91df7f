"""Star-shaped domains, observation points, direction cones and slicing.

A domain is described by a radial profile R(u) on the unit sphere about a
center c, so that the boundary is {c + R(u) u}. The level function
d(x) = |x - c| - R((x - c)/|x - c|) is negative inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import sympy as sp
from scipy.optimize import linprog, minimize

from .expressions import COORDS, X1, X2, X3


class GeometryError(ValueError):
    """Raised when a geometric precondition fails."""

    def __init__(self, message, code="geometry_error"):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------------------
# sphere sampling


def icosphere(level: int):
    """Subdivided icosahedron: (unit vertices [N, 3], triangles [M, 3])."""
    v, f = _icosphere(level)
    return v.copy(), f.copy()


@lru_cache(maxsize=None)
def _icosphere(level: int):
    t = (1.0 + 5**0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache = {}
        new_faces = []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=np.int64)


def spherical_triangle_areas(v, tri):
    """Exact solid angles of spherical triangles (Van Oosterom-Strackee)."""
    a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = (1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c)
           + np.einsum("ij,ij->i", c, a))
    return 2.0 * np.arctan2(num, den)


_LEVEL_FOR_COUNT = {12: 0, 42: 1, 162: 2, 642: 3, 2562: 4, 10242: 5, 40962: 6}


# ----------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class BoundaryNodes:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    directions: np.ndarray
    triangles: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Domain:
    """Star-shaped smooth region {c + rho u : rho < R(u)}."""

    name: str
    params: tuple
    center: np.ndarray
    radius_expr: sp.Expr  # R as an expression in the unit-direction symbols (x1, x2, x3)
    resolution: int = 2562

    @cached_property
    def _level_fns(self):
        y = sp.Matrix(COORDS)
        rho = sp.sqrt(X1**2 + X2**2 + X3**2)
        radius = self.radius_expr.subs({X1: X1 / rho, X2: X2 / rho, X3: X3 / rho},
                                       simultaneous=True)
        level = rho - radius
        grad = [sp.diff(level, c) for c in COORDS]
        f_level = sp.lambdify(COORDS, level, "numpy", cse=True)
        f_grad = sp.lambdify(COORDS, grad, "numpy", cse=True)
        f_rad = sp.lambdify(COORDS, self.radius_expr, "numpy", cse=True)
        del y
        return f_level, f_grad, f_rad

    def radius(self, u):
        u = np.asarray(u, float)
        out = self._level_fns[2](u[..., 0], u[..., 1], u[..., 2])
        return np.broadcast_to(np.asarray(out, float), u.shape[:-1]).copy()

    def level(self, x):
        """Radial level function: negative inside, zero on the boundary."""
        y = np.asarray(x, float) - self.center
        rho = np.linalg.norm(y, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        u = y / safe[..., None]
        val = rho - self.radius(u)
        return np.where(rho > 0, val, -self.radius(np.array([0.0, 0.0, 1.0])))

    def level_gradient(self, x):
        y = np.asarray(x, float) - self.center
        g = self._level_fns[1](y[..., 0], y[..., 1], y[..., 2])
        return np.stack([np.broadcast_to(np.asarray(c, float), y.shape[:-1]) for c in g], -1)

    def normal(self, x):
        g = self.level_gradient(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def contains(self, x):
        return self.level(x) < 0

    def boundary_point(self, u):
        u = np.asarray(u, float)
        return self.center + self.radius(u)[..., None] * u

    @cached_property
    def boundary(self) -> BoundaryNodes:
        return self.sample_boundary(self.resolution)

    def sample_boundary(self, count: int) -> BoundaryNodes:
        if count not in _LEVEL_FOR_COUNT:
            raise GeometryError(f"boundary resolution must be one of {sorted(_LEVEL_FOR_COUNT)}")
        dirs, tri = icosphere(_LEVEL_FOR_COUNT[count])
        pts = self.boundary_point(dirs)
        nu = self.normal(pts)
        solid = np.zeros(len(dirs))
        np.add.at(solid, tri.ravel(), np.repeat(spherical_triangle_areas(dirs, tri) / 3.0, 3))
        rad = self.radius(dirs)
        weights = solid * rad**2 / np.einsum("ij,ij->i", dirs, nu)
        return BoundaryNodes(pts, nu, weights, dirs, tri)

    @cached_property
    def bounding_box(self):
        b = self.sample_boundary(10242).points
        pad = 1e-3 * np.ptp(b, axis=0).max()
        return b.min(axis=0) - pad, b.max(axis=0) + pad

    @property
    def diameter(self):
        lo, hi = self.bounding_box
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def max_radius(self):
        return float(self.radius(self.sample_boundary(10242).directions).max())

    @cached_property
    def min_radius(self):
        return float(self.radius(self.sample_boundary(10242).directions).min())

    def volume(self, level=5):
        dirs, tri = icosphere(level)
        solid = spherical_triangle_areas(dirs, tri)
        cen = dirs[tri].mean(axis=1)
        cen /= np.linalg.norm(cen, axis=1, keepdims=True)
        return float(np.sum(solid * self.radius(cen) ** 3) / 3.0)

    def ray_exit(self, origin, direction, t_max):
        """Distance along each ray from an interior origin to the boundary (bisection)."""
        origin = np.broadcast_to(np.asarray(origin, float), np.shape(direction))
        direction = np.asarray(direction, float)
        n_steps = 64
        ts = np.linspace(0.0, t_max, n_steps + 1)
        lo = np.zeros(direction.shape[:-1])
        hi = np.full(direction.shape[:-1], np.nan)
        found = np.zeros(direction.shape[:-1], bool)
        for k in range(1, n_steps + 1):
            val = self.level(origin + ts[k] * direction)
            new = (~found) & (val >= 0)
            hi[new] = ts[k]
            lo[new] = ts[k - 1]
            found |= new
        if not found.all():
            raise GeometryError("ray does not leave the domain within t_max")
        for _ in range(60):
            m = 0.5 * (lo + hi)
            inside = self.level(origin + m[..., None] * direction) < 0
            lo = np.where(inside, m, lo)
            hi = np.where(inside, hi, m)
        return 0.5 * (lo + hi)


def build_domain(profile: str, *params, center=(0.0, 0.0, 0.0), resolution: int = 2562) -> Domain:
    """Build a star-shaped domain from a named radial profile.

    Profiles: ``ball(radius)``, ``ellipsoid(a, b, c)`` and
    ``bumped_ball(radius, amplitude)`` with R(u) = radius + amplitude * (3 u3^2 - 1)/2.
    """
    center = np.asarray(center, float)
    params = tuple(float(p) for p in params)
    if profile == "ball":
        (radius,) = params
        if radius <= 0:
            raise GeometryError("ball radius must be positive")
        expr = sp.Float(radius)
    elif profile == "ellipsoid":
        a, b, c = params
        if min(a, b, c) <= 0:
            raise GeometryError("ellipsoid semi-axes must be positive")
        if a == b == c:
            expr = sp.Float(a)
        else:
            expr = 1 / sp.sqrt(X1**2 / a**2 + X2**2 / b**2 + X3**2 / c**2)
    elif profile == "bumped_ball":
        radius, amp = params
        if radius <= 0:
            raise GeometryError("bumped_ball radius must be positive")
        if abs(amp) >= radius / 4:
            raise GeometryError(
                f"bump amplitude {amp} must be below radius/4 = {radius / 4}",
                code="not_star_shaped")
        expr = radius + amp * (3 * X3**2 - 1) / 2
    else:
        raise GeometryError(f"unknown profile {profile!r}")
    dom = Domain(profile, params, center, sp.sympify(expr), resolution)
    check_star_shaped(dom)
    return dom


def check_star_shaped(domain: Domain, count: int = 10242):
    """Reject profiles where (x - c) . nu changes sign on a fine boundary sample."""
    dirs, _ = icosphere(_LEVEL_FOR_COUNT[count])
    rad = domain.radius(dirs)
    if np.any(rad <= 0):
        raise GeometryError("radial profile is not positive", code="not_star_shaped")
    pts = domain.center + rad[:, None] * dirs
    s = np.einsum("ij,ij->i", pts - domain.center, domain.normal(pts))
    if s.min() <= 0:
        raise GeometryError("(x - c) . nu changes sign on the boundary", code="not_star_shaped")


# ----------------------------------------------------------------------------
# observation point, front/back split, direction cone


@dataclass(frozen=True)
class ObservationPoint:
    x0: np.ndarray
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, float))
        if self.epsilon < 0:
            raise GeometryError("epsilon must be non-negative")


def separating_hyperplane(domain: Domain, x0, count: int = 10242):
    """Max-margin unit normal n and margin m with (x - x0) . n >= m on the boundary sample."""
    pts = domain.sample_boundary(count).points - np.asarray(x0, float)
    # variables (n1, n2, n3, m): maximize m subject to -(p . n) + m <= 0, |n_i| <= 1
    a_ub = np.hstack([-pts, np.ones((len(pts), 1))])
    res = linprog(c=[0, 0, 0, -1], A_ub=a_ub, b_ub=np.zeros(len(pts)),
                  bounds=[(-1, 1)] * 3 + [(None, None)], method="highs")
    if not res.success:
        raise GeometryError("separating-hyperplane search failed", code="x0_in_convex_hull")
    n = res.x[:3]
    norm = np.linalg.norm(n)
    if norm == 0 or res.x[3] <= 1e-9:
        raise GeometryError("x0 lies in the closed convex hull of the domain",
                            code="x0_in_convex_hull")
    n = _refine_euclidean_margin(pts, n / norm)
    margin = float(np.min(pts @ n))
    if margin <= 1e-9:
        raise GeometryError("x0 lies in the closed convex hull of the domain",
                            code="x0_in_convex_hull")
    return n, margin


def _refine_euclidean_margin(pts, n):
    """Polish the box-constrained LP direction to the Euclidean max-margin one."""
    m0 = pts @ n
    band = pts[m0 <= m0.min() + 0.5 * (np.ptp(m0) + 1e-12)]
    res = minimize(lambda v: -v[3], np.append(n, m0.min()), method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda v: band @ v[:3] - v[3],
                                 "jac": lambda v: np.hstack([band, -np.ones((len(band), 1))])},
                                {"type": "ineq", "fun": lambda v: 1.0 - v[:3] @ v[:3],
                                 "jac": lambda v: np.append(-2 * v[:3], 0.0)}],
                   options={"ftol": 1e-14, "maxiter": 200})
    cand = res.x[:3] / np.linalg.norm(res.x[:3])
    return cand if np.min(pts @ cand) >= np.min(pts @ n) else n


def validate_observation(domain: Domain, obs: ObservationPoint):
    separating_hyperplane(domain, obs.x0)


@dataclass(frozen=True)
class BoundarySplit:
    front: np.ndarray      # bool masks over domain.boundary nodes
    back: np.ndarray
    front_eps: np.ndarray
    front_area: float
    back_area: float
    front_eps_area: float


def front_back_split(domain: Domain, obs: ObservationPoint, nodes: BoundaryNodes | None = None):
    nodes = domain.boundary if nodes is None else nodes
    y = nodes.points - obs.x0
    s = np.einsum("ij,ij->i", y, nodes.normals)
    front = s <= 0
    back = ~front
    front_eps = s < obs.epsilon * np.einsum("ij,ij->i", y, y)
    w = nodes.weights
    return BoundarySplit(front, back, front_eps, float(w[front].sum()),
                         float(w[back].sum()), float(w[front_eps].sum()))


@dataclass(frozen=True)
class DirectionCone:
    """Cone Gamma = {theta : theta . axis > cos_half}; Gamma_check is its antipode."""

    axis: np.ndarray
    cos_half: float
    omega0: np.ndarray
    r0: float
    hyperplane: tuple  # (unit normal, offset): H = {x : n . x = offset}

    @property
    def half_angle(self):
        return float(np.arccos(self.cos_half))

    def in_gamma(self, theta):
        theta = np.asarray(theta, float)
        return theta @ self.axis > self.cos_half

    def in_gamma_check(self, theta):
        return self.in_gamma(-np.asarray(theta, float))

    def in_gamma0(self, omega):
        """Admissible neighborhood of omega0: |omega . axis| < cos_half / 2."""
        omega = np.asarray(omega, float)
        return np.abs(omega @ self.axis) < 0.5 * self.cos_half


def build_direction_cone(domain: Domain, obs: ObservationPoint, slack: float = 0.05) -> DirectionCone:
    n, margin = separating_hyperplane(domain, obs.x0)
    offset_from_x0 = (1.0 - slack) * margin
    pts = domain.sample_boundary(10242).points
    r0 = float(np.linalg.norm(pts - obs.x0, axis=1).max() * (1.0 + slack))
    cos_half = offset_from_x0 / r0
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    omega0 = e - (e @ n) * n
    omega0 /= np.linalg.norm(omega0)
    plane = (n, float(n @ obs.x0 + offset_from_x0))
    return DirectionCone(n, float(cos_half), omega0, r0, plane)


# ----------------------------------------------------------------------------
# normalized frame


@dataclass(frozen=True)
class RigidMotion:
    """y = Q (x - x0); Q is a rotation taking omega to e1."""

    rotation: np.ndarray
    x0: np.ndarray

    def apply(self, x):
        return (np.asarray(x, float) - self.x0) @ self.rotation.T

    def inverse(self, y):
        return np.asarray(y, float) @ self.rotation + self.x0

    def apply_vector(self, v):
        return np.asarray(v, float) @ self.rotation.T

    def inverse_vector(self, v):
        return np.asarray(v) @ self.rotation


def rotation_to_e1(omega):
    omega = np.asarray(omega, float)
    omega = omega / np.linalg.norm(omega)
    e1 = np.array([1.0, 0.0, 0.0])
    c = float(omega @ e1)
    if c > 1 - 1e-15:
        return np.eye(3)
    if c < -1 + 1e-15:
        return np.diag([-1.0, -1.0, 1.0])
    k = np.cross(omega, e1)
    s = np.linalg.norm(k)
    k /= s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * kx @ kx


def normalize_frame(obs: ObservationPoint, omega, cone: DirectionCone | None = None) -> RigidMotion:
    omega = np.asarray(omega, float)
    omega = omega / np.linalg.norm(omega)
    if cone is not None and not cone.in_gamma0(omega):
        raise GeometryError("omega is outside the admissible neighborhood Gamma0",
                            code="omega_not_admissible")
    return RigidMotion(rotation_to_e1(omega), obs.x0.copy())


def cylindrical(motion: RigidMotion, x):
    """(t, r, theta-angle) of world points in the normalized frame."""
    y = motion.apply(x)
    return y[..., 0], np.hypot(y[..., 1], y[..., 2]), np.arctan2(y[..., 2], y[..., 1])


# ----------------------------------------------------------------------------
# planar regions and slices


def _gauss_legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(eq=False)
class PlanarRegion:
    """Star-shaped planar region in the complex z = t + i r plane.

    ``boundary`` holds the closed curve sampled at equispaced angles about
    ``center`` (counterclockwise); ``level`` is negative inside.
    """

    center: complex
    boundary: np.ndarray
    level: object
    grid_t: np.ndarray = field(default=None)
    grid_r: np.ndarray = field(default=None)
    mask: np.ndarray = field(default=None)
    cell_fraction: np.ndarray = field(default=None)

    @property
    def n_nodes(self):
        return len(self.boundary)

    @cached_property
    def _radial_fft(self):
        return np.fft.fft(np.abs(self.boundary - self.center))

    def radial(self, alpha):
        """Trigonometric interpolation of the boundary radius rho(alpha)."""
        coef = self._radial_fft / self.n_nodes
        n = self.n_nodes
        k = np.fft.fftfreq(n, 1.0 / n)
        alpha = np.asarray(alpha, float)
        vals = np.exp(1j * np.multiply.outer(alpha, k)) @ coef
        return vals.real

    @cached_property
    def dzeta(self):
        """d zeta / d alpha at the boundary nodes (spectral differentiation)."""
        n = self.n_nodes
        k = np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        return np.fft.ifft(1j * k * np.fft.fft(self.boundary))

    @property
    def dalpha(self):
        return 2 * np.pi / self.n_nodes

    @property
    def arclength_weights(self):
        return np.abs(self.dzeta) * self.dalpha

    @property
    def perimeter(self):
        return float(self.arclength_weights.sum())

    def polygon_area(self):
        z = self.boundary
        return float(0.5 * np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag))

    def area(self, n_ang=128):
        alpha = 2 * np.pi * np.arange(n_ang) / n_ang
        return float(0.5 * np.sum(self.radial(alpha) ** 2) * 2 * np.pi / n_ang)

    def quadrature(self, n_ang=64, n_rad=24):
        """Polar Gauss nodes z and weights (dt dr) covering the region."""
        alpha = 2 * np.pi * np.arange(n_ang) / n_ang
        rho = self.radial(alpha)
        s, ws = _gauss_legendre01(n_rad)
        rr = np.outer(rho, s)
        z = self.center + rr * np.exp(1j * alpha)[:, None]
        w = (2 * np.pi / n_ang) * np.outer(rho, ws) * rr
        return z.ravel(), w.ravel()

    def add_grid(self, n: int, pad: float = 0.02, subsample: int = 6):
        z = self.boundary
        lo_t, hi_t = z.real.min(), z.real.max()
        lo_r, hi_r = z.imag.min(), z.imag.max()
        ext = max(hi_t - lo_t, hi_r - lo_r) * pad
        self.grid_t = np.linspace(lo_t - ext, hi_t + ext, n)
        self.grid_r = np.linspace(lo_r - ext, hi_r + ext, n)
        tt, rr = np.meshgrid(self.grid_t, self.grid_r, indexing="ij")
        ht, hr = self.grid_t[1] - self.grid_t[0], self.grid_r[1] - self.grid_r[0]
        off = (np.arange(subsample) + 0.5) / subsample - 0.5
        frac = np.zeros_like(tt)
        for a in off:
            for b in off:
                frac += self.level(tt + a * ht + 1j * (rr + b * hr)) < 0
        self.cell_fraction = frac / subsample**2
        self.mask = self.level(tt + 1j * rr) < 0
        return self

    @property
    def grid_z(self):
        tt, rr = np.meshgrid(self.grid_t, self.grid_r, indexing="ij")
        return tt + 1j * rr

    @classmethod
    def disk(cls, center=0j, radius=1.0, n_nodes=512, grid=None):
        alpha = 2 * np.pi * np.arange(n_nodes) / n_nodes
        reg = cls(complex(center), center + radius * np.exp(1j * alpha),
                  lambda z: np.abs(z - center) - radius)
        if grid:
            reg.add_grid(grid)
        return reg


@dataclass(eq=False)
class SliceSpec(PlanarRegion):
    theta: float = 0.0
    frame: RigidMotion = None

    @property
    def e_r(self):
        """Radial unit vector (normalized frame)."""
        return np.array([0.0, np.cos(self.theta), np.sin(self.theta)])

    def to_world(self, z):
        z = np.asarray(z)
        y = np.multiply.outer(z.real, [1.0, 0.0, 0.0]) + np.multiply.outer(z.imag, self.e_r)
        return self.frame.inverse(y)

    def world_e_r(self):
        return self.frame.inverse_vector(self.e_r)

    def world_e1(self):
        return self.frame.inverse_vector(np.array([1.0, 0.0, 0.0]))


def slice_domain(domain: Domain, frame: RigidMotion, theta, resolution: int = 128,
                 n_nodes: int = 256) -> SliceSpec:
    """Half-plane section Omega_theta in (t, r) coordinates.

    ``theta`` is an angle or a unit 2-vector in the (x2, x3)-plane of the
    normalized frame.
    """
    if np.ndim(theta):
        th = np.asarray(theta, float)
        if abs(np.linalg.norm(th) - 1) > 1e-12:
            raise GeometryError("theta must be a unit vector")
        theta = float(np.arctan2(th[1], th[0]))
    theta = float(theta)
    e_r = np.array([0.0, np.cos(theta), np.sin(theta)])
    e1 = np.array([1.0, 0.0, 0.0])

    def to_world(z):
        y = np.multiply.outer(np.real(z), e1) + np.multiply.outer(np.imag(z), e_r)
        return frame.inverse(y)

    def level2d(z):
        z = np.asarray(z)
        val = domain.level(to_world(z))
        return np.where(np.imag(z) > 0, val, np.abs(val) + 1.0)

    # interior seed: most interior point of a coarse sample of the plane section
    cn = frame.apply(domain.center)
    rmax = domain.max_radius
    ts = cn[0] + np.linspace(-rmax, rmax, 81)
    rc = cn[1:] @ e_r[1:]
    rs = rc + np.linspace(-rmax, rmax, 81)
    tt, rr = np.meshgrid(ts, rs, indexing="ij")
    vals = level2d(tt + 1j * rr)
    if vals.min() >= 0:
        gap = np.degrees(np.arcsin(min(1.0, rmax / max(np.hypot(*cn[1:]), 1e-300))))
        phi_c = np.degrees(np.arctan2(cn[2], cn[1]))
        raise GeometryError(
            f"slice theta={np.degrees(theta):.2f} deg is empty; nonempty slices lie within "
            f"about {gap:.1f} deg of {phi_c:.1f} deg", code="empty_slice")
    # seed: centroid of the sampled inside set (stable for convex-ish sections)
    inside = vals < 0
    seed = complex(tt[inside].mean(), rr[inside].mean())
    if level2d(np.array(seed)) >= 0:
        k = np.argmin(vals)
        seed = complex(tt.ravel()[k], rr.ravel()[k])
    alpha = 2 * np.pi * np.arange(n_nodes) / n_nodes
    dirs2 = np.exp(1j * alpha)
    seed_w = to_world(np.array(seed))
    dirs3 = np.multiply.outer(dirs2.real, e1) + np.multiply.outer(dirs2.imag, e_r)
    dirs3 = frame.inverse_vector(dirs3)
    dist = domain.ray_exit(seed_w, dirs3, 2.5 * rmax)
    boundary = seed + dist * dirs2
    if boundary.imag.min() <= 0:
        raise GeometryError("slice touches the axis r = 0", code="slice_hits_axis")
    spec = SliceSpec(seed, boundary, level2d, theta=theta, frame=frame)
    if resolution:
        spec.add_grid(resolution)
    return spec


def slice_symmetric_volume(domain: Domain, frame: RigidMotion, n_theta=64, n_ang=64, n_rad=24):
    """Coarea check: integral over theta of the r-weighted slice areas."""
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    total = 0.0
    for th in thetas:
        try:
            sl = slice_domain(domain, frame, th, resolution=0, n_nodes=128)
        except GeometryError as exc:
            if exc.code == "empty_slice":
                continue
            raise
        z, w = sl.quadrature(n_ang, n_rad)
        total += float(np.sum(w * z.imag))
    return total * 2 * np.pi / n_theta
