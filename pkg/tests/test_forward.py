import numpy as np
import pytest
import sympy as sp

from magcgo import expressions as ex
from magcgo.forward import (Potentials, apply_continuum, assemble, build_grid, convergence_slope,
                            dn_map, gauge_transform, manufactured_error, solve_grid)
from magcgo.geometry import GeometryError


def test_apply_continuum_free_case():
    pot = Potentials.zero()
    u = ex.parse("x1**2 + x2*x3")
    assert sp.simplify(apply_continuum(pot, u) + 2) == 0


def test_apply_continuum_gauge_covariance(pot):
    # L_{A + grad psi} (e^{-i psi} u) = e^{-i psi} L_A u
    psi = ex.parse("0.3*x1*x2")
    u = ex.parse("exp(x3)*x1")
    lhs = apply_continuum(gauge_transform(pot, psi), sp.exp(-sp.I * psi) * u)
    rhs = sp.exp(-sp.I * psi) * apply_continuum(pot, u)
    f = ex.compile_scalar(sp.expand(lhs - rhs))
    x = np.random.default_rng(1).uniform(-1, 1, (20, 3))
    assert np.max(np.abs(f(x))) < 1e-12


def test_gauge_must_vanish(ball, pot):
    with pytest.raises(GeometryError):
        gauge_transform(pot, "x1", ball)


def test_grid_volume(ball):
    g = build_grid(ball, 0.125)
    assert np.sum(g.volume_weights) == pytest.approx(4 * np.pi / 3, rel=0.02)


def test_exact_for_quadratic(ball):
    # Shortley-Weller is exact for quadratics when A = 0, q = 0
    pot = Potentials.zero()
    ue = ex.compile_scalar(ex.parse("x1**2 - 2*x2*x3 + x3"))
    op = assemble(ball, pot, 0.25)
    v = solve_grid(op, np.full(op.grid.n, 0.0) - 2.0, ue(op.grid.points))
    assert np.max(np.abs(v - ue(op.grid.nodes))) < 1e-10


def test_manufactured_second_order(ball, pot):
    u = "exp(x1)*sin(x2 + 0.5*x3)"
    steps = [0.25, 0.125]
    errs = [manufactured_error(ball, pot, u, s) for s in steps]
    assert convergence_slope(steps, errs) > 1.6


def test_dn_map_basic_properties(ball):
    from magcgo.geometry import build_domain
    dom = build_domain("ball", 1.0, resolution=162)
    zero = dn_map(dom, Potentials.zero(), 0.2)
    # the constant is mapped to (nearly) zero flux; the map is nearly symmetric in the dsigma pairing
    const = zero.apply(np.ones(len(dom.boundary)))
    assert np.max(np.abs(const)) < 0.1
    assert zero.hermitian_defect() < 0.1
