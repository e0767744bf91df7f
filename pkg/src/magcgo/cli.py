"""Command line pipelines: verify, identity, recover-q, recover-dA and sweep-h.

Each run writes report.json (every measured value next to its tolerance),
CSV tables and binary grid dumps into the output directory. Exit codes:
0 all assertions pass, 1 an assertion failed, 2 configuration error,
3 precondition failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


class Report:
    """Checks and results of one run."""

    def __init__(self, subcommand, scn, args):
        self.data = {"subcommand": subcommand, "scenario": scn.name if scn else None,
                     "seed": getattr(args, "seed", None), "threads": getattr(args, "threads", 1),
                     "tolerance_profile": getattr(args, "tolerance_profile", "default"),
                     "checks": [], "results": {}, "error": None}
        self.t0 = time.time()

    def check(self, name, value, tolerance, mode="le"):
        """Record value against tolerance; mode 'le' (value <= tol) or 'ge' (value >= tol)."""
        value = float(value)
        ok = value <= tolerance if mode == "le" else value >= tolerance
        self.data["checks"].append({"name": name, "value": value, "tolerance": float(tolerance),
                                    "comparison": "<=" if mode == "le" else ">=",
                                    "passed": bool(ok)})
        return ok

    def result(self, key, value):
        self.data["results"][key] = _jsonable(value)

    @property
    def passed(self):
        return all(c["passed"] for c in self.data["checks"])

    def write(self, out: Path):
        self.data["passed"] = self.passed and self.data["error"] is None
        self.data["runtime_s"] = round(time.time() - self.t0, 3)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.data, indent=2, sort_keys=False))


def _jsonable(v):
    import numpy as np
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(np.real(v)), "im": float(np.imag(v))}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _write_csv(path, header, rows):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ----------------------------------------------------------------------------
# verify


def invariant_suite(scn, rep: Report, n_points=1000):
    """Eikonal and limiting-Carleman residuals, dbar solver, Plemelj jump, amplitude checks."""
    import numpy as np

    from . import cgo, complexplane as cp
    from .geometry import PlanarRegion, build_direction_cone, ObservationPoint
    from .weights import AngularPhase, CarlemanWeight, admissible, eikonal_residual
    from .weights import lcw_condition_residual, project_constraint

    rng = np.random.default_rng(scn.seed)
    dom = scn.domain
    obs = ObservationPoint(scn.x0, scn.epsilon)
    cone = build_direction_cone(dom, obs)
    omega = cone.omega0 if scn.omega is None else scn.omega / np.linalg.norm(scn.omega)
    wt, ph = CarlemanWeight(scn.x0), AngularPhase(scn.x0, omega)
    lo, hi = dom.bounding_box
    pts = np.empty((0, 3))
    while len(pts) < n_points:
        x = rng.uniform(lo, hi, (4 * n_points, 3))
        x = x[dom.contains(x) & admissible(wt, ph, x)]
        pts = np.vstack([pts, x])
    pts = pts[:n_points]
    e1, e2 = eikonal_residual(wt, ph, pts)
    rep.check("eikonal_max", max(np.max(np.abs(e1)), np.max(np.abs(e2))), scn.tolerance("eikonal"))
    xi = project_constraint(wt, pts, rng.normal(size=pts.shape))
    rep.check("lcw_max", np.max(np.abs(lcw_condition_residual(wt, pts, xi))), scn.tolerance("lcw"))
    reg = PlanarRegion.disk(0j, 1.0, 512, grid=128)
    T = cgo.solve_dbar(np.ones(reg.cell_fraction.shape), reg)
    z = reg.grid_z[reg.mask]
    rep.check("dbar_disk_max_error", np.max(np.abs(T[reg.mask] - np.conj(z))),
              scn.tolerance("dbar_max_error"))
    f = cp.BoundaryFunction.from_function(reg, lambda w: np.exp(w) + 1 / (w - 0.3))
    inner, outer = cp.plemelj_jump(f)
    zb = reg.boundary
    jump = max(np.max(np.abs(inner - np.exp(zb))), np.max(np.abs(outer + 1 / (zb - 0.3))))
    rep.check("plemelj_jump_max_error", jump, scn.tolerance("plemelj"))


def run_verify(scn, args, out: Path):
    rep = Report("verify", scn, args)
    invariant_suite(scn, rep)
    if scn.gauge_psi is not None:
        vanishing_suite(scn, rep, out)
    return rep


def vanishing_suite(scn, rep: Report, out: Path, n_theta=None):
    """Slice moments, plane functionals and q functional of a gauge pair against unmatched ones."""
    import numpy as np

    from . import recovery as rc
    from .forward import Potentials
    from .scenario import load, shipped

    st = scn.setup()
    ref = load(shipped("generic"))
    st_ref = rc.prepare(scn.domain, scn.x0, ref.pot1, ref.pot2, scn.grid_step, omega=scn.omega,
                        epsilon=scn.epsilon, quad=ref.quad)
    lo, hi = rc.theta_window(st)
    n = scn.n_theta if n_theta is None else n_theta
    thetas = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    rows, worst_m, worst_a, worst_i = [], 0.0, 0.0, 0.0
    for th in thetas:
        sl = rc.make_slice(st, th, scn.slice_resolution)
        sl_ref = rc.make_slice(st_ref, th, scn.slice_resolution)
        m = rc.slice_moment(st, sl)
        m_ref = rc.slice_moment(st_ref, sl_ref)
        a, _ = rc.plane_functional_A(st, sl)
        a_ref, _ = rc.plane_functional_A(st_ref, sl_ref)
        rm = abs(m["boundary"]) / max(abs(m_ref["boundary"]), 1e-300)
        ra = abs(a) / max(abs(a_ref), 1e-300)
        worst_m, worst_a = max(worst_m, rm), max(worst_a, ra)
        worst_i = max(worst_i, abs(m["interior"]) / max(abs(m_ref["interior"]), 1e-300))
        rows.append([th, m["boundary"].real, m["boundary"].imag, a.real, a.imag,
                     abs(m_ref["boundary"]), abs(a_ref)])
    _write_csv(out / "vanishing.csv", ["theta", "re_moment", "im_moment", "re_A", "im_A",
                                       "unmatched_moment", "unmatched_A"], rows)
    tol = scn.tolerance("vanishing")
    rep.check("slice_moment_relative_max", worst_m, tol)
    rep.check("plane_functional_A_relative_max", worst_a, tol)
    # q functional: the gauge u -> e^{i psi} u maps the pair to one with A1 = A2, q1 = q2
    reduced = rc.prepare(scn.domain, scn.x0, scn.pot1, Potentials(scn.pot1.A, scn.pot2.q, "reduced"),
                         scn.grid_step, omega=scn.omega, epsilon=scn.epsilon, quad=scn.quad)
    moms = rc.legendre_moments(reduced, 2)
    h = scn.h_schedule[0]
    q_vals, _ = rc.q_moments_boundary(reduced, moms, h)
    qref = load(shipped("q_bump"))
    st_q = rc.prepare(scn.domain, scn.x0, qref.pot1, qref.pot2, scn.grid_step, omega=scn.omega,
                      epsilon=scn.epsilon, quad=scn.quad)
    q_ref, _ = rc.q_moments_boundary(st_q, rc.legendre_moments(st_q, 2), h)
    rq = float(np.max(np.abs(q_vals)) / np.max(np.abs(q_ref)))
    rep.check("q_functional_relative_max", rq, tol)
    # boundary constancy of psi on each slice, through its holomorphic extension
    spread = psi_constancy(st, scn, thetas[:: max(1, len(thetas) // 8)])
    rep.check("psi_extension_spread", spread, scn.tolerance("psi_constancy"))
    rep.result("vanishing", {"slice_moment": worst_m, "slice_moment_interior": worst_i, "plane_functional_A": worst_a,
                             "q_functional": rq, "psi_spread": spread})


def psi_constancy(st, scn, thetas):
    import numpy as np

    from . import complexplane as cp
    from . import expressions as ex
    from . import recovery as rc

    psi = ex.compile_scalar(ex.parse(scn.gauge_psi))
    worst = 0.0
    for th in thetas:
        sl = rc.make_slice(st, th, scn.slice_resolution)
        f = cp.BoundaryFunction(sl, psi(sl.to_world(sl.boundary)))
        zq, _ = sl.quadrature(16, 8)
        ext = cp.holomorphic_extend(f, points=zq, check=False)
        worst = max(worst, float(np.ptp(ext.interior_values.real) + np.ptp(ext.interior_values.imag)))
    return worst


# ----------------------------------------------------------------------------
# identity


def identity_study(scn, rep: Report, out: Path | None = None, hs=None):
    """Identity reports over the h schedule on the default grid, and one refinement of it."""
    from . import recovery as rc

    hs = scn.h_schedule if hs is None else hs
    grids = [scn.grid_step] + ([scn.refined_grid_step] if scn.refined_grid_step else [])
    table = {}
    rows = []
    for g in grids:
        st = scn.setup(g)
        for h in hs:
            r = rc.evaluate_identity(st, h)
            table[(g, h)] = r
            rows.append([g, h, r.lhs.real, r.lhs.imag, r.rhs_zeroth.real, r.rhs_zeroth.imag,
                         r.rhs_first.real, r.rhs_first.imag, r.boundary_normal.real,
                         r.boundary_normal.imag, r.residual, r.relative_residual])
    if out is not None:
        _write_csv(out / "identity.csv", ["grid_step", "h", "re_lhs", "im_lhs", "re_rhs0", "im_rhs0",
                                          "re_rhs1", "im_rhs1", "re_bnd", "im_bnd", "residual",
                                          "relative_residual"], rows)
    h0 = hs[0]
    base = table[(grids[0], h0)]
    rep.check("identity_relative_residual", base.relative_residual, scn.tolerance("identity_relative"))
    if len(grids) > 1:
        fine = table[(grids[1], h0)]
        ratio = base.relative_residual / max(fine.relative_residual, 1e-300)
        rep.check("identity_refinement_ratio", ratio, scn.tolerance("identity_refinement"), "ge")
    rep.result("identity", [dict(table[k].as_dict(), grid_step=k[0]) for k in table])
    return table


def run_identity(scn, args, out: Path):
    rep = Report("identity", scn, args)
    identity_study(scn, rep, out)
    return rep


# ----------------------------------------------------------------------------
# recover-q


def q_pipeline(scn, rep: Report, out: Path | None = None):
    import numpy as np

    from . import radon
    from . import recovery as rc
    from .gridio import write_cube

    if not scn.same_A:
        raise rc.PreconditionError("recover-q needs A1 = A2", code="magnetic_potentials_differ")
    st = scn.setup()
    lo, hi = rc.theta_window(st)
    n = scn.n_theta
    thetas = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    res = rc.plane_integral_q(st, thetas, scn.h_schedule, degree=scn.legendre_degree)
    rep.check("q_plane_integral_mismatch", res["mismatch"], scn.tolerance("q_plane_match"))
    rep.check("q_amplitude_cancellation", res["cancellation_error"], scn.tolerance("cancellation"))
    rep.result("q_plane_integrals", {k: res[k] for k in ("mismatch", "mismatch_projected",
                                                       "mismatch_per_h", "truncation", "moment_errors",
                                                       "moments_boundary", "moments_direct", "h")})
    planes = rc.PlaneIntegralSet(provenance="boundary_data")
    frame_id = f"x0={list(map(float, scn.x0))}"
    for th, v in zip(thetas, res["boundary_data"]):
        planes.add(th, frame_id, 0.0, v)
    # Radon inversion of the directly integrated plane transform
    rd = scn.radon
    fam = radon.hemisphere_family(scn.domain, rd["n_polar"], rd["n_azimuth"], rd["n_offsets"])
    dq = lambda p, m1, m2: (st.pot1.eval_q(p) - st.pot2.eval_q(p)).real
    sino = radon.plane_integrals(scn.domain, fam, dq)[..., 0]
    x, mask = radon.reconstruction_grid(scn.domain, rd["n_recon"])
    rec = radon.fbp(fam, sino, x)
    truth = dq(x, None, None)
    err = radon.relative_l2(rec, truth, mask)
    rep.check("q_rel_l2_error", err, scn.tolerance("q_rel_l2_error"))
    rep.result("q_rel_l2_error", err)
    if out is not None:
        planes.to_csv(out / "plane_integrals_q.csv")
        _write_csv(out / "plane_integrals_q_direct.csv", ["theta", "re_direct", "im_direct"],
                   [[t, v.real, v.imag] for t, v in zip(thetas, res["direct"])])
        write_cube(out / "q_reconstruction.grid", x, rec, rd["n_recon"], mask)
        write_cube(out / "q_truth.grid", x, truth, rd["n_recon"], mask)
    return res, err


def run_recover_q(scn, args, out: Path):
    rep = Report("recover-q", scn, args)
    q_pipeline(scn, rep, out)
    return rep


# ----------------------------------------------------------------------------
# recover-dA


def dA_pipeline(scn, rep: Report, out: Path | None = None):
    """Curl of A1 - A2 from tangential plane functionals; gradient scenarios compare to a reference."""
    import numpy as np

    from . import radon
    from .gridio import write_cube
    from .scenario import load, shipped

    rd = scn.radon
    fam = radon.hemisphere_family(scn.domain, rd["n_polar"], rd["n_azimuth"], rd["n_offsets"])
    x, mask = radon.reconstruction_grid(scn.domain, rd["n_recon"])
    p1, p2 = scn.pot1, scn.pot2

    def field(p):
        return p1.eval_A(p) - p2.eval_A(p)

    def reconstruct(fn):
        M = radon.tangential_functionals(scn.domain, fam, fn)
        return radon.invert_curl(scn.domain, fam, M, x), M

    rec, M = reconstruct(field)
    truth = p1.eval_curl_A(x) - p2.eval_curl_A(x)
    norm = float(np.sqrt(np.sum(rec[mask] ** 2)))
    if scn.gauge_psi is None:
        err = radon.relative_l2(rec, truth, mask)
        rep.check("dA_rel_l2_error", err, scn.tolerance("dA_rel_l2_error"))
        rep.result("dA_rel_l2_error", err)
    else:
        ref = load(shipped("dA_bump"))
        scale = (np.sqrt(np.sum(field(x)[mask] ** 2))
                 / np.sqrt(np.sum((ref.pot1.eval_A(x) - ref.pot2.eval_A(x))[mask] ** 2)))
        rec_ref, _ = reconstruct(lambda p: scale * (ref.pot1.eval_A(p) - ref.pot2.eval_A(p)))
        ratio = norm / float(np.sqrt(np.sum(rec_ref[mask] ** 2)))
        rep.check("dA_gradient_ratio", ratio, scn.tolerance("dA_gradient_ratio"))
        rep.result("dA_gradient_ratio", ratio)
    rep.result("dA_norm", norm)
    if out is not None:
        m1, m2 = fam.basis()
        rows = [[j, s, *fam.normals[j], M[j, k, 0], M[j, k, 1]]
                for j in range(len(fam.normals)) for k, s in enumerate(fam.offsets)]
        _write_csv(out / "plane_functionals_A.csv", ["normal", "offset", "n1", "n2", "n3",
                                                     "M_m1", "M_m2"], rows)
        write_cube(out / "dA_reconstruction.grid", x, rec, rd["n_recon"], mask)
        write_cube(out / "dA_truth.grid", x, truth, rd["n_recon"], mask)
    return rec, norm


def run_recover_dA(scn, args, out: Path):
    rep = Report("recover-dA", scn, args)
    dA_pipeline(scn, rep, out)
    return rep


# ----------------------------------------------------------------------------
# sweep-h


def cgo_rates(scn, rep: Report, hs=None, grid_step=None, out: Path | None = None):
    """Continuum residual slope and remainder spread of both CGO signs over an h sweep."""
    import numpy as np

    from . import cgo
    from .forward import assemble, convergence_slope
    from .geometry import ObservationPoint, build_direction_cone, normalize_frame
    from .weights import AngularPhase, CarlemanWeight

    hs = [0.4, 0.2, 0.1, 0.05] if hs is None else hs
    g = 0.1 if grid_step is None else grid_step
    dom, pot = scn.domain, scn.pot1
    obs = ObservationPoint(scn.x0, scn.epsilon)
    cone = build_direction_cone(dom, obs)
    omega = cone.omega0 if scn.omega is None else scn.omega
    frame = normalize_frame(obs, omega, cone)
    wt, ph = CarlemanWeight(scn.x0), AngularPhase(scn.x0, omega)
    op = assemble(dom, pot.with_cutoff(dom), g)
    rows, out_rates = [], {}
    for sign in (+1, -1):
        amp = cgo.build_amplitude(pot, dom, frame, sign, **scn.quad)
        samples = cgo.sample_amplitude(amp, op.grid, dom.boundary)
        res, rem = [], []
        for h in hs:
            sol = cgo.build_cgo(dom, pot, wt, ph, h, sign, op, amplitude=amp, samples=samples)
            res.append(sol.diagnostics["residual_l2"])
            rem.append(sol.diagnostics["remainder_h1scl"])
            rows.append([sign, h, res[-1], rem[-1], sol.diagnostics["discrete_check"]])
        slope = convergence_slope(hs, res)
        spread = max(rem) / min(rem)
        tag = "plus" if sign > 0 else "minus"
        rep.check(f"residual_slope_{tag}", slope, scn.tolerance("residual_slope"), "ge")
        rep.check(f"remainder_ratio_{tag}", spread, scn.tolerance("remainder_ratio"))
        out_rates[tag] = {"h": hs, "residual_l2": res, "remainder_h1scl": rem, "slope": slope,
                          "remainder_ratio": spread}
    if out is not None:
        _write_csv(out / "cgo_rates.csv", ["sign", "h", "residual_l2", "remainder_h1scl",
                                           "discrete_check"], rows)
    rep.result("cgo_rates", out_rates)
    return out_rates


def carleman_study(scn, rep: Report, out: Path | None = None):
    import numpy as np

    from .forward import convergence_slope
    from .weights import CarlemanWeight, carleman_constant

    hs = scn.carleman["h_sweep"]
    wt = CarlemanWeight(scn.x0)
    consts = [carleman_constant(scn.domain, scn.pot1, wt, h, samples=scn.carleman["samples"],
                                seed=scn.seed) for h in hs]
    slope = convergence_slope(hs, consts)
    rep.check("carleman_slope", slope, scn.tolerance("carleman_slope"), "ge")
    rep.result("carleman", {"h": hs, "constant": consts, "slope": slope})
    if out is not None:
        _write_csv(out / "carleman.csv", ["h", "constant"], [[h, c] for h, c in zip(hs, consts)])
    return consts, slope


def run_sweep_h(scn, args, out: Path):
    """Rate fits: CGO residual/remainder over the h sweep, the scaled first-order limit and the
    empirical Carleman constant."""
    import numpy as np

    from . import recovery as rc

    rep = Report("sweep-h", scn, args)
    hs = args.h_sweep or [0.4, 0.2, 0.1, 0.05]
    cgo_rates(scn, rep, hs, out=out)
    carleman_study(scn, rep, out)
    if len(scn.h_schedule) >= 3 and not scn.same_A:
        st = scn.setup()
        lim = rc.scaled_limit_A(st, scn.h_schedule)
        rel = abs(lim["limit"] - lim["target"]) / max(abs(lim["target"]), 1e-300)
        rep.result("scaled_limit_A", {"limit": lim["limit"], "target": lim["target"],
                                      "spread": lim["spread"], "relative_difference": rel,
                                      "lhs_decay_exponent": lim["lhs_decay_exponent"]})
    return rep


# ----------------------------------------------------------------------------
# entry point


COMMANDS = {"verify": run_verify, "identity": run_identity, "recover-q": run_recover_q,
            "recover-dA": run_recover_dA, "sweep-h": run_sweep_h}


def _floats(text):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from err


def build_parser():
    p = argparse.ArgumentParser(prog="magcgo", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--scenario", required=True, help="scenario JSON path or shipped name")
    p.add_argument("--out", default="magcgo-out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--h-sweep", type=_floats, default=None, help="comma-separated h values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tolerance-profile", choices=("strict", "default"), default="default")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _set_threads(max(1, args.threads))
    from .geometry import GeometryError
    from .recovery import PreconditionError
    from .scenario import ScenarioError, load, shipped

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(args.scenario)
    scn = None
    try:
        if not path.exists() and not path.suffix:
            path = shipped(args.scenario)
        scn = load(path, profile=args.tolerance_profile, seed=args.seed,
                   h_schedule=args.h_sweep if args.subcommand != "sweep-h" else None)
        rep = COMMANDS[args.subcommand](scn, args, out)
    except ScenarioError as err:
        rep = Report(args.subcommand, scn, args)
        rep.data["error"] = {"code": err.code, "message": str(err), "kind": "config"}
        rep.write(out)
        print(f"config error [{err.code}]: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, PreconditionError) as err:
        rep = Report(args.subcommand, scn, args)
        rep.data["error"] = {"code": err.code, "message": str(err), "kind": "precondition"}
        rep.write(out)
        print(f"precondition failed [{err.code}]: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    rep.write(out)
    for c in rep.data["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.4g} "
              f"{c['comparison']} {c['tolerance']:.4g}")
    return EXIT_OK if rep.passed else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
