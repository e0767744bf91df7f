"""Scenario files: one JSON document per experiment, validated at load.

Schema (version 1); keys other than ``schema_version``, ``domain``, ``x0``
and ``potentials`` are optional:

    {
      "schema_version": 1,
      "name": "generic",
      "description": "...",
      "domain": {"profile": "ball", "params": [1.0], "center": [0, 0, 0]},
      "x0": [3.0, 0.0, 0.0],
      "omega": null,                      # null: centre of the admissible cone
      "epsilon": 0.05,
      "potentials": {"A1": ["...", "...", "..."], "q1": "...",
                     "A2": [...], "q2": "...",
                     "gauge_psi": null},  # if set: A2 = A1 + grad psi, q2 = q1
      "grid_step": 0.125,
      "refined_grid_step": 0.0833333,
      "slice_resolution": 128,
      "n_theta": 32,
      "legendre_degree": 4,               # theta moments used for q plane integrals
      "h_schedule": [0.4, 0.3, 0.2],
      "quad": {"n_alpha": 32, "n_rho": 32},
      "frames": {"n_offsets": 5, "n_omega": 5, "x0_radius": 0.05, "omega_radius": 0.05},
      "radon": {"n_polar": 32, "n_azimuth": 32, "n_offsets": 64, "n_recon": 64},
      "carleman": {"samples": 50, "h_sweep": [0.4, 0.2, 0.1, 0.05]},
      "seed": 0,
      "tolerances": {"identity_relative": 0.05, ...}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy as sp

from . import expressions as ex
from .forward import Potentials, gauge_transform
from .geometry import Domain, GeometryError, ObservationPoint, build_direction_cone, build_domain
from .geometry import normalize_frame, validate_observation

SCHEMA_VERSION = 1

TOLERANCES = {
    "default": {
        "eikonal": 1e-12,
        "lcw": 1e-12,
        "forward_slope": 1.8,
        "gauge_factor": 10.0,
        "dbar_max_error": 0.01,
        "plemelj": 1e-5,
        "residual_slope": 1.8,
        "remainder_ratio": 3.0,
        "identity_relative": 0.05,
        "identity_refinement": 1.5,
        "vanishing": 1e-4,
        "q_plane_match": 0.05,
        "q_rel_l2_error": 0.10,
        "dA_rel_l2_error": 0.15,
        "dA_gradient_ratio": 1e-3,
        "carleman_slope": -0.1,
        "cancellation": 1e-8,
        "psi_constancy": 1e-5,
    },
}
TOLERANCES["strict"] = dict(TOLERANCES["default"], identity_relative=0.02, q_plane_match=0.02,
                            q_rel_l2_error=0.05, dA_rel_l2_error=0.10, vanishing=1e-5)

DEFAULTS = {
    "omega": None,
    "epsilon": 0.05,
    "grid_step": 0.125,
    "refined_grid_step": None,
    "slice_resolution": 128,
    "n_theta": 32,
    "legendre_degree": 4,
    "h_schedule": [0.4, 0.3, 0.2],
    "quad": {"n_alpha": 32, "n_rho": 32},
    "frames": {"n_offsets": 5, "n_omega": 5, "x0_radius": 0.05, "omega_radius": 0.05},
    "radon": {"n_polar": 32, "n_azimuth": 32, "n_offsets": 64, "n_recon": 64},
    "carleman": {"samples": 50, "h_sweep": [0.4, 0.2, 0.1, 0.05]},
    "seed": 0,
    "tolerances": {},
    "description": "",
}


class ScenarioError(ValueError):
    def __init__(self, message, code="config_error"):
        super().__init__(message)
        self.code = code


@dataclass(eq=False)
class Scenario:
    name: str
    raw: dict
    domain: Domain
    x0: np.ndarray
    omega: np.ndarray | None
    epsilon: float
    pot1: Potentials
    pot2: Potentials
    gauge_psi: str | None
    grid_step: float
    refined_grid_step: float | None
    slice_resolution: int
    n_theta: int
    legendre_degree: int
    h_schedule: list
    quad: dict
    frames: dict
    radon: dict
    carleman: dict
    seed: int
    tolerances: dict = field(default_factory=dict)

    def tolerance(self, key):
        return self.tolerances[key]

    def setup(self, grid_step=None, x0=None, omega=None):
        """CGO/identity setup of this scenario (optionally at another grid step or frame)."""
        from .recovery import prepare
        return prepare(self.domain, self.x0 if x0 is None else x0, self.pot1, self.pot2,
                       self.grid_step if grid_step is None else grid_step,
                       omega=self.omega if omega is None else omega, epsilon=self.epsilon,
                       quad=self.quad)

    @property
    def same_A(self):
        return all(sp.simplify(a - b) == 0 for a, b in zip(self.pot1.A, self.pot2.A))


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        out[k] = dict(base[k], **v) if isinstance(base.get(k), dict) and isinstance(v, dict) else v
    return out


def from_dict(data: dict, profile="default", seed=None, h_schedule=None) -> Scenario:
    """Validate and build; raises ScenarioError (config) or GeometryError (precondition)."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}")
    for key in ("domain", "x0", "potentials"):
        if key not in data:
            raise ScenarioError(f"missing key {key!r}")
    unknown = set(data) - set(DEFAULTS) - {"schema_version", "domain", "x0", "potentials", "name"}
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}")
    cfg = _merge(DEFAULTS, data)
    if profile not in TOLERANCES:
        raise ScenarioError(f"unknown tolerance profile {profile!r}")
    tol = dict(TOLERANCES[profile], **cfg["tolerances"])
    try:
        d = cfg["domain"]
        domain = build_domain(d["profile"], *d.get("params", []), center=d.get("center", (0, 0, 0)),
                              resolution=d.get("resolution", 2562))
    except (KeyError, TypeError, ValueError) as err:
        raise ScenarioError(f"bad domain block: {err}") from err
    except GeometryError as err:
        raise ScenarioError(f"bad domain: {err}", code=err.code) from err
    pots = cfg["potentials"]
    try:
        A1 = pots.get("A1", ["0", "0", "0"])
        pot1 = Potentials.from_strings(A1, pots.get("q1", "0"), "pair1")
        psi = pots.get("gauge_psi")
        if psi is not None:
            pot2 = gauge_transform(pot1, psi, domain)
            pot2 = Potentials(pot2.A, pot1.q, "pair2")
        else:
            pot2 = Potentials.from_strings(pots.get("A2", ["0", "0", "0"]), pots.get("q2", "0"),
                                           "pair2")
        pot1.check_finite(domain)
        pot2.check_finite(domain)
    except ex.ExpressionError as err:
        raise ScenarioError(f"bad potentials: {err}") from err
    except GeometryError as err:
        raise ScenarioError(f"bad gauge: {err}", code=err.code) from err
    x0 = np.asarray(cfg["x0"], float)
    if x0.shape != (3,):
        raise ScenarioError("x0 must have three coordinates")
    hs = list(h_schedule) if h_schedule is not None else list(cfg["h_schedule"])
    if not hs or min(hs) <= 0:
        raise ScenarioError("h schedule must be positive")
    obs = ObservationPoint(x0, float(cfg["epsilon"]))
    validate_observation(domain, obs)                  # GeometryError x0_in_convex_hull
    omega = None if cfg["omega"] is None else np.asarray(cfg["omega"], float)
    cone = build_direction_cone(domain, obs)
    normalize_frame(obs, cone.omega0 if omega is None else omega, cone)
    return Scenario(
        name=str(data.get("name", "scenario")), raw=data, domain=domain, x0=x0, omega=omega,
        epsilon=float(cfg["epsilon"]), pot1=pot1, pot2=pot2, gauge_psi=psi,
        grid_step=float(cfg["grid_step"]),
        refined_grid_step=None if cfg["refined_grid_step"] is None else float(cfg["refined_grid_step"]),
        slice_resolution=int(cfg["slice_resolution"]), n_theta=int(cfg["n_theta"]),
        legendre_degree=int(cfg["legendre_degree"]),
        h_schedule=sorted((float(h) for h in hs), reverse=True), quad=dict(cfg["quad"]),
        frames=dict(cfg["frames"]), radon=dict(cfg["radon"]), carleman=dict(cfg["carleman"]),
        seed=int(cfg["seed"] if seed is None else seed), tolerances=tol)


def load(path, **kw) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as err:
        raise ScenarioError(f"cannot read scenario: {err}") from err
    except json.JSONDecodeError as err:
        raise ScenarioError(f"scenario is not valid JSON: {err}") from err
    return from_dict(data, **kw)


def shipped(name: str) -> Path:
    path = Path(__file__).with_name("scenarios") / f"{name}.json"
    if not path.exists():
        raise ScenarioError(f"no shipped scenario {name!r}")
    return path
