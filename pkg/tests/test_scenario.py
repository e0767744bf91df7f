import json

import numpy as np
import pytest
import sympy as sp

from magcgo import expressions as ex
from magcgo.geometry import GeometryError
from magcgo.scenario import ScenarioError, from_dict, load, shipped

NAMES = ["generic", "generic_far", "bumped", "gauge_pair", "q_bump", "dA_bump", "gradient",
         "carleman"]


@pytest.mark.parametrize("name", NAMES)
def test_shipped_scenarios_load(name):
    scn = load(shipped(name))
    assert scn.name == name
    assert scn.h_schedule == sorted(scn.h_schedule, reverse=True)


def _base():
    return json.loads(shipped("generic").read_text())


def test_gauge_psi_builds_gradient_pair():
    scn = load(shipped("gauge_pair"))
    grad = ex.gradient(ex.parse(scn.gauge_psi))
    for a1, a2, g in zip(scn.pot1.A, scn.pot2.A, grad):
        assert sp.simplify(a2 - a1 - g) == 0
    assert not scn.same_A


@pytest.mark.parametrize("mutate,match", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.pop("x0"), "missing"),
    (lambda d: d.update(colour="red"), "unknown"),
    (lambda d: d.update(x0=[1, 2]), "three"),
    (lambda d: d.update(h_schedule=[0.2, -0.1]), "positive"),
    (lambda d: d["potentials"].update(q1="1 + import(os)"), "potentials"),
    (lambda d: d.update(domain={"profile": "ball"}), "domain"),
])
def test_config_errors(mutate, match):
    d = _base()
    mutate(d)
    with pytest.raises(ScenarioError, match=match):
        from_dict(d)


def test_x0_inside_hull_is_precondition_error():
    d = _base()
    d["x0"] = [0.2, 0.0, 0.0]
    with pytest.raises(GeometryError) as err:
        from_dict(d)
    assert err.value.code == "x0_in_convex_hull"


def test_gauge_must_vanish_on_boundary():
    d = json.loads(shipped("gauge_pair").read_text())
    d["potentials"]["gauge_psi"] = "x1"
    with pytest.raises(ScenarioError) as err:
        from_dict(d)
    assert err.value.code == "gauge_not_zero"


def test_bad_profile_and_json(tmp_path):
    with pytest.raises(ScenarioError):
        from_dict(_base(), profile="lenient")
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        load(p)
    with pytest.raises(ScenarioError):
        shipped("nope")


def test_strict_profile_tightens():
    a = from_dict(_base())
    b = from_dict(_base(), profile="strict")
    assert b.tolerance("identity_relative") < a.tolerance("identity_relative")
    c = from_dict(_base(), seed=7, h_schedule=[0.1, 0.3])
    assert c.seed == 7 and c.h_schedule == [0.3, 0.1]
