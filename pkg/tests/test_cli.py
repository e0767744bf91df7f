import json
import subprocess
import sys

import pytest

from magcgo import cli
from magcgo.scenario import shipped


def _scenario(tmp_path, **changes):
    d = json.loads(shipped("generic").read_text())
    d.update(changes)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    return p


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_verify_passes(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["verify", "--scenario", "generic", "--out", str(out)]) == cli.EXIT_OK
    rep = _report(out)
    assert rep["passed"] and rep["subcommand"] == "verify"
    names = {c["name"] for c in rep["checks"]}
    assert {"eikonal_max", "lcw_max", "dbar_disk_max_error", "plemelj_jump_max_error"} <= names
    for c in rep["checks"]:
        assert {"value", "tolerance", "comparison", "passed"} <= set(c)


def test_config_error_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    out = tmp_path / "o"
    assert cli.main(["identity", "--scenario", str(p), "--out", str(out)]) == cli.EXIT_CONFIG
    assert _report(out)["error"]["kind"] == "config"


def test_unknown_shipped_name(tmp_path):
    assert cli.main(["verify", "--scenario", "nope", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_x0_in_hull_exit_code(tmp_path):
    p = _scenario(tmp_path, x0=[0.3, 0.0, 0.0])
    out = tmp_path / "o"
    assert cli.main(["identity", "--scenario", str(p), "--out", str(out)]) == cli.EXIT_PRECONDITION
    assert _report(out)["error"]["code"] == "x0_in_convex_hull"


def test_recover_q_rejects_distinct_A(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["recover-q", "--scenario", "generic", "--out", str(out)]) == cli.EXIT_PRECONDITION
    assert _report(out)["error"]["code"] == "magnetic_potentials_differ"


def test_assertion_failure_exit_code(tmp_path):
    p = _scenario(tmp_path, tolerances={"eikonal": -1.0})
    assert cli.main(["verify", "--scenario", str(p), "--out", str(tmp_path / "o")]) == cli.EXIT_ASSERT


def test_h_sweep_parsing():
    args = cli.build_parser().parse_args(["sweep-h", "--scenario", "x", "--h-sweep", "0.4,0.2"])
    assert args.h_sweep == [0.4, 0.2]
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["sweep-h", "--scenario", "x", "--h-sweep", "a,b"])


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["launch", "--scenario", "generic"])


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "magcgo.cli", "verify", "--scenario", "generic",
                        "--threads", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "PASS eikonal_max" in r.stdout
    assert _report(tmp_path)["threads"] == 1


def test_identity_subcommand_writes_table(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["identity", "--scenario", "generic", "--h-sweep", "0.4", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = (out / "identity.csv").read_text().splitlines()
    assert rows[0].startswith("grid_step,h") and len(rows) == 3


def test_sweep_h_subcommand(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["sweep-h", "--scenario", "carleman", "--h-sweep", "0.4,0.2,0.1", "--out", str(out)])
    rep = _report(out)
    names = {c["name"] for c in rep["checks"]}
    assert {"residual_slope_plus", "remainder_ratio_minus", "carleman_slope"} <= names
    assert code == (cli.EXIT_OK if rep["passed"] else cli.EXIT_ASSERT)
    assert (out / "cgo_rates.csv").exists() and (out / "carleman.csv").exists()
