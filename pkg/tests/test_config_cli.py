import json

import numpy as np
import pytest

from vvlab.cli import main
from vvlab.config import ConfigError, parse_config
from vvlab.core import read_csv
from vvlab.harness import emit_report, execute, execute_geometry, execute_riemann, load_manifest

SMOOTH = {
    "name": "smooth",
    "system": {"tag": "scalar"},
    "grid": {"n_cells": 64},
    "initial": {"type": "expression", "expr": "0.5 + 0.25 * sin(2 * pi * x)"},
    "bc": {"kind": "periodic"},
    "epsilon": 0.01,
    "t_final": 0.1,
    "monitors": [{"name": "max_principle"}, {"name": "tv_monotonicity"}],
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_defaults_fill_in():
    cfg = parse_config(json.dumps(SMOOTH))
    assert cfg.cfl_h == 0.4 and cfg.cfl_p == 0.4
    assert cfg.deterministic is True
    assert cfg.epsilons == [0.01]
    assert cfg.monitors[0].pair == "square"


@pytest.mark.parametrize("patch, fragment", [
    ({"epsilon": None, "sweep": [0.01, 0.02]}, "strictly decreasing"),
    ({"epsilon": None}, "exactly one"),
    ({"system": {"tag": "spherical", "gamma": 1.4}, "bc": {"kind": "spherical"}}, "system.dim"),
    ({"unknown_key": 1}, "unknown_key"),
    ({"monitors": [{"name": "energy"}]}, "energy"),
    ({"t_final": -1.0}, "t_final"),
])
def test_schema_errors_name_the_field(patch, fragment):
    cfg = {**SMOOTH, **patch}
    cfg = {k: v for k, v in cfg.items() if v is not None}
    with pytest.raises(ConfigError, match=fragment):
        parse_config(json.dumps(cfg))


def test_malformed_json_is_a_config_error():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("{not json")


def test_cli_bad_config_exits_1(tmp_path, out_dir, capsys):
    path = _write(tmp_path, {**SMOOTH, "sweep": [0.1, 0.2], "epsilon": None})
    assert main(["run", str(path), "--out", str(out_dir)]) == 1
    assert "strictly decreasing" in capsys.readouterr().err


def test_zero_horizon_passes(tmp_path, out_dir, capsys):
    path = _write(tmp_path, {**SMOOTH, "t_final": 0.0})
    assert main(["run", str(path), "--out", str(out_dir)]) == 0
    report = capsys.readouterr().out
    assert "max_principle" in report and "PASS" in report and "FAIL" not in report


def test_impossible_bound_exits_2_with_fail_row(tmp_path, out_dir, capsys):
    cfg = {**SMOOTH, "monitors": [{"name": "max_principle", "bound": [0.3, 0.5]}]}
    assert main(["run", str(_write(tmp_path, cfg)), "--out", str(out_dir)]) == 2
    row = next(line for line in capsys.readouterr().out.splitlines() if line.startswith("max_principle"))
    assert "FAIL" in row


def test_burgers_sweep_writes_gap_and_diracness(out_dir):
    eps = [1 / (2 * np.pi * k) for k in (4, 8, 16, 32)]
    cfg = {
        "name": "bsweep", "system": {"tag": "scalar"}, "grid": {"n_cells": 128},
        "initial": {"type": "expression", "expr": "0.5 + 0.25 * sin(x / eps)"},
        "bc": {"kind": "periodic"}, "sweep": eps, "t_final": 0.25, "snapshots": {"count": 32},
        "monitors": [{"name": "max_principle"}, {"name": "dissipation"}],
        "reference": {}, "cclab": {"macrocell": [8, 8]},
    }
    manifest = execute(cfg, out_dir, kind="sweep")
    names = {f["path"] for f in manifest.data["files"]}
    for required in ("gap.csv", "diracness.csv", "sweep.csv", "plots/gap.svg", "plots/diracness.svg",
                     "eps_0/snapshots.csv", "eps_3/monitors/max_principle.csv"):
        assert required in names
    header, table = read_csv(manifest.root / "gap.csv")
    assert header == ["epsilon", "l1_gap"] and table.shape == (4, 2)
    report = emit_report(manifest)
    assert "sweep trends" in report and "trend" in report
    assert any(line.startswith("diracness") for line in report.splitlines())


def test_reports_are_in_fixed_order(out_dir):
    cfg = {**SMOOTH, "monitors": [{"name": "tv_monotonicity"}, {"name": "dissipation"},
                                  {"name": "max_principle"}]}
    report = emit_report(execute(cfg, out_dir))
    rows = [line.split()[0] for line in report.splitlines()[2:]]
    assert rows == ["max_principle", "tv_monotonicity", "dissipation"]


def test_rerun_is_byte_identical(tmp_path):
    a = execute(SMOOTH, tmp_path / "a")
    b = execute(SMOOTH, tmp_path / "b")
    assert [f["sha256"] for f in a.data["files"]] == [f["sha256"] for f in b.data["files"]]
    assert a.path.read_bytes() == b.path.read_bytes()


def test_load_manifest_detects_tampering(out_dir):
    manifest = execute(SMOOTH, out_dir)
    assert load_manifest(manifest.root)["name"] == "smooth"
    target = manifest.files()[0]
    target.write_text(target.read_text() + "0\n")
    with pytest.raises(ValueError):
        load_manifest(manifest.path)
    target.unlink()
    with pytest.raises(FileNotFoundError):
        load_manifest(manifest.path)


def test_output_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("VVLAB_OUT", str(tmp_path / "env"))
    assert execute({**SMOOTH, "t_final": 0.0}).root == tmp_path / "env" / "smooth"
    configured = {**SMOOTH, "t_final": 0.0, "output": str(tmp_path / "cfg")}
    assert execute(configured).root == tmp_path / "cfg" / "smooth"
    assert execute(configured, tmp_path / "flag").root == tmp_path / "flag" / "smooth"


def test_riemann_and_geometry_subcommands(out_dir):
    rie = execute_riemann({"name": "sod", "system": {"tag": "euler_artificial", "gamma": 1.4},
                           "left": [1.0, 0.0], "right": [0.125, 0.0], "t": 0.2}, out_dir)
    assert rie.exit_code == 0 and rie.files()
    geo = execute_geometry({"name": "plane", "case": "plane", "n": 16}, out_dir)
    assert geo.exit_code == 0
    assert all(v["passed"] for v in geo.verdicts)


def test_divcurl_subcommand(tmp_path, out_dir, capsys):
    path = _write(tmp_path, {"name": "dc", "pair": "violating", "epsilons": [0.25, 0.125], "n": 64,
                             "averaging_scale": 8})
    assert main(["divcurl", str(path), "--out", str(out_dir), "--quiet"]) in (0, 2)
    assert capsys.readouterr().out == ""
    assert (out_dir / "dc" / "manifest.json").exists()
