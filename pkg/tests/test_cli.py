"""End-to-end command-line behaviour: exit codes, output bundles, overrides."""

import os

import pytest
import yaml

from trapswitch.cli import main

GOOD_SPEC = """\
experiment:
  name: poles
  region: [0.0, 0.9, -0.4, 0.0]
physics:
  t_switch: 0.0
"""


def _write(tmp_path, text, name="spec.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate_accepts_good_spec(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, GOOD_SPEC)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_lists_schema_problems(tmp_path, capsys):
    spec = _write(tmp_path, "experiment:\n  name: poles\nphysics:\n  t_switch: -0.02\n")
    assert main(["validate", spec]) == 1
    out = capsys.readouterr().out
    assert "physics.t_switch: must be >= 0, got -0.02" in out


def test_validate_flags_unresolvable_grid(tmp_path, capsys):
    spec = _write(
        tmp_path,
        "experiment:\n  name: decay-curves\nnumerics:\n  dx: 0.5\n",
    )
    assert main(["validate", spec]) == 1
    assert "dx=0.5" in capsys.readouterr().out


def test_validate_applies_overrides_before_checking(tmp_path, capsys):
    spec = _write(tmp_path, "experiment:\n  name: poles\n")
    assert main(["validate", spec, "--set", "physics.d=-1"]) == 1
    assert "physics.d: must be > 0" in capsys.readouterr().out


def test_unparseable_yaml_exits_2(tmp_path, capsys):
    spec = _write(tmp_path, "experiment:\n  name: [poles\n")
    assert main(["validate", spec]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: spec parse error")
    assert "line" in err


def test_run_rejects_unknown_experiment(tmp_path, capsys):
    spec = _write(tmp_path, "experiment:\n  name: warp-drive\n")
    assert main(["run", spec]) == 2
    err = capsys.readouterr().err
    assert "not one of" in err


def test_missing_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit):
        main([])


def test_groundstate_subcommand_emits_bundle(tmp_path, capsys):
    out = str(tmp_path / "gs")
    assert main(["groundstate", "--out", out]) == 0
    stdout = capsys.readouterr().out
    assert "check[" in stdout and "PASS" in stdout
    assert f"report: {out}/report.txt" in stdout
    names = set(os.listdir(out))
    assert {"report.txt", "spec.yaml", "summary.csv"} <= names
    assert any(name.endswith(".gp") for name in names)


def test_groundstate_rerun_is_byte_identical(tmp_path):
    out = str(tmp_path / "gs")
    assert main(["groundstate", "--out", out]) == 0
    first = {
        name: open(os.path.join(out, name), "rb").read() for name in os.listdir(out)
    }
    assert main(["groundstate", "--out", out]) == 0
    second = {
        name: open(os.path.join(out, name), "rb").read() for name in os.listdir(out)
    }
    assert first == second


def test_set_override_lands_in_emitted_spec(tmp_path, capsys):
    out = str(tmp_path / "gs")
    code = main(["groundstate", "--out", out, "--set", "experiment.x_max=90"])
    assert code == 0
    with open(os.path.join(out, "spec.yaml")) as fh:
        document = yaml.safe_load(fh)
    assert document["experiment"]["x_max"] == 90


def test_run_spec_file_matches_direct_subcommand(tmp_path, capsys):
    spec = _write(
        tmp_path,
        "experiment:\n  name: ground-state\noutputs:\n  directory: %s\n" % (tmp_path / "a"),
    )
    assert main(["run", spec]) == 0
    assert main(["groundstate", "--out", str(tmp_path / "b")]) == 0
    a = open(tmp_path / "a" / "summary.csv").read()
    b = open(tmp_path / "b" / "summary.csv").read()
    assert a == b
