import json
import subprocess
import sys

import pytest
import yaml

from interbsde import config as cfgmod
from interbsde.cli import main

SMALL = {
    "schema_version": 1,
    "seed": 7,
    "measure": {"family": "uniform", "n": 4},
    "driver": {"family": "attraction", "params": {"kappa": 0.5}},
    "terminal": {"family": "identity"},
    "grid": {"horizon": 1.0, "n_steps": 8},
    "paths": 128,
    "verify": {"lipschitz_trials": 50},
    "study": {"n_list": [4, 8], "reference_n": 16, "probes": [0.5]},
}


def _write(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def _with(**changes):
    doc = json.loads(json.dumps(SMALL))
    for key, value in changes.items():
        doc[key] = value
    return doc


def test_zero_driver_solve(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, _with(driver={"family": "zero"}, terminal={"family": "affine-terminal"}))
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    picard = json.loads((out / "picard.json").read_text())
    assert picard["converged"] and picard["effective_iterations"] == 1
    assert {p.name for p in out.iterdir()} == {"solution.csv", "picard.json", "flow.csv"}


def test_headers_carry_hash_and_seed(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, SMALL)
    assert main(["solve", "--config", cfg, "--out", str(out), "--seed", "99"]) == 0
    sha = cfgmod.load(cfg, 99).sha256
    for name in ("solution.csv", "flow.csv"):
        head = (out / name).read_text().splitlines()[:2]
        assert head == [f"# config_sha256={sha}", "# seed=99"]
    picard = json.loads((out / "picard.json").read_text())
    assert picard["config_sha256"] == sha and picard["seed"] == 99


def test_seed_override_changes_hash(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert cfgmod.load(cfg).sha256 != cfgmod.load(cfg, 8).sha256


@pytest.mark.parametrize("doc, field", [
    (_with(measure={"family": "cauchy", "n": 4}), "measure.family"),
    (_with(driver={"family": "attraction", "params": {"kappa": "big"}}), "driver.params"),
    (_with(paths=0), "paths"),
    (_with(grid={"horizon": -1.0, "n_steps": 8}), "grid.horizon"),
    (_with(schema_version=2), "schema_version"),
    (_with(solvr={}), "solvr"),
])
def test_invalid_config_names_field(tmp_path, doc, field):
    with pytest.raises(cfgmod.ConfigError) as err:
        cfgmod.load(_write(tmp_path, doc))
    assert err.value.field.startswith(field)


def test_malformed_config_writes_nothing(tmp_path):
    out = tmp_path / "out"
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("measure: {family: uniform, n: [\n")
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) != 0
    assert not out.exists()
    cfg = _write(tmp_path, _with(paths=-5))
    assert main(["study", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()


def test_verify_flags_misdeclared_lipschitz(tmp_path):
    out = tmp_path / "out"
    doc = _with(driver={"family": "linear", "params": {"alpha": 1.0, "beta": 2.0}, "lipschitz": 0.02},
                grid={"horizon": 0.25, "n_steps": 8})
    assert main(["verify", "--config", _write(tmp_path, doc), "--out", str(out)]) == 1
    report = json.loads((out / "verify.json").read_text())
    assert not report["checks"]["driver_lipschitz"]["passed"]
    assert report["checks"]["driver_lipschitz"]["violations"] > 0


def test_verify_passes_on_consistent_config(tmp_path):
    out = tmp_path / "out"
    doc = _with(driver={"family": "bounded-smooth", "params": {"scale": 0.5}},
                terminal={"family": "affine-terminal"}, paths=512, grid={"horizon": 1.0, "n_steps": 16},
                verify={"lipschitz_trials": 50, "u1": [0.3], "u2": [0.5]})
    assert main(["verify", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"]
    assert set(report["checks"]) == {"driver_lipschitz", "uniqueness", "stability_identity",
                                     "stability_probe", "stability_scaling"}


def test_study_single_n_equal_to_ref(tmp_path):
    out = tmp_path / "out"
    doc = _with(study={"n_list": [16], "reference_n": 16, "probes": [0.5]})
    assert main(["study", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[2] == "N,terminal_gamma2_sq,max_flow_gamma2_sq,mean_sq_dY,int_sq_dZ,converged"
    assert lines[3] == "16,0.0,0.0,0.0,0.0,1"


def test_study_nonconvergence_flags_partial(tmp_path):
    out = tmp_path / "out"
    doc = _with(driver={"family": "attraction", "params": {"kappa": 8.0}}, solver={"max_iterations": 2})
    assert main(["study", "--config", _write(tmp_path, doc), "--out", str(out)]) != 0
    assert "# partial=true" in (out / "convergence.csv").read_text()


def test_module_entry_point(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, _with(driver={"family": "zero"}))
    proc = subprocess.run([sys.executable, "-m", "interbsde", "solve", "--config", cfg, "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "solution.csv").exists()
