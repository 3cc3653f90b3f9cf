import json

import pytest
import yaml

from deformed_anosov import cli
from deformed_anosov.config import (PRESETS, ExperimentConfig, load_config, preset, static_diagnostics,
                                    validate)
from deformed_anosov.errors import ConfigError

# a bv-t3 run shrunk to test scale
SMALL = {
    "preset": "bv-t3",
    "deformation": {"k_samples": 20000, "cert_points": 1000},
    "verification": {"samples": 2000, "domination_points": 200, "grid": 8, "n_time": 12},
    "lyapunov": {"n": 1000, "ensemble": 10, "survey_n": 200, "cs_n": 500},
    "manifolds": {"grid": 6, "N_ladder": [4, 8, 16], "L_ladder": [5, 20]},
    "ergodicity": {"ensemble": 30, "horizons": [10, 100]},
}


def _write(tmp_path, d, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return p


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    return load_config(_write(tmp_path_factory.mktemp("cfg"), SMALL))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip_and_validate(name):
    cfg = preset(name)
    again = ExperimentConfig.from_dict(yaml.safe_load(cfg.to_yaml()))
    assert again == cfg
    assert again.digest() == cfg.digest()
    assert validate(cfg) == []


def test_unknown_preset():
    with pytest.raises(ConfigError) as e:
        preset("nope")
    assert e.value.path == "preset"


def test_config_error_paths():
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict({"deformation": {"scael": 0.1}})
    assert e.value.path == "deformation.scael"
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict({"lyapunov": {"n": "many"}})
    assert e.value.path == "lyapunov.n"
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict({"verification": {"cone": 1}})
    assert e.value.path == "verification.cone"
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict({"verification": None})
    assert e.value.path == "verification"
    assert ExperimentConfig.from_dict({"deformation": None}).deformation is None


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_preset_overrides(tmp_path):
    cfg = load_config(_write(tmp_path, {"preset": "catxid", "seed": 5, "adjust": {"sigma": 0.2}}))
    assert cfg.name == "catxid" and cfg.seed == 5
    assert cfg.adjust.sigma == 0.2
    assert cfg.adjust.radii == preset("catxid").adjust.radii


def test_core_radius_diagnostic():
    cfg = preset("bv-t3")
    cfg.deformation.psi_core = cfg.deformation.psi_support
    assert ("deformation.psi_core", "must be smaller than psi_support") in static_diagnostics(cfg)
    cfg = preset("bv-t3")
    cfg.deformation.ramp_core = 0.1
    assert any(p == "deformation.ramp_core" for p, _ in validate(cfg))


def test_static_diagnostics_paths():
    cfg = preset("bv-t3")
    cfg.base.matrix = [[1, 1, 1], [1, 2, 2], [1, 2, 4]]
    cfg.stages = ["construct", "plot"]
    cfg.ergodicity.observables = [[0, 0, 0]]
    paths = {p for p, _ in static_diagnostics(cfg)}
    assert {"base.matrix", "stages[1]", "ergodicity.observables[0]"} <= paths
    cfg = preset("bv-t3")
    cfg.adjust.sigma = 0.3
    assert ("adjust.sigma", "index adjustment needs a product base with a neutral center") in validate(cfg)


def test_scale_too_large_predicted():
    cfg = preset("bv-t3")
    cfg.deformation.scale = 0.5
    diags = validate(cfg)
    assert len(diags) == 1
    assert diags[0][0] == "deformation.scale"
    assert diags[0][1].startswith("ScaleTooLarge predicted")
    assert validate(cfg, quick_scan=False) == []


def test_run_rejects_invalid_config(tmp_path):
    cfg = preset("bv-t3")
    cfg.lyapunov.n = 5
    with pytest.raises(ConfigError) as e:
        cli.run(cfg, tmp_path)
    assert e.value.path == "lyapunov.n"
    with pytest.raises(ConfigError):
        cli.run(preset("bv-t3"), tmp_path, stages=["plot"])


def test_all_stages_off(small_cfg, tmp_path):
    m = cli.run(small_cfg, tmp_path, stages=[])
    assert list(m.stages) == ["construct"]
    assert set(m.files) == {"config.yaml", "construction_report.json"}
    assert m.verdicts == {} and m.passed
    assert (tmp_path / "manifest.json").exists()


@pytest.fixture(scope="module")
def full_runs(small_cfg, tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    return (cli.run(small_cfg, a), a), (cli.run(small_cfg, b), b)


def test_manifest_complete(full_runs, small_cfg):
    (m, out), _ = full_runs
    assert set(m.stages) == set(small_cfg.stages)
    assert all(s["status"] == "ok" for s in m.stages.values())
    assert set(m.files) == {"config.yaml", "construction_report.json", "verification_report.json",
                            "lyapunov.csv", "coverage.csv", "failure_cloud.csv", "dispersion.csv"}
    for name in m.files:
        assert (out / name).exists()
    d = json.loads((out / "manifest.json").read_text())
    assert d["config_digest"] == small_cfg.digest()
    assert d["overall"] == ("pass" if m.passed else "fail")
    assert set(d["verdicts"]) >= {"fixed_point_exactness", "hamiltonian_sentinel", "volume", "support",
                                  "cone_invariance", "domination", "V_membership", "lyapunov_volume_sum",
                                  "phc_plus_coverage"}
    assert all("wall_time" in s for s in d["stages"].values())


def test_runs_reproducible(full_runs):
    (m1, o1), (m2, o2) = full_runs
    assert m1.files == m2.files
    for name in m1.files:
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["preset", "list"]) == 0
    assert "catxid" in capsys.readouterr().out
    assert cli.main(["preset", "show", "linear-only"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["name"] == "linear-only"
    assert cli.main(["validate", "--preset", "catxid"]) == 0
    bad = _write(tmp_path, {"preset": "bv-t3", "deformation": {"scale": 0.5}}, "bad.yaml")
    assert cli.main(["validate", "--config", str(bad)]) == 2
    assert "deformation.scale" in capsys.readouterr().out
    typo = _write(tmp_path, {"lyapnov": {}}, "typo.yaml")
    assert cli.main(["run", "--config", str(typo), "--out", str(tmp_path / "x")]) == 2
    assert "lyapnov" in capsys.readouterr().err


def test_cli_run_pass_and_fail(tmp_path):
    ok = _write(tmp_path, dict(SMALL, stages=["construct", "verify"]), "ok.yaml")
    assert cli.main(["run", "--config", str(ok), "--out", str(tmp_path / "ok")]) == 0
    strict = dict(SMALL, stages=["construct", "verify"])
    strict["verification"] = dict(SMALL["verification"], cone_margin=0.99)
    bad = _write(tmp_path, strict, "strict.yaml")
    assert cli.main(["run", "--config", str(bad), "--seed", "3", "--out", str(tmp_path / "bad")]) == 1
    d = json.loads((tmp_path / "bad" / "manifest.json").read_text())
    assert d["verdicts"]["cone_invariance"] == "fail" and d["seed"] == 3


def test_stage_error_recorded(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    cfg.deformation.scale = 0.5
    cfg.stages = ["construct", "verify"]
    m = cli.run(cfg, tmp_path / "err")
    assert m.stages["construct"]["status"] == "error"
    assert m.stages["construct"]["error"] == "ScaleTooLarge"
    assert m.stages["verify"]["status"] == "skipped"
    assert not m.passed
    assert (tmp_path / "err" / "manifest.json").exists()
