import json
import os

import numpy as np
import pytest

from confbend.cli import JobConfig, main


def write_config(path, **kw):
    base = {"kind": "hyperbolic", "n": 5, "seed": 3, "use_solver": True,
            "grid": {"u0": 0.0, "u1": 0.5, "v0": 0.0, "v1": 0.5,
                     "nu": 33, "nv": 33},
            "sample_count": 16, "killing_count": 2}
    base.update(kw)
    with open(path, "w") as fh:
        json.dump(base, fh)
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "config.json", out=str(root / "out"))
    assert main(["generate", "--config", str(cfg)]) == 0
    return root, cfg


def test_generate_writes_artifact_chain(workspace):
    root, _ = workspace
    for name in ("patch.json", "mu.json", "pair.json", "solutions.json",
                 "samples.csv", "samples.json", "manifest.json"):
        assert (root / "out" / name).exists()


def test_generate_structured_mu_failure(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", out=str(tmp_path / "o"),
                       component_scale=[1, 0, 0, 0, 0, 0, 0, 1])
    assert main(["generate", "--config", str(cfg)]) == 2
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["error"] == "mu_nonpositive"
    assert len(payload["location"]) == 2


def test_low_dimension_rejected_at_parse_time(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=4)
    assert main(["generate", "--config", str(cfg)]) == 3


def test_bad_kind_rejected(tmp_path):
    cfg = write_config(tmp_path / "c.json", kind="parabolic")
    assert main(["generate", "--config", str(cfg)]) == 3


def test_missing_config_is_io_error(tmp_path):
    missing = str(tmp_path / "nope.json")
    assert main(["generate", "--config", missing]) == 3


def test_verify_passes_and_is_deterministic(workspace):
    root, cfg = workspace
    assert main(["verify", "--config", str(cfg)]) == 0
    first = (root / "out" / "report.json").read_bytes()
    assert main(["verify", "--config", str(cfg)]) == 0
    assert (root / "out" / "report.json").read_bytes() == first
    payload = json.loads(first)
    assert payload["all_passed"]
    names = {c["name"] for c in payload["checks"]}
    assert {"conjugate_hyperbolic", "pair_round_trip", "regularity",
            "focal_unit_norm", "d_codazzi",
            "reconstructed_nontrivial"} <= names


def test_verify_missing_artifacts(tmp_path):
    cfg = write_config(tmp_path / "c.json", out=str(tmp_path / "empty"))
    assert main(["verify", "--config", str(cfg)]) == 3


def test_verify_fails_on_perturbed_artifact(workspace, tmp_path):
    root, _ = workspace
    out = tmp_path / "broken"
    out.mkdir()
    for name in ("patch.json", "mu.json", "pair.json", "manifest.json",
                 "samples.json"):
        out.joinpath(name).write_bytes((root / "out" / name).read_bytes())
    pair = json.loads((out / "pair.json").read_text())
    rng = np.random.default_rng(0)
    h = np.array(pair["h"])
    pair["h"] = (h + 0.02 * rng.normal(size=h.shape)).tolist()
    (out / "pair.json").write_text(json.dumps(pair))
    cfg = write_config(tmp_path / "c.json", out=str(out))
    assert main(["verify", "--config", str(cfg)]) == 1


def test_export_formats(workspace, tmp_path):
    _, cfg = workspace
    csv = tmp_path / "cloud.csv"
    assert main(["export", "--config", str(cfg), "--what", "samples",
                 "--file", str(csv)]) == 0
    assert csv.read_text().startswith("u,v,theta1")
    obj = tmp_path / "slice.obj"
    assert main(["export", "--config", str(cfg), "--what", "mesh",
                 "--file", str(obj)]) == 0
    lines = obj.read_text().splitlines()
    assert any(ln.startswith("v ") for ln in lines)
    assert any(ln.startswith("f ") for ln in lines)
    pcsv = tmp_path / "h.csv"
    assert main(["export", "--config", str(cfg), "--what", "pair",
                 "--file", str(pcsv)]) == 0
    assert pcsv.read_text().startswith("u,v,")


def test_report_pretty_print(workspace, capsys):
    root, _ = workspace
    assert main(["report", "--in", str(root / "out" / "report.json")]) == 0
    out = capsys.readouterr().out
    assert "[pass]" in out


def test_report_exit_one_on_failure(tmp_path):
    payload = {"all_passed": False,
               "checks": [{"name": "x", "max_residual": 1.0,
                           "tolerance": 0.1, "passed": False,
                           "argmax": [], "extra": {}}]}
    p = tmp_path / "r.json"
    p.write_text(json.dumps(payload))
    assert main(["report", "--in", str(p)]) == 1


def test_config_defaults_and_overrides(tmp_path):
    cfg_path = write_config(tmp_path / "c.json", out=str(tmp_path / "o"))
    cfg = JobConfig.load(cfg_path, overrides={"seed": 99,
                                              "tol_scale": 2.0,
                                              "out": None})
    assert cfg.seed == 99 and cfg.tol_scale == 2.0
    assert cfg.out == str(tmp_path / "o")
    assert cfg.grid.nu == 33
