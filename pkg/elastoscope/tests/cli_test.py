import json
import tempfile
from pathlib import Path

import pytest

from elastoscope.api.cli import run
from elastoscope.api.schemas import RunConfig, load_config
from elastoscope.core.errors import ConfigError, MissingData
from elastoscope.utils.field_io import read_table, read_vtk
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

PHANTOM = """
[phantom]
background = 1.0

[[phantom.inclusions]]
center = [0.5, 0.5]
radius = 0.15
contrast = 0.2
"""


def _config(tmp_path: Path, body: str) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(body, encoding="utf-8")
    return path


def _manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def test_load_config_defaults_and_seed(tmp_path):
    path = _config(tmp_path, "seed = 3\n[grid]\ncells = [8, 8]\n")
    cfg = load_config(path)
    assert isinstance(cfg, RunConfig)
    assert cfg.seed == 3
    assert cfg.excitations[0].kind == "shear"
    seeded = load_config(path, seed=9)
    assert seeded.seed == 9
    assert seeded.phantom.seed == 9
    assert [e.seed for e in seeded.excitations] == [9]


def test_load_config_errors(tmp_path):
    with pytest.raises(MissingData):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, "[grid\ncells = [8, 8]\n"))
    with pytest.raises(ConfigError) as info:
        load_config(_config(tmp_path, "[grid]\ncells = [8, 8]\ncolour = 'red'\n"))
    assert info.value.details["errors"][0]["loc"] == "grid.colour"
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, "[grid]\ncells = [8, 8]\n[certify]\nsource = 'strains'\n"))
    with pytest.raises(ConfigError):
        load_config(
            _config(tmp_path, "[grid]\ncells = [8, 8]\n[certify]\nstrains = [[[1.0, 0.0]]]\n")
        )


def test_missing_config_exits_with_domain_error(tmp_path):
    out = tmp_path / "out"
    code = run(["forward", "--config", str(tmp_path / "nope.toml"), "--out", str(out), "--quiet"])
    assert code == 2
    error = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert error["kind"] == "MissingData"
    assert error["command"] == "forward"
    assert error["exit_code"] == 2
    assert not (out / "manifest.json").exists()
    assert "MissingData" in (out / "run.log").read_text(encoding="utf-8")


def test_forward_run(tmp_path):
    path = _config(tmp_path, "[grid]\ncells = [8, 8]\n" + PHANTOM)
    out = tmp_path / "forward"
    assert run(["forward", "--config", str(path), "--out", str(out), "--seed", "5", "--quiet"]) == 0
    manifest = _manifest(out)
    assert manifest["command"] == "forward"
    assert manifest["status"] == "ok"
    assert manifest["seed"] == 5
    assert "solution_0.vtk" in manifest["outputs"]
    assert "solution_0.csv" in manifest["outputs"]
    assert "run.log" in manifest["outputs"]
    assert all(len(v) == 64 for v in manifest["fingerprints"].values())
    assert "u" in manifest["fingerprints"]
    assert manifest["residuals"]["channel_0"] < 1e-8
    assert {"numpy", "scipy", "pydantic", "pandas"} <= set(manifest["versions"])
    fields = read_vtk(out / "solution_0.vtk")
    assert fields["u"].values.shape == (2, 9, 9)


def test_reconstruct_run(tmp_path):
    body = "[grid]\ncells = [8, 8]\n" + PHANTOM + (
        "\n[inverse]\nn_max = 3\nrefine_data = false\nsnapshot_stride = 1\n"
    )
    out = tmp_path / "reconstruct"
    assert run(["reconstruct", "--config", str(_config(tmp_path, body)), "--out", str(out), "--quiet"]) == 0
    manifest = _manifest(out)
    details = manifest["details"]
    assert details["J_final"] <= details["J_initial"]
    assert "kernel_probe.json" in manifest["outputs"]
    trace = read_table(out / "trace.csv")
    assert list(trace["n"]) == list(range(len(trace)))
    assert "mu_true" in read_vtk(out / "mu_final.vtk")


def test_certify_run_with_strains(tmp_path):
    body = "[grid]\ncells = [6, 6]\n[certify]\nsource = 'strains'\nstrains = [[[1.0, 0.0], [0.0, -1.0]]]\n"
    out = tmp_path / "certify"
    assert run(["certify", "--config", str(_config(tmp_path, body)), "--out", str(out), "--quiet"]) == 0
    cert = json.loads((out / "certificate.json").read_text(encoding="utf-8"))
    assert cert["pass"] is True
    assert cert["inf"] == pytest.approx(2.0**0.5)
    checks = json.loads((out / "boundary_symbol.json").read_text(encoding="utf-8"))["checks"]
    assert checks[0]["report"]["pass"] is True
    assert "u0" in _manifest(out)["fingerprints"]


def test_certify_reports_pass_rate(tmp_path):
    body = (
        "[grid]\ncells = [8, 8]\n[certify]\nsource = 'strains'\n"
        "strains = [[[1.0, 0.0], [0.0, -1.0]]]\npass_rate_draws = 2\n"
    )
    out = tmp_path / "pass_rate"
    assert run(["certify", "--config", str(_config(tmp_path, body)), "--out", str(out), "--quiet"]) == 0
    rate = json.loads((out / "pass_rate.json").read_text(encoding="utf-8"))
    assert rate["draws"] == 2
    assert len(rate["infs"]) == 2
    assert rate["rate"] == rate["passes"] / 2
    assert rate["cells"] == [8, 8]
    assert _manifest(out)["details"]["pass_rate"] == rate["rate"]


def test_certify_3d_needs_two_fields(tmp_path):
    body = (
        "[grid]\ncells = [4, 4, 4]\n[certify]\nsource = 'strains'\n"
        "strains = [[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]]\n"
    )
    out = tmp_path / "certify3d"
    assert run(["certify", "--config", str(_config(tmp_path, body)), "--out", str(out), "--quiet"]) == 2
    error = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert error["kind"] == "InvalidProblem"


def test_stability_run(tmp_path):
    body = (
        "[grid]\ncells = [12, 12]\n"
        "[stability]\namplitudes = [0.1]\npairs_per_amplitude = 1\ng_bound_order = -1.0\n"
    )
    out = tmp_path / "stability"
    assert run(["stability", "--config", str(_config(tmp_path, body)), "--out", str(out), "--quiet"]) == 0
    rows = read_table(out / "stability.csv")
    assert len(rows) == 1
    assert rows["ratio"].iloc[0] > 0.0
    outputs = _manifest(out)["outputs"]
    assert {"stability_summary.json", "kernel_probe.json", "g_bound.json"} <= set(outputs)


if __name__ == "__main__":
    for test in (
        test_load_config_defaults_and_seed,
        test_load_config_errors,
        test_missing_config_exits_with_domain_error,
        test_forward_run,
        test_reconstruct_run,
        test_certify_run_with_strains,
        test_certify_reports_pass_rate,
        test_certify_3d_needs_two_fields,
        test_stability_run,
    ):
        with tempfile.TemporaryDirectory() as tmp:
            test(Path(tmp))
    logger.info("All CLI tests passed.")
