import json

import pytest

from uppe_green.models.errors import ConfigError
from uppe_green.models.experiment import (
    EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_IO_ERROR, EXIT_OK, ExperimentConfig, config_to_text,
    parse_config, run,
)

SMALL = """\
experiment = {experiment}
seed = 7
threads = 1

[grid]
n_x = 8
n_y = 8
n_z = 8
n_t = 16
d_t = 0.5   # half a spatial step

[green]
branch_policy = "evanescent_zero"
"""


def small_config(experiment="theorem1", extra=""):
    return parse_config(SMALL.format(experiment=experiment) + extra)


def test_empty_config_gives_defaults():
    assert parse_config("") == ExperimentConfig()
    assert parse_config("# nothing here\n\n").experiment == "checks"


def test_parse_small_config():
    cfg = small_config("causality")
    assert cfg.experiment == "causality"
    assert cfg.seed == 7
    assert (cfg.grid.n_x, cfg.grid.n_t, cfg.grid.d_t) == (8, 16, 0.5)
    assert cfg.green.branch_policy == "evanescent_zero"
    assert cfg.green.sigma_r is None


def test_odd_count_is_reported_with_its_line():
    with pytest.raises(ConfigError, match="counts must be even") as err:
        parse_config("experiment = theorem1\n[grid]\nn_x = 15\n")
    assert err.value.line == 3
    assert "line 3" in str(err.value)


@pytest.mark.parametrize("text, line, message", [
    ("[grid]\nn_q = 4\n", 2, "unknown key"),
    ("seed = 1\n[mesh]\n", 2, "unknown section"),
    ("[grid]\nn_x 8\n", 2, "malformed line"),
    ("[grid]\nn_x = 8.5\n", 2, "must be an integer"),
    ("[source]\nwidths = [2, 2, 2]\n", 2, "4 values"),
    ("[propagate]\ndz = -1.0\n", 2, "positive"),
    ("experiment = sideways\n", 1, "unknown experiment"),
    ("[green]\nsigma_t = 0.5\n", 2, "sigma_t"),
])
def test_config_errors(text, line, message):
    with pytest.raises(ConfigError, match=message) as err:
        parse_config(text)
    assert err.value.line == line


def test_config_text_reparses_to_the_same_config():
    cfg = small_config("propagate", "\n[source]\nwidths = [2, 2, 2, 1]\ncarrier = [1.0, 2.0]\n")
    assert parse_config(config_to_text(cfg)) == cfg


def test_theorem1_run_writes_artifacts(tmp_path):
    code = run(small_config("theorem1"), out_dir=tmp_path)
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["checks"][0]["name"] == "theorem1"
    assert summary["checks"][0]["residual"] <= 1e-8
    assert "runtime" not in summary["checks"][0]
    assert (tmp_path / "theorem1_quadrants.csv").exists()
    assert (tmp_path / "config.echo.toml").exists()
    assert "check.theorem1" in json.loads((tmp_path / "runtime.json").read_text())


def test_runs_are_reproducible(tmp_path):
    codes = [run(small_config("causality"), out_dir=tmp_path / name) for name in ("a", "b")]
    assert codes[0] == codes[1]
    assert codes[0] in (EXIT_OK, EXIT_CHECK_FAILED)
    for name in ("summary.json", "quadrant_energies.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("experiment", ["fundamental", "paraxial"])
def test_field_experiments_write_fields(tmp_path, experiment):
    code = run(small_config(experiment), out_dir=tmp_path)
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert any(name.endswith(".json") for name in summary["files"])
    assert all(check["passed"] for check in summary["checks"])


def test_propagate_streams_slices(tmp_path):
    cfg = small_config("propagate", "\n[propagate]\ndz = 0.5\ndecimate = 2\n")
    assert run(cfg, out_dir=tmp_path) == EXIT_OK
    slices = sorted((tmp_path / "slices").glob("slice_*.json"))
    # 14 steps from z = -4 to z = 3, every second one kept plus the start
    assert len(slices) == 8
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "march_vs_convolution" in summary["diagnostics"]
    assert set(summary["diagnostics"]["source_direction"]) == {"forward", "backward"}
    assert (tmp_path / "slice_energy.csv").exists()


def test_invalid_parameters_exit_with_config_error(tmp_path):
    cfg = small_config("theorem1")
    cfg.green.sigma_t = 0.1
    assert run(cfg, out_dir=tmp_path) == EXIT_CONFIG_ERROR


def test_unwritable_output_exits_with_io_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run(small_config("theorem1"), out_dir=blocker / "run") == EXIT_IO_ERROR
