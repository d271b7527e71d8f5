import pytest

from uppe_green.main import main

CONFIG = """\
experiment = causality
[grid]
n_x = 8
n_y = 8
n_z = 8
n_t = 16
"""


def test_main_runs_an_experiment(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(CONFIG)
    out = tmp_path / "out"
    assert main([str(config), "--out", str(out), "--experiment", "theorem1", "--threads", "1"]) == 0
    assert (out / "summary.json").exists()


def test_main_missing_config_is_an_io_error(tmp_path):
    assert main([str(tmp_path / "missing.toml")]) == 3


def test_main_bad_config_is_a_config_error(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[grid]\nn_x = 15\n")
    assert main([str(config), "--out", str(tmp_path / "out")]) == 2


def test_main_rejects_negative_threads(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(CONFIG)
    assert main([str(config), "--threads", "-1"]) == 2


def test_main_rejects_unknown_experiment(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(CONFIG)
    with pytest.raises(SystemExit):
        main([str(config), "--experiment", "sideways"])
