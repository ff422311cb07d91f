import subprocess
import sys

import pytest

from staircase.cli import main

TINY = """
[run]
name = clitiny
kind = resnet
seeds = 0

[target]
family = parity
n = 5
k = 2

[resnet]
width = 4
depth = 1
steps = 50
eval_interval = 50
test_size = 500
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


class TestCLI:
    def test_presets_list(self, capsys):
        assert main(["presets", "list"]) == 0
        out = capsys.readouterr().out
        assert "fig2-staircase" in out and "verify-all" in out

    def test_presets_show(self, capsys):
        assert main(["presets", "show", "fig2-parity"]) == 0
        assert "family = parity" in capsys.readouterr().out

    def test_run(self, config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        assert "ok" in capsys.readouterr().out
        assert any(p.name.startswith("clitiny_parity_seed0_") for p in out.iterdir())

    def test_seed_override_and_jobs(self, config, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(config), "--out", str(out), "--seed", "1-2", "--jobs", "2"]) == 0
        names = {p.name.split("_")[2] for p in out.glob("clitiny_parity_seed*.csv")}
        assert names == {"seed1", "seed2"}

    def test_env_out_dir(self, config, tmp_path, monkeypatch):
        monkeypatch.setenv("STAIRCASE_OUT", str(tmp_path / "env"))
        assert main(["run", "--config", str(config)]) == 0
        assert (tmp_path / "env").is_dir()

    def test_empty_seed_is_usage_error(self, config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", str(config), "--seed", "", "--out", str(out)]) == 2
        assert "empty" in capsys.readouterr().err
        assert not out.exists()

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[run]\nkind = resnet\n")
        assert main(["run", "--config", str(path)]) == 2

    def test_unknown_suite(self):
        with pytest.raises(SystemExit) as info:
            main(["verify", "nope"])
        assert info.value.code == 2

    def test_verify_suite(self, capsys):
        assert main(["verify", "staircase"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "staircase.cli", "presets", "list"], capture_output=True, text=True)
        assert res.returncode == 0 and "layerwise-s3" in res.stdout
