import csv
import json
from pathlib import Path

import pytest

from staircase.experiment import (
    OUT_ENV,
    ConfigError,
    default_out_dir,
    load_preset,
    parse_config,
    parse_seeds,
    parse_tracked,
    preset_names,
    run_config,
)
from staircase.fourier import subset

GOLDEN = Path(__file__).parent / "golden"

RESNET_TINY = """
[run]
name = tiny
kind = resnet
seeds = 0-1
eval_interval = 100

[target]
family = staircase
n = 6
k = 3

[data]
m = 500

[resnet]
width = 8
depth = 2
steps = 300
test_size = 1000
"""

LAYERWISE_TINY = """
[run]
name = lw
kind = layerwise
seeds = 0
tracked = 1;1,2

[target]
family = staircase
n = 5
k = 2

[layerwise]
W = 8
L = 2
"""


def header(path):
    return path.read_text().splitlines()[0]


class TestParsing:
    def test_seeds(self):
        assert parse_seeds("0-3") == [0, 1, 2, 3]
        assert parse_seeds("0,3,7") == [0, 3, 7]
        assert parse_seeds("4") == [4]
        assert parse_seeds("") == []

    def test_tracked(self):
        assert parse_tracked("chain") is None
        assert parse_tracked("1;1,2") == [subset(1), subset(1, 2)]

    def test_resnet_config(self):
        cfg = parse_config(RESNET_TINY)
        assert cfg.kind == "resnet" and cfg.seeds == [0, 1] and cfg.m == 500
        rc = cfg.resnet_config(1)
        assert (rc.n, rc.width, rc.depth, rc.steps, rc.seed) == (6, 8, 2, 300, 1)

    def test_layerwise_keys_are_case_sensitive(self):
        hp = parse_config(LAYERWISE_TINY).hyperparams()
        assert hp.W == 8 and hp.L == 2 and hp.p1 == 0.15

    def test_hash_ignores_seeds(self):
        a = parse_config(RESNET_TINY)
        b = parse_config(RESNET_TINY.replace("seeds = 0-1", "seeds = 5"))
        c = parse_config(RESNET_TINY.replace("width = 8", "width = 9"))
        assert a.config_hash() == b.config_hash() != c.config_hash()

    @pytest.mark.parametrize(
        "text",
        [
            "[target]\nn = 4\n",
            "[run]\nkind = resnet\n",
            RESNET_TINY.replace("seeds = 0-1", "seeds = "),
            RESNET_TINY.replace("kind = resnet", "kind = bogus"),
            RESNET_TINY.replace("family = staircase", "family = nope"),
            "[run]\nkind = verify\nsuites = nope\n",
            "not an ini",
        ],
    )
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)


class TestPresets:
    def test_all_presets_parse(self):
        names = preset_names()
        assert {"fig2-staircase", "fig2-parity", "appendixA-biased", "verify-all"} <= set(names)
        for name in names:
            load_preset(name)

    def test_fig2_staircase(self):
        cfg = load_preset("fig2-staircase")
        (t,) = cfg.targets
        assert (t.family, t.n, t.k, t.normalize) == ("staircase", 30, 10, True)
        rc = cfg.resnet_config(0)
        assert (rc.width, rc.depth, rc.batch, rc.step_size, rc.steps) == (40, 5, 20, 0.01, 300_000)
        assert cfg.m is None and cfg.seeds == list(range(10))

    def test_biased_preset(self):
        cfg = load_preset("appendixA-biased")
        assert [t.family for t in cfg.targets] == ["staircase", "parity"]
        t = cfg.targets[0]
        assert (t.n, t.k, t.measure, t.p) == (30, 7, "biased", 0.75)
        assert cfg.m == 60_000 and cfg.resnet_config(0).batch == 20

    def test_unknown(self):
        with pytest.raises(ConfigError):
            load_preset("fig9")


class TestRuns:
    def test_resnet_artifacts(self, tmp_path):
        cfg = parse_config(RESNET_TINY)
        status, results = run_config(cfg, tmp_path)
        assert status == 0 and [r.seed for r in results] == [0, 1]
        h = cfg.config_hash()
        for s in (0, 1):
            stem = tmp_path / f"tiny_staircase_seed{s}_{h}"
            assert header(Path(f"{stem}.csv")) == header(GOLDEN / "resnet_trace_header.csv")
            for suffix in ("_params.txt", "_loss.svg", "_fourier.svg"):
                assert Path(f"{stem}{suffix}").exists()
        summary = tmp_path / f"tiny_summary_{h}.csv"
        assert header(summary) == header(GOLDEN / "summary_header.csv")
        assert (tmp_path / f"tiny_{h}.ini").read_text() == RESNET_TINY

    def test_layerwise_artifacts(self, tmp_path):
        cfg = parse_config(LAYERWISE_TINY)
        status, (r,) = run_config(cfg, tmp_path)
        assert status == 0 and r.status == "ok"
        trace = tmp_path / f"lw_staircase_seed0_{cfg.config_hash()}.csv"
        assert header(trace) == header(GOLDEN / "layerwise_trace_header.csv")
        rows = list(csv.DictReader(trace.open()))
        assert len(rows) == 8 * 2 + 1

    def test_failure_writes_error_record(self, tmp_path):
        cfg = parse_config(RESNET_TINY.replace("seeds = 0-1", "seeds = 0") + "step_size = 50\n")
        status, (r,) = run_config(cfg, tmp_path)
        assert status == 1 and r.status == "error"
        rec = json.loads((tmp_path / f"tiny_staircase_seed0_{cfg.config_hash()}_error.json").read_text())
        assert rec["error_type"] == "FloatingPointError" and rec["seed"] == 0
        assert rec["config_hash"] == cfg.config_hash() and "Traceback" in rec["traceback"]
        with open(tmp_path / f"tiny_summary_{cfg.config_hash()}.csv") as fh:
            assert next(csv.DictReader(fh))["status"] == "error"

    def test_jobs_do_not_change_outputs(self, tmp_path):
        cfg = parse_config(RESNET_TINY)
        run_config(cfg, tmp_path / "a", jobs=1)
        run_config(cfg, tmp_path / "b", jobs=2)
        for f in (tmp_path / "a").glob("*.csv"):
            if "summary" in f.name:
                continue
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        for f in (tmp_path / "a").glob("*_params.txt"):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_seed_override(self, tmp_path):
        _, results = run_config(parse_config(RESNET_TINY), tmp_path, seeds=[3])
        assert [r.seed for r in results] == [3]

    def test_empty_seed_override(self, tmp_path):
        with pytest.raises(ConfigError):
            run_config(parse_config(RESNET_TINY), tmp_path, seeds=[])
        assert not any(tmp_path.iterdir())

    def test_default_out_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "x"))
        assert default_out_dir() == tmp_path / "x"
        monkeypatch.delenv(OUT_ENV)
        assert default_out_dir() == Path("runs")
