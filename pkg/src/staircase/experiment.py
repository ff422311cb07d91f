"""Run configurations, presets, seed sweeps and on-disk artifacts.

A configuration is an INI file::

    [run]
    kind = resnet            ; layerwise | resnet | fourier-trace
    seeds = 0-9              ; "0-9", "0,3,7" or "4"
    eval_interval = 1000
    tracked = chain          ; or explicit subsets "1;1,2;1,2,3"
    success = 0.1            ; loss / test-MSE threshold for the summary flag

    [target]
    family = staircase, parity
    n = 30
    k = 10
    normalize = true
    measure = unbiased       ; unbiased | biased | gaussian
    p = 0.5

    [data]
    m = 60000                ; or "fresh"

    [resnet]                 ; any ResNetConfig field
    width = 40

    [layerwise]              ; any Hyperparams field, on top of the practical preset
    W = 128
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .fourier import format_subset, subset
from .layerwise import SparsityViolation, practical_preset, train_network_layerwise
from .regular_net import Hyperparams, dumps_checkpoint
from .resnet import ResNetConfig, count_inversions, dumps_resnet, sgd_train
from .sampling import Measure, make_cyclic_dataset, make_stream
from .svg import line_chart
from .targets import TargetSpec

KINDS = ("layerwise", "resnet", "fourier-trace", "verify")
OUT_ENV = "STAIRCASE_OUT"
DEFAULT_OUT = "runs"
FOURIER_TRACE_INTERVAL = 250


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    name: str
    kind: str
    targets: list
    seeds: list
    eval_interval: int = 1000
    tracked: list | None = None
    m: int | None = None
    success: float = 0.1
    resnet: dict = field(default_factory=dict)
    layerwise: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    text: str = ""

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if self.kind == "verify":
            from .verify import SUITES

            bad = [s for s in self.suites if s not in SUITES and s != "all"]
            if not self.suites or bad:
                raise ConfigError(f"verify config needs known suites, got {self.suites}")
            return
        if not self.targets:
            raise ConfigError("no target family given")
        if self.eval_interval < 1:
            raise ConfigError("eval_interval must be >= 1")
        if self.kind == "layerwise":
            for t in self.targets:
                if t.measure == "gaussian":
                    raise ConfigError("layerwise training needs a cube measure")
            self.hyperparams()
        else:
            self.resnet_config(0)

    def hyperparams(self) -> Hyperparams:
        try:
            return practical_preset(**self.layerwise)
        except TypeError as exc:
            raise ConfigError(f"bad [layerwise] key: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def resnet_config(self, seed: int) -> ResNetConfig:
        n = self.targets[0].n
        known = {f.name for f in fields(ResNetConfig)}
        bad = set(self.resnet) - known
        if bad:
            raise ConfigError(f"bad [resnet] keys: {', '.join(sorted(bad))}")
        interval = self.eval_interval
        try:
            return ResNetConfig(n=n, seed=seed, eval_interval=interval, **{k: v for k, v in self.resnet.items() if k not in ("n", "seed", "eval_interval")})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def config_hash(self) -> str:
        """Digest of everything except the seed list."""
        canon = json.dumps(
            {
                "kind": self.kind,
                "targets": [t.__dict__ for t in self.targets],
                "eval_interval": self.eval_interval,
                "tracked": self.tracked,
                "m": self.m,
                "success": self.success,
                "resnet": self.resnet,
                "layerwise": self.layerwise,
            },
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:10]


def parse_seeds(text: str) -> list[int]:
    """"0-9", "0,3,7" or "4" (non-negative)."""
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        lo, _, hi = part.partition("-")
        if hi:
            if int(hi) < int(lo):
                raise ConfigError(f"bad seed range {part!r}")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(lo))
    return out


def parse_tracked(text: str) -> list[int] | None:
    text = text.strip()
    if text in ("", "chain", "default"):
        return None
    return [subset(*[int(i) for i in grp.split(",") if i.strip()]) for grp in text.split(";") if grp.strip()]


def _value(raw: str):
    low = raw.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw.strip()


def parse_config(text: str, name: str = "config") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # hyperparameter names such as W, L, B are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    if not cp.has_section("run"):
        raise ConfigError("config needs a [run] section")
    run = cp["run"]
    if run.get("kind", "").strip() == "verify":
        cfg = RunConfig(
            name=run.get("name", name).strip(),
            kind="verify",
            targets=[],
            seeds=[0],
            suites=[s.strip() for s in run.get("suites", "all").split(",") if s.strip()],
            text=text,
        )
        cfg.validate()
        return cfg
    if not cp.has_section("target"):
        raise ConfigError("config needs a [target] section")
    tgt = cp["target"]
    try:
        families = [f.strip() for f in tgt.get("family", "staircase").split(",") if f.strip()]
        base = dict(
            n=tgt.getint("n"),
            k=tgt.getint("k", 1),
            j=tgt.getint("j", 1),
            l=tgt.getint("l", 1),
            normalize=tgt.getboolean("normalize", False),
            measure=tgt.get("measure", "unbiased"),
            p=tgt.getfloat("p", 0.5),
        )
        if base["n"] is None:
            raise ConfigError("[target] needs n")
        targets = [TargetSpec(family=f, **base) for f in families]
        m_raw = cp.get("data", "m", fallback="fresh").strip().lower()
        m = None if m_raw in ("fresh", "none", "") else int(float(m_raw))
        kind = run.get("kind", "resnet").strip()
        interval_default = FOURIER_TRACE_INTERVAL if kind == "fourier-trace" else 1000
        cfg = RunConfig(
            name=run.get("name", name).strip(),
            kind=kind,
            targets=targets,
            seeds=parse_seeds(run.get("seeds", "0")),
            eval_interval=run.getint("eval_interval", interval_default),
            tracked=parse_tracked(run.get("tracked", "chain")),
            m=m,
            success=run.getfloat("success", 0.05 if kind == "layerwise" else 0.1),
            resnet={k: _value(v) for k, v in cp["resnet"].items()} if cp.has_section("resnet") else {},
            layerwise={k: _value(v) for k, v in cp["layerwise"].items()} if cp.has_section("layerwise") else {},
            text=text,
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text(), p.stem)


def preset_names() -> list[str]:
    root = resources.files("staircase") / "presets"
    return sorted(entry.name[:-4] for entry in root.iterdir() if entry.name.endswith(".ini"))


def preset_text(name: str) -> str:
    entry = resources.files("staircase") / "presets" / f"{name}.ini"
    if not entry.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return entry.read_text()


def load_preset(name: str) -> RunConfig:
    return parse_config(preset_text(name), name)


def preset_summary(name: str) -> str:
    for line in preset_text(name).splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


@dataclass
class UnitResult:
    target: str
    seed: int
    status: str
    final_loss: float = math.nan
    success: bool = False
    reached_at: float = math.nan
    inversions: int | None = None
    wall_time: float = 0.0
    files: list = field(default_factory=list)


def _stem(cfg: RunConfig, target: TargetSpec, seed: int) -> str:
    return f"{cfg.name}_{target.family}_seed{seed}_{cfg.config_hash()}"


def _tracked_for(cfg: RunConfig, target: TargetSpec) -> list[int]:
    return cfg.tracked if cfg.tracked is not None else target.chain_subsets()


def _run_layerwise(cfg, target, seed, out, stem):
    hyper = cfg.hyperparams()
    measure = Measure(target.measure, target.n, target.p)
    stream = make_stream(measure, target.evaluator(), seed)
    tracked = _tracked_for(cfg, target)
    files = []
    try:
        params, trace, topology = train_network_layerwise(target.n, stream, hyper, seed, tracked=tracked)
    except SparsityViolation as exc:
        if exc.trace is not None:
            path = out / f"{stem}.csv"
            path.write_text(exc.trace.to_csv())
            files.append(path.name)
        exc.files = files
        raise
    (out / f"{stem}.csv").write_text(trace.to_csv())
    (out / f"{stem}_params.txt").write_text(dumps_checkpoint(topology, params))
    its = [r.iteration for r in trace.rows]
    (out / f"{stem}_loss.svg").write_text(
        line_chart({"population loss": (its, [r.loss for r in trace.rows])}, f"{target.family}, seed {seed}", "neurons trained", "loss", log_y=True)
    )
    series = {f"zeta_hat {format_subset(S) or 'empty'}": (its, [r.zeta_hat[i] for r in trace.rows]) for i, S in enumerate(tracked)}
    (out / f"{stem}_fourier.svg").write_text(line_chart(series, f"error spectrum, seed {seed}", "neurons trained", "coefficient"))
    files += [f"{stem}.csv", f"{stem}_params.txt", f"{stem}_loss.svg", f"{stem}_fourier.svg"]
    loss = trace.final_loss
    ok = loss <= cfg.success and trace.representation_monotone()
    return dict(final_loss=loss, success=ok, reached_at=len(trace.rows) - 1, inversions=None, files=files)


def _run_resnet(cfg, target, seed, out, stem):
    rc = cfg.resnet_config(seed)
    measure = Measure(target.measure, target.n, target.p)
    evaluator = target.evaluator()
    if cfg.m is None:
        stream = make_stream(measure, evaluator, seed)
    else:
        stream = make_cyclic_dataset(measure, evaluator, cfg.m, seed)
    tracked = _tracked_for(cfg, target)
    g = target.polynomial()
    coefs = [g.coefficient(S) for S in tracked]
    params, trace = sgd_train(rc, stream, tracked, coefs, features=target.features)
    (out / f"{stem}.csv").write_text(trace.to_csv())
    (out / f"{stem}_params.txt").write_text(dumps_resnet(params))
    steps = [r[0] for r in trace.rows]
    (out / f"{stem}_loss.svg").write_text(
        line_chart(
            {"test MSE": (steps, [r[2] for r in trace.rows]), "train loss": (steps[1:], [r[1] for r in trace.rows[1:]])},
            f"{target.family}, seed {seed}",
            "SGD step",
            "loss",
            log_y=True,
        )
    )
    series = {f"f_hat {format_subset(S)}": (steps, [r[3][i] for r in trace.rows]) for i, S in enumerate(tracked)}
    (out / f"{stem}_fourier.svg").write_text(line_chart(series, f"Fourier coefficients, seed {seed}", "SGD step", "coefficient"))
    files = [f"{stem}.csv", f"{stem}_params.txt", f"{stem}_loss.svg", f"{stem}_fourier.svg"]
    if trace.diverged:
        raise FloatingPointError(f"SGD diverged at step {trace.diverged_at}")
    reached = trace.steps_to_mse(cfg.success)
    crossings = trace.crossing_times()
    return dict(
        final_loss=trace.final_mse,
        success=reached is not None,
        reached_at=math.nan if reached is None else reached,
        inversions=count_inversions(crossings) if all(math.isfinite(t) for t in crossings) else None,
        files=files,
    )


def run_unit(cfg: RunConfig, target_index: int, seed: int, out: str) -> UnitResult:
    """One (target, seed) run. Never raises: failures become an error record on disk."""
    target = cfg.targets[target_index]
    outp = Path(out)
    stem = _stem(cfg, target, seed)
    t0 = time.time()
    try:
        if cfg.kind == "layerwise":
            res = _run_layerwise(cfg, target, seed, outp, stem)
        else:
            res = _run_resnet(cfg, target, seed, outp, stem)
        return UnitResult(target.family, seed, "ok", wall_time=time.time() - t0, **res)
    except Exception as exc:  # recorded, not swallowed: the caller turns it into a nonzero exit
        record = {
            "config": cfg.name,
            "config_hash": cfg.config_hash(),
            "target": target.family,
            "seed": seed,
            "error_type": type(exc).__name__,
            "message": str(exc),
            "traceback": traceback.format_exc(),
        }
        err = outp / f"{stem}_error.json"
        err.write_text(json.dumps(record, indent=2) + "\n")
        files = list(getattr(exc, "files", [])) + [err.name]
        return UnitResult(target.family, seed, "error", wall_time=time.time() - t0, files=files)


SUMMARY_HEADER = ["target", "seed", "status", "final_loss", "success", "reached_at", "inversions", "wall_time"]


def write_summary(cfg: RunConfig, results: list[UnitResult], out: Path) -> Path:
    import csv

    path = out / f"{cfg.name}_summary_{cfg.config_hash()}.csv"
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SUMMARY_HEADER)
        for r in sorted(results, key=lambda r: (r.target, r.seed)):
            wr.writerow(
                [r.target, r.seed, r.status, repr(r.final_loss), int(r.success), r.reached_at, "" if r.inversions is None else r.inversions, f"{r.wall_time:.2f}"]
            )
    return path


def run_config(cfg: RunConfig, out: str | os.PathLike | None = None, jobs: int = 1, seeds: list[int] | None = None) -> tuple[int, list[UnitResult]]:
    """Run every (target, seed) pair; returns (exit status, results).

    Exit status is 0 only if every unit finished without error. Per-seed
    artifacts are written as units finish; the summary after all have joined.
    """
    if seeds is not None:
        cfg = replace(cfg, seeds=list(seeds))
    cfg.validate()
    outp = Path(out) if out is not None else default_out_dir()
    outp.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "verify":
        from .verify import run_suites

        return run_suites(cfg.suites), []
    units = [(i, s) for i in range(len(cfg.targets)) for s in cfg.seeds]
    if jobs <= 1 or len(units) == 1:
        results = [run_unit(cfg, i, s, str(outp)) for i, s in units]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_unit, cfg, i, s, str(outp)) for i, s in units]
            results = [f.result() for f in futures]
    write_summary(cfg, results, outp)
    (outp / f"{cfg.name}_{cfg.config_hash()}.ini").write_text(cfg.text or "")
    status = 0 if all(r.status == "ok" for r in results) else 1
    return status, results
