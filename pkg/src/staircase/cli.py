"""Command-line entry point.

    staircase run --preset fig2-staircase --seed 0-3 --jobs 2 --out runs/
    staircase run --config my.ini
    staircase verify gradcheck fourier
    staircase presets list

Exit status: 0 on success, 1 if any run or check failed, 2 on usage or
configuration errors. The default output directory is $STAIRCASE_OUT,
falling back to ./runs.
"""
from __future__ import annotations

import argparse
import sys

from . import _kernels
from .experiment import OUT_ENV, ConfigError, default_out_dir, load_config, load_preset, parse_seeds, preset_names, preset_summary, preset_text, run_config
from .verify import ALL, SUITES, run_suites


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="staircase", description="Staircase-function learning experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configuration over its seeds")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to an INI run configuration")
    src.add_argument("--preset", help="name of a shipped preset (see 'presets list')")
    run.add_argument("--seed", help='override the seeds: "3", "0-9" or "0,2,5"')
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    ver = sub.add_parser("verify", help="run property suites")
    ver.add_argument("suites", nargs="*", default=["all"], help=f"suite names or 'all' (default); one of: {', '.join(SUITES)}")
    ver.add_argument("--config", help="an INI file with [run] kind = verify and a suites list")
    ver.add_argument("--preset", help="a verify preset")

    pre = sub.add_parser("presets", help="inspect shipped presets")
    psub = pre.add_subparsers(dest="action", required=True)
    psub.add_parser("list", help="list preset names")
    show = psub.add_parser("show", help="print a preset file")
    show.add_argument("name")
    return ap


def _cmd_run(args, ap) -> int:
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    seeds = parse_seeds(args.seed) if args.seed is not None else None
    if seeds is not None and not seeds:
        raise ConfigError("seeds list is empty")
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    out = args.out if args.out is not None else default_out_dir()
    print(f"kernels: {_kernels.BACKEND}; writing to {out}")
    status, results = run_config(cfg, out=out, jobs=args.jobs, seeds=seeds)
    for r in results:
        print(f"{r.status:5s} {r.target} seed {r.seed}: final loss {r.final_loss:.4g}, success {int(r.success)}, {r.wall_time:.1f} s")
    return status


def _cmd_verify(args, ap) -> int:
    names = list(args.suites)
    if args.config or args.preset:
        cfg = load_config(args.config) if args.config else load_preset(args.preset)
        if cfg.kind != "verify":
            raise ConfigError(f"{cfg.name} is a {cfg.kind} configuration, not a verify one")
        names = cfg.suites
    unknown = [n for n in names if n != "all" and n not in SUITES]
    if unknown:
        ap.error(f"unknown suite(s) {', '.join(unknown)}; choose from all, {', '.join(SUITES)}")
    print(f"kernels: {_kernels.BACKEND}; 'all' = {', '.join(ALL)}")
    return run_suites(names)


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, ap)
        if args.command == "verify":
            return _cmd_verify(args, ap)
        if args.action == "list":
            for name in preset_names():
                print(f"{name:22s} {preset_summary(name)}")
            return 0
        print(preset_text(args.name), end="")
        return 0
    except ConfigError as exc:
        print(f"staircase: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
