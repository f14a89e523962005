"""Command line front end.

::

    netkin run <config> [--out DIR] [--seed N] [--replicas K]
    netkin scenario <builtin-name> [--out DIR] [--seed N]
    netkin check <config>

The output directory is taken from ``--out``, then ``$NETKIN_OUT``, then the
config's ``output`` key, then ``netkin-out/<name>``.  Exit status is 0 on
success, 1 when an invariant check fails and 2 for invalid input.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .errors import ConfigError, NetkinError
from .runner import BUILTINS, builtin_config, load_config, resolve_config, run_scenario

log = logging.getLogger("netkin")


def _outdir(args, cfg: dict, name: str) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get("NETKIN_OUT"):
        return Path(os.environ["NETKIN_OUT"])
    if cfg.get("output"):
        return Path(cfg["output"])
    return Path("netkin-out") / name


def _run_one(cfg, outdir, seed):
    res = run_scenario(cfg, outdir, seed)
    return str(res.outdir), res.ok, [c["name"] for c in res.checks if not c["passed"]]


def _execute(cfg: dict, outdir: Path, seed, replicas: int) -> int:
    base = seed if seed is not None else cfg.get("seed", 0)
    if replicas <= 1:
        jobs = [(outdir, seed)]
    else:
        jobs = [(outdir / f"replica_{k}", base + k) for k in range(replicas)]
    if len(jobs) == 1:
        results = [_run_one(cfg, *jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=min(replicas, os.cpu_count() or 1)) as pool:
            futures = [pool.submit(_run_one, cfg, d, s) for d, s in jobs]
            results = [f.result() for f in futures]
    status = 0
    for path, ok, failed in results:
        print(f"{'ok' if ok else 'FAILED'}: {path}")
        for name in failed:
            print(f"  invariant failed: {name}", file=sys.stderr)
        status = status or (0 if ok else 1)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netkin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"netkin {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file (TOML, or a JSON run manifest)")
    run.add_argument("config")
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--replicas", type=int, default=1)

    scen = sub.add_parser("scenario", help="run a builtin scenario")
    scen.add_argument("name", choices=BUILTINS)
    scen.add_argument("--out")
    scen.add_argument("--seed", type=int)
    scen.add_argument("--replicas", type=int, default=1)

    check = sub.add_parser("check", help="validate a scenario file without running it")
    check.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "scenario":
            cfg = builtin_config(args.name)
            name = args.name
        else:
            cfg = load_config(args.config)
            name = Path(args.config).stem
        resolved = resolve_config(cfg)
        if args.command == "check":
            print(f"{args.config}: valid {resolved['model']} scenario")
            return 0
        if args.replicas < 1:
            raise ConfigError(["--replicas must be at least 1"])
        return _execute(cfg, _outdir(args, resolved, name), args.seed, args.replicas)
    except ConfigError as exc:
        print(f"netkin: {exc}", file=sys.stderr)
        return 2
    except NetkinError as exc:
        print(f"netkin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
