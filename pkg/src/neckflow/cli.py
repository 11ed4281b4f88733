"""Command line entry point: run, plot, validate, list-experiments."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import config
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _error(code, kind, message, **extra):
    payload = {"error": kind, "message": message, "exit_code": code, **extra}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def _workers(arg):
    if arg is not None:
        return arg
    env = os.environ.get("NECKFLOW_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NECKFLOW_WORKERS must be an integer, got {env!r}") from None
    return None


def cmd_run(args):
    from .runner import run
    cfg = config.load(args.config)
    if args.out is not None:
        cfg["output"] = args.out
    w = _workers(args.workers)
    if w is not None:
        cfg["workers"] = w
    if args.seed is not None:
        cfg["seed"] = args.seed
    full = config.validate(cfg)
    out = full.get("output") or os.path.join("out", full["experiment"])
    summary = run(full, out, full.get("workers", 1))
    print(json.dumps({"experiment": full["experiment"], "output": out,
                      "files": summary["files"]}, sort_keys=True))
    n_fail = summary.get("failures", 0)
    if n_fail:
        return _error(EXIT_NUMERICAL, "ExperimentFailure",
                      f"{n_fail} cell(s) failed; see summary.json", output=out)
    return EXIT_OK


def cmd_plot(args):
    from .runner import render
    with open(args.report, encoding="utf-8") as fh:
        try:
            summary = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"report is not valid JSON: {exc}") from None
    out = args.out or os.path.dirname(os.path.abspath(args.report))
    os.makedirs(out, exist_ok=True)
    names = render(summary, out, args.style)
    print(json.dumps({"output": out, "files": names}, sort_keys=True))
    return EXIT_OK


def cmd_validate(args):
    full = config.validate(config.load(args.config))
    print(json.dumps({"valid": True, "experiment": full["experiment"]}, sort_keys=True))
    return EXIT_OK


def cmd_list(args):
    for name in config.EXPERIMENTS:
        print(f"{name}\t{config.DESCRIPTIONS[name]}")
    return EXIT_OK


def parser():
    p = argparse.ArgumentParser(prog="neckflow", description="Geodesics through a collapsing neck.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="worker processes (default: NECKFLOW_WORKERS or 1)")
    r.add_argument("--seed", type=int, help="RNG seed for random seed placement")
    r.set_defaults(fn=cmd_run)
    pl = sub.add_parser("plot", help="render SVG figures from a summary.json")
    pl.add_argument("report")
    pl.add_argument("--style", choices=("color", "mono"), default="color")
    pl.add_argument("--out", help="directory for the SVG files (default: next to the report)")
    pl.set_defaults(fn=cmd_plot)
    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("config")
    v.set_defaults(fn=cmd_validate)
    ls = sub.add_parser("list-experiments", help="list experiment names")
    ls.set_defaults(fn=cmd_list)
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, type(exc).__name__, str(exc))
    except NumericalError as exc:
        return _error(EXIT_NUMERICAL, type(exc).__name__, str(exc))
    except OSError as exc:
        return _error(EXIT_IO, type(exc).__name__, str(exc),
                      path=getattr(exc, "filename", None))


if __name__ == "__main__":
    sys.exit(main())
