"""perco command line.

    perco run <config.json> [--workers N] [--check] [--out DIR]
    perco validate <config.json>

Exit codes: 0 success, 2 invalid config, 3 failed acceptance check (with
--check), 1 runtime error.  PERCO_CACHE overrides the sample cache directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .config import config_hash, resolve, validate

log = logging.getLogger("perco")

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_CHECK = 0, 1, 2, 3


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh), []
    except OSError as exc:
        return None, [f"<file>: {exc}"]
    except json.JSONDecodeError as exc:
        return None, [f"<json>: line {exc.lineno} column {exc.colno}: {exc.msg}"]


def cmd_validate(args) -> int:
    doc, errs = _load(args.config)
    diags = errs or [str(d) for d in validate(doc)]
    for d in diags:
        print(d)
    if diags:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiments import run_experiment
    from .report import TrialReport

    doc, errs = _load(args.config)
    diags = errs or [str(d) for d in validate(doc)]
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    cfg = resolve(doc, workers=args.workers, output=args.out)
    h = config_hash(cfg)
    out_dir = cfg.get("output") or os.path.join("perco-runs", f"{cfg['kind']}-{h[:12]}")
    cache = os.environ.get("PERCO_CACHE") or cfg.get("cache") or os.path.join(out_dir, "cache")
    log.info("kind=%s hash=%s workers=%d out=%s", cfg["kind"], h[:12], cfg["workers"], out_dir)
    t0 = time.perf_counter()
    try:
        outcome = run_experiment(cfg, cfg["workers"], cache)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rep = TrialReport(cfg, outcome, __version__)
    for p in rep.write(out_dir):
        log.info("wrote %s", p)
    log.info("done in %.1f s", time.perf_counter() - t0)
    if args.check and outcome.check is not None:
        print(f"check: {'PASS' if outcome.check else 'FAIL'}")
        if not outcome.check:
            return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perco", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--check", action="store_true", help="exit 3 if the acceptance check fails")
    r.add_argument("--out", default=None, help="output directory")
    r.set_defaults(fn=cmd_run)
    v = sub.add_parser("validate", help="list config diagnostics without sampling")
    v.add_argument("config")
    v.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("--workers must be positive", file=sys.stderr)
        return EXIT_INVALID
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
