"""Command line: ``run <config>``, ``verify <suite>``, ``list-algorithms``."""
from __future__ import annotations

import argparse
import json
import sys

from .env import DomainError
from .harness import SUITES, ExperimentConfig, run_experiment, verify, write_report
from .prophet import binding_kinds, prophet_for


def _run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    rep = run_experiment(cfg, workers=args.workers)
    out = args.output or cfg.output
    if out:
        write_report(rep, out)
    body = rep.body()
    body.pop("records")
    print(json.dumps(body, sort_keys=True, indent=1))
    return 0


def _verify(args) -> int:
    ok = True
    for res in verify(args.suite):
        ok &= res.passed
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}  {res.detail}".rstrip())
    return 0 if ok else 1


def _list(args) -> int:
    for kind in binding_kinds():
        b = prophet_for(kind)
        print(f"{kind:20s} {b.name:22s} ratio {b.ratio_label}")
    return 0


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="limprophet")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config (JSON)")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="report path; .csv for per-trial rows, else JSON")
    r.add_argument("--workers", type=int, default=None, help="overrides LIMPROPHET_WORKERS")
    r.set_defaults(fn=_run)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.set_defaults(fn=_verify)
    sub.add_parser("list-algorithms").set_defaults(fn=_list)
    args = p.parse_args(argv)
    try:
        return args.fn(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
