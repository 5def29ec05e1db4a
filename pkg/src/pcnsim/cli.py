"""pcnsim command line: run scenarios, list them, pretty-print written reports."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from .errors import ConfigError, SimError
from .report import format_table, load_tables
from .scenarios import SCENARIOS, ScenarioConfig, run_scenario

OUT_ENV = "PCNSIM_OUT"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcnsim", description="Payment-channel botnet simulator")
    sub = p.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a named scenario and write its report")
    run.add_argument("scenario")
    run.add_argument("--config", help="JSON config file (unknown keys are rejected)")
    run.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<scenario>)")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sub.add_parser("list-scenarios", help="list registered scenarios")
    rep = sub.add_parser("report", help="pretty-print the tables in an output directory")
    rep.add_argument("dir")
    return p


def _cmd_run(args) -> int:
    if args.config is not None and not os.path.isfile(args.config):
        print(f"pcnsim: error: config file {args.config} not found", file=sys.stderr)
        return 2
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("pcnsim: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        cfg.seed = args.seed
    out = args.out or os.path.join(os.environ.get(OUT_ENV, "pcnsim-out"), args.scenario)
    report = run_scenario(args.scenario, cfg)
    paths = report.write(out, figures=not args.no_figures)
    for name, table in report.tables.items():
        print(format_table(name, table))
        print()
    print(f"wrote {len(paths)} files to {out}")
    return 0


def _cmd_report(args) -> int:
    if not os.path.isdir(args.dir):
        print(f"pcnsim: error: {args.dir} is not a directory", file=sys.stderr)
        return 2
    tables = load_tables(args.dir)
    if not tables:
        print(f"empty report: no CSV tables in {args.dir}")
        return 0
    summary = os.path.join(args.dir, "summary.json")
    if os.path.exists(summary):
        with open(summary) as fh:
            meta = json.load(fh)
        print(f"scenario {meta.get('scenario')}  seed {meta.get('seed')}  "
              f"config {str(meta.get('config_digest'))[:12]}")
        print()
    for name, table in tables.items():
        print(format_table(name, table))
        print()
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "list-scenarios":
            for name, (_, desc) in SCENARIOS.items():
                print(f"{name:<12} {desc}")
            return 0
        if args.cmd == "report":
            return _cmd_report(args)
        return _cmd_run(args)
    except ConfigError as exc:
        print(f"pcnsim: config error: {exc}", file=sys.stderr)
        return 2
    except SimError as exc:
        print(f"pcnsim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
