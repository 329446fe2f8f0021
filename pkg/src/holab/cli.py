"""Command-line entry point: ``holab list`` and ``holab run``.

Exit status: 0 all expectations met, 2 an expectation failed, 1 a runtime
error, 64 a usage or config-schema error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_structured
from .errors import ConfigError, HolabError

EXIT_OK, EXIT_ERROR, EXIT_EXPECTATION, EXIT_USAGE = 0, 1, 2, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"holab: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="holab", description="Geometric phase scenarios.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ls = sub.add_parser("list", help="list scenarios with their key schemas")
    ls.add_argument("--json", action="store_true", help="print the full catalog as JSON")
    rn = sub.add_parser("run", help="run a scenario from a config file")
    rn.add_argument("--config", required=True, help="TOML (or JSON) scenario config")
    rn.add_argument("--out", help="output directory (overrides output.directory)")
    rn.add_argument("--format", help="comma-separated subset of json,csv")
    rn.add_argument("--seed", type=int, help="seed (overrides the config)")
    return ap


def _cmd_list(args) -> int:
    from .scenarios import list_scenarios

    cat = list_scenarios()
    if args.json:
        print(json.dumps(cat, sort_keys=True, indent=2))
        return EXIT_OK
    width = max(len(c["name"]) for c in cat)
    for c in cat:
        keys = ", ".join(c["schema"]["parameters"])
        print(f"{c['name']:<{width}}  {c['summary']}  [anchor: {c['anchor']}]")
        print(f"{'':<{width}}  keys: {keys or '-'}")
    return EXIT_OK


def _cmd_run(args) -> int:
    from .scenarios import _formats, emit, run, validate_config

    try:
        doc = load_structured(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            doc = dict(doc, seed=args.seed)
        cfg = validate_config(doc)
        if args.format:
            cfg.formats = _formats(args.format)
    except ConfigError as exc:
        print(f"holab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out or cfg.out_dir or str(Path("holab-out") / cfg.scenario)
    try:
        res = run(cfg)
        emit(res, out_dir, cfg.formats)
    except ConfigError as exc:
        print(f"holab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HolabError as exc:
        print(f"holab: {cfg.scenario}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for e in res.report["expectations"]:
        print(f"{'PASS' if e['pass'] else 'FAIL'} {cfg.scenario}.{e['name']}: value={e['value']!r} "
              f"expected={e['expected']!r} tol={e['tolerance']!r}")
    print(f"{cfg.scenario}: {'pass' if res.passed else 'FAIL'} -> {out_dir}")
    return EXIT_OK if res.passed else EXIT_EXPECTATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return _cmd_list(args)
        return _cmd_run(args)
    except HolabError as exc:
        print(f"holab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
