"""``zbridge <scenario> [--config FILE] [--set key=value]... --out DIR [--seed U64]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import DEFAULTS, ConfigError, load_config, run_scenario


def _parser():
    p = argparse.ArgumentParser(prog="zbridge", description="Homotopy normalisation-constant experiments.")
    p.add_argument("scenario", help="one of: " + ", ".join(sorted(DEFAULTS)))
    p.add_argument("--config", help="key = value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--print-defaults", action="store_true", help="print the resolved config and exit")
    return p


def _fail(kind, exc, code):
    line = {"status": "error", "error": kind, "message": str(exc)}
    key = getattr(exc, "key", None)
    if key is not None:
        line["key"] = key
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.scenario, args.config, args.set, args.seed)
    except (ConfigError, OSError) as exc:
        return _fail("config", exc, 2)
    if args.print_defaults:
        sys.stdout.write(cfg.dump())
        return 0
    if not args.out:
        return _fail("config", ConfigError("--out is required", "out"), 2)
    try:
        res = run_scenario(cfg, args.out)
    except Exception as exc:  # noqa: BLE001 - reported as one machine-readable line
        return _fail(type(exc).__name__, exc, 1)
    print(json.dumps({"status": "ok", "scenario": res.scenario, "out": res.out_dir,
                      "csv": sorted(res.csv_files), "plots": sorted(res.plot_files)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
