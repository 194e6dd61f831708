"""``adsbtrust-sim``: run a scenario file and write the event log and CSV."""

from __future__ import annotations

import argparse
import json
import sys

from .engine import load_scenario, run, save_scenario
from .scenarios import nominal_flights, spoof_scenario


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="adsbtrust-sim")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--horizon", type=float, default=300.0)
    r.add_argument("--log", required=True, help="NDJSON event log output")
    r.add_argument("--csv", help="record stream output")
    g = sub.add_parser("generate", help="write a generated scenario file")
    g.add_argument("--kind", choices=("nominal", "spoof"), default="nominal")
    g.add_argument("--flights", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    if args.cmd == "generate":
        scen = nominal_flights(args.flights, args.seed) if args.kind == "nominal" else spoof_scenario(args.flights, args.seed)
        save_scenario(scen, args.out)
        return 0
    result = run(load_scenario(args.scenario), args.seed, args.horizon)
    result.write_log(args.log)
    if args.csv:
        result.write_csv(args.csv)
    json.dump({"events": len(result.events), **result.counters.__dict__}, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
