"""``bench`` command line: latency, throughput and end-to-end experiments.

Settings resolve as built-in defaults, then a ``--config`` JSON file, then
flags given explicitly on the command line. The exit code is 0 only when
every property checked by the experiment holds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from typing import Optional

from ..sim import load_scenario
from .experiments import (
    BenchError,
    ExperimentConfig,
    emit_report,
    run_latency,
    run_latency_suite,
    run_scenario_e2e,
    run_throughput,
)

DEFAULTS = {
    "latency": {
        "arch": "mono",
        "ac": "off",
        "requests": 1000,
        "warmup": 50,
        "link_delay_ms": 0.0,
        "seed": 0,
        "frames": 2000,
    },
    "compare": {"requests": 1000, "warmup": 50, "link_delay_ms": 5.0, "seed": 0, "frames": 2000},
    "throughput": {"seed": 0, "batches": 15, "batch_size": 100},
    "e2e": {"seed": 0, "horizon": None},
}


@dataclass(frozen=True)
class E2ERow:
    icao: str
    role: str
    detected: bool
    latency_s: Optional[float]
    score: Optional[float]
    alerts: int


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    S = argparse.SUPPRESS

    lat = sub.add_parser("latency", help="request latency through the gateway", argument_default=S)
    lat.add_argument("--arch", choices=("micro", "mono"))
    lat.add_argument("--ac", choices=("off", "blendcac"))
    lat.add_argument("--requests", type=int, help="total requests, warmup included")
    lat.add_argument("--warmup", type=int)
    lat.add_argument("--link-delay-ms", type=float)
    lat.add_argument("--seed", type=int)
    lat.add_argument("--frames", type=int, help="frames decoded by the service per request")
    lat.add_argument("--out", required=True)
    lat.add_argument("--config")

    cmp_ = sub.add_parser("compare", help="interleaved micro/mono x off/blendcac comparison", argument_default=S)
    cmp_.add_argument("--requests", type=int)
    cmp_.add_argument("--warmup", type=int)
    cmp_.add_argument("--link-delay-ms", type=float)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--frames", type=int)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--config")

    thr = sub.add_parser("throughput", help="batched decode-to-fusion pipeline", argument_default=S)
    thr.add_argument("--scenario", required=True)
    thr.add_argument("--seed", type=int)
    thr.add_argument("--batches", type=int)
    thr.add_argument("--batch-size", type=int)
    thr.add_argument("--out", required=True)
    thr.add_argument("--config")

    e2e = sub.add_parser("e2e", help="attack detection verdicts for a scenario", argument_default=S)
    e2e.add_argument("--scenario", required=True)
    e2e.add_argument("--seed", type=int)
    e2e.add_argument("--horizon", type=float)
    e2e.add_argument("--out", required=True)
    e2e.add_argument("--config")
    return ap


def resolve(cmd: str, args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS[cmd])
    given = {k: v for k, v in vars(args).items() if k not in ("cmd", "verbose")}
    if given.get("config"):
        with open(given["config"], encoding="utf-8") as fh:
            file_settings = json.load(fh)
        unknown = set(file_settings) - set(settings) - {"scenario", "out"}
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_settings)
    settings.update({k: v for k, v in given.items() if k != "config"})
    return settings


def _latency_config(s: dict, arch: str, ac: str, delay: float) -> ExperimentConfig:
    return ExperimentConfig(
        arch=arch,
        ac=ac,
        n_requests=s["requests"],
        link_delay_ms=delay,
        seed=s["seed"],
        warmup_requests=s["warmup"],
        frames_per_request=s["frames"],
    )


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def cmd_latency(s: dict) -> bool:
    result = run_latency(_latency_config(s, s["arch"], s["ac"], s["link_delay_ms"]))
    emit_report(result.samples, s["out"])
    checks = result.check()
    _emit({"summary": result.summary(), "checks": checks})
    return all(checks.values())


def compare_checks(results: dict, delay_results: dict, delay_ms: float) -> dict:
    mean = {k: r.summary()["mean"] for k, r in results.items()}
    checks = {
        "off_micro_close_to_mono": abs(mean["micro", "off"] - mean["mono", "off"]) <= 0.10 * mean["mono", "off"],
        "blendcac_slower_mono": mean["mono", "blendcac"] > mean["mono", "off"],
        "blendcac_slower_micro": mean["micro", "blendcac"] > mean["micro", "off"],
    }
    if delay_results:
        d = {k: r.summary()["mean"] for k, r in delay_results.items()}
        checks["hop_delay_additive"] = d["micro"] >= d["mono"] + 2 * delay_ms
    for r in list(results.values()) + list(delay_results.values()):
        checks[f"per_run_{r.config.arch}_{r.config.ac}_{r.config.link_delay_ms:g}ms"] = all(r.check().values())
    return checks


def cmd_compare(s: dict) -> bool:
    keys = [(a, c) for a in ("mono", "micro") for c in ("off", "blendcac")]
    runs = run_latency_suite([_latency_config(s, a, c, 0.0) for a, c in keys])
    results = dict(zip(keys, runs))
    delay_results = {}
    if s["link_delay_ms"] > 0:
        delayed = run_latency_suite([_latency_config(s, a, "blendcac", s["link_delay_ms"]) for a in ("mono", "micro")])
        delay_results = {"mono": delayed[0], "micro": delayed[1]}
    samples = []
    for r in list(results.values()) + list(delay_results.values()):
        samples.append(
            {"arch": r.config.arch, "ac": r.config.ac, "link_delay_ms": r.config.link_delay_ms, **r.summary()}
        )
    with open(s["out"], "w", encoding="utf-8") as fh:
        json.dump(samples, fh, indent=2, sort_keys=True)
    checks = compare_checks(results, delay_results, s["link_delay_ms"])
    _emit({"runs": samples, "checks": checks})
    return all(checks.values())


def cmd_throughput(s: dict) -> bool:
    result = run_throughput(load_scenario(s["scenario"]), s["seed"], s["batches"], s["batch_size"])
    emit_report(result.samples, s["out"])
    checks = result.check()
    _emit({"batches": len(result.samples), "processed": sum(x.processed for x in result.samples), "checks": checks})
    return all(checks.values())


def cmd_e2e(s: dict) -> bool:
    result = run_scenario_e2e(load_scenario(s["scenario"]), s["seed"], s["horizon"])
    rows = [E2ERow(a.icao, f"attack:{a.kind}", a.detected, a.latency_s, a.score, int(a.detected)) for a in result.attacks]
    rows += [E2ERow(icao, "normal", n > 0, None, None, n) for icao, n in sorted(result.normal_alerts.items())]
    emit_report(rows, s["out"])
    checks = result.check()
    _emit({"attacks": [a.__dict__ for a in result.attacks], "normal_alerts": sum(result.normal_alerts.values()), "checks": checks})
    return all(checks.values())


COMMANDS = {"latency": cmd_latency, "compare": cmd_compare, "throughput": cmd_throughput, "e2e": cmd_e2e}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    settings = resolve(args.cmd, args)
    try:
        ok = COMMANDS[args.cmd](settings)
    except (BenchError, ValueError, OSError) as exc:
        print(f"bench {args.cmd}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
