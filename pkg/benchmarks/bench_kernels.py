"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--out FILE.csv]
"""

from __future__ import annotations

import argparse
import csv
import random
import sys
import timeit

from adsbtrust import kernels



def workloads(rng: random.Random):
    pts = [(rng.uniform(-80, 80), rng.uniform(-180, 180), rng.uniform(-80, 80), rng.uniform(-180, 180)) for _ in range(1000)]
    frames = [bytes(rng.getrandbits(8) for _ in range(14)) for _ in range(1000)]
    return {
        "crc24": lambda k: [k.crc24(f) for f in frames],
        "haversine_m": lambda k: [k.haversine_m(*p) for p in pts],
        "destination": lambda k: [k.destination(p[0], p[1], p[3] % 360, 1e5) for p in pts],
        "cpr_encode": lambda k: [k.cpr_encode(p[0], p[1], 1) for p in pts],
        "cpr_decode_global": lambda k: [k.cpr_decode_global(93000, 51372, 74158, 50194, 1) for _ in pts],
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rows = []
    for name, fn in workloads(random.Random(0)).items():
        py = min(timeit.repeat(lambda: fn(kernels.python_backend), number=1, repeat=args.repeat))
        cy = min(timeit.repeat(lambda: fn(kernels.compiled_backend), number=1, repeat=args.repeat))
        rows.append({"kernel": name, "python_us_per_call": py * 1e3, "cython_us_per_call": cy * 1e3, "speedup": py / cy})
    print(f"{'kernel':<20}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<20}{r['python_us_per_call']:>12.3f}{r['cython_us_per_call']:>12.3f}{r['speedup']:>10.1f}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
