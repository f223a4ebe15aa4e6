#!/usr/bin/env python3
"""Run every experiment as its own `afde verify` subprocess and tabulate verdicts.

    python scripts/run_all.py --out out/all --jobs 2
"""

import argparse
import json
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from afde.verify import EXPERIMENTS


def run_one(name, out, fmt):
    t0 = time.perf_counter()
    cmd = [sys.executable, "-m", "afde.cli", "verify", name, "--out", str(out / name)]
    for f in fmt:
        cmd += ["--format", f]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    return name, proc.returncode, time.perf_counter() - t0, proc.stderr.strip()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/all"))
    ap.add_argument("--jobs", type=int, default=1, help="experiments run concurrently")
    ap.add_argument("--only", nargs="+", choices=sorted(EXPERIMENTS))
    ap.add_argument("--format", action="append", default=[], choices=("csv", "svg"))
    args = ap.parse_args()

    names = args.only or sorted(EXPERIMENTS)
    with ThreadPoolExecutor(args.jobs) as pool:
        results = list(pool.map(lambda n: run_one(n, args.out, args.format), names))

    failed = 0
    for name, code, secs, err in results:
        status = {0: "PASS", 3: "FAIL"}.get(code, f"ERROR({code})")
        print(f"{status:<10} {name:<18} {secs:7.1f}s")
        for js in sorted((args.out / name).glob("*.json")):
            d = json.loads(js.read_text())
            for key, v in d["verdicts"].items():
                if not v["passed"]:
                    print(f"{'':10} - {key}: measured {v['measured']} threshold {v['threshold']}")
        if code not in (0, 3) and err:
            print(f"{'':10} {err.splitlines()[-1]}")
        failed += code != 0
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
