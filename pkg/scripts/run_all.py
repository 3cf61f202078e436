"""Run every shipped experiment config in turn.

Usage: python3 scripts/run_all.py [--only NAME ...] [--out DIR] [--threads N]
"""
import argparse
import sys
import time
from pathlib import Path

from vqnegf.cli import EXPERIMENTS, main

ROOT = Path(__file__).resolve().parents[1]


def run(names, out, threads):
    status = 0
    for name in names:
        t = time.perf_counter()
        code = main([name, "--config", str(ROOT / "configs" / f"{name}.json"), "--out", str(Path(out) / name),
                     "--threads", str(threads)])
        print(f"[{name}] exit {code} in {time.perf_counter() - t:.1f}s", flush=True)
        status = status or code
    return status


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", nargs="+", choices=EXPERIMENTS, default=list(EXPERIMENTS))
    p.add_argument("--out", default=str(ROOT / "out"))
    p.add_argument("--threads", type=int, default=1)
    a = p.parse_args()
    sys.exit(run(a.only, a.out, a.threads))
