"""Time the compiled and pure-Python slot kernels on the same workloads.

    python3 benchmarks/bench_simulator.py [--slots N] [--repeat R]

Both kernels consume the same random stream, so each pair of runs is also
checked for identical counts.
"""

from __future__ import annotations

import argparse
import time

from crcsma.chain import MacParams, SpectrumParams
from crcsma.simulator import BACKEND, SimConfig, simulate

WORKLOADS = {
    "n=2 C=1": (MacParams(n=2, m=3, w=32), SpectrumParams(1, 0.5, 0.9, 0.0161)),
    "n=10 C=1": (MacParams(n=10, m=3, w=32), SpectrumParams(1, 0.5, 0.9, 0.0161)),
    "n=10 C=6": (MacParams(n=10, m=3, w=32), SpectrumParams(6, 0.5, 0.5, 0.0004)),
}


def best_of(config, backend, repeat):
    best, stats = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        stats = simulate(config, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, stats


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--slots", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = ["python"] + (["cython"] if BACKEND == "cython" else [])
    print(f"slots per run: {args.slots}, best of {args.repeat}")
    print(f"{'workload':<10} {'backend':<8} {'seconds':>9} {'slots/s':>12} {'speed-up':>9}")
    for name, (mac, spectrum) in WORKLOADS.items():
        config = SimConfig(mac, spectrum, slots=args.slots, seed=1)
        timings = {b: best_of(config, b, args.repeat) for b in backends}
        base = timings["python"][0]
        for backend, (seconds, _) in timings.items():
            print(f"{name:<10} {backend:<8} {seconds:9.4f} {args.slots / seconds:12.0f} "
                  f"{base / seconds:8.1f}x")
        if len(timings) == 2 and timings["python"][1] != timings["cython"][1]:
            raise SystemExit(f"{name}: kernels disagree")
    if BACKEND != "cython":
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
