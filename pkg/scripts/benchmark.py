#!/usr/bin/env python3
"""
Basic timing script.

Times the main services (QSD tables, oracle quadrature, Monte Carlo blocks)
on the reference configuration a=1, eta=0.5.
"""

import argparse
import statistics
import time
from typing import Callable, List

import numpy as np

from ouqsd.schemas.config import SimConfig
from ouqsd.schemas.params import OUParams, ParetoDensity
from ouqsd.services.eigen import build_qsd
from ouqsd.services.oracle import conditional_density_oracle, survival_curve_oracle
from ouqsd.services.simulate import simulate_ensemble


class Benchmark:
    def __init__(self, repeats: int = 5):
        self.repeats = repeats
        self.results: List[dict] = []

    def measure(self, name: str, call: Callable[[], object]) -> dict:
        """Run one callable `repeats` times and record wall-clock statistics."""
        print(f"\nTiming {name}...")
        durations = []
        error = None
        for _ in range(self.repeats):
            start = time.perf_counter()
            try:
                call()
            except Exception as e:
                error = str(e)
                break
            durations.append((time.perf_counter() - start) * 1000)

        stats = {"name": name, "runs": len(durations), "error": error}
        if durations:
            stats.update(
                {
                    "mean_ms": statistics.mean(durations),
                    "median_ms": statistics.median(durations),
                    "p95_ms": float(np.percentile(durations, 95)),
                    "min_ms": min(durations),
                }
            )
            print(f"  mean {stats['mean_ms']:.1f}ms, p95 {stats['p95_ms']:.1f}ms")
        self.results.append(stats)
        return stats

    def print_summary(self):
        print("\n" + "=" * 60)
        print("TIMING SUMMARY")
        print("=" * 60)
        for result in self.results:
            if result["error"]:
                print(f"\nFAILED {result['name']}: {result['error']}")
            else:
                print(f"\n{result['name']}")
                print(f"   Median: {result['median_ms']:.1f}ms over {result['runs']} runs")
                print(f"   Fastest: {result['min_ms']:.1f}ms")


def main():
    parser = argparse.ArgumentParser(description="Time the ouqsd services")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--n-paths", type=int, default=200_000)
    args = parser.parse_args()

    params = OUParams(a=1.0)
    pareto = ParetoDensity(eta=0.5)
    times = [2.0, 4.0, 6.0, 8.0]
    y = np.linspace(0.05, 4.0, 80)
    config = SimConfig(params=params, init=pareto, checkpoints=times, n_paths=args.n_paths)

    bench = Benchmark(repeats=args.repeats)
    bench.measure("build_qsd(lambda=0.5)", lambda: build_qsd(params, 0.5))
    bench.measure("build_qsd(lambda=1.0)", lambda: build_qsd(params, 1.0))
    bench.measure("survival_curve_oracle", lambda: survival_curve_oracle(params, pareto, times))
    bench.measure(
        "conditional_density_oracle(t=4)",
        lambda: conditional_density_oracle(params, pareto, 4.0, y),
    )
    bench.measure(f"simulate_ensemble(n={args.n_paths})", lambda: simulate_ensemble(config))
    bench.print_summary()


if __name__ == "__main__":
    main()
