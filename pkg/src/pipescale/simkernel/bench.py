"""Throughput benchmark comparing the kernel lanes on identical workloads."""

from __future__ import annotations

import time

import numpy as np

from . import available_lanes


def run_bench(runs: int = 20000, branching: int = 5, repeats_timing: int = 3) -> dict[str, float]:
    lanes = available_lanes()
    workloads = [
        ("rho=0.0 p=1.0", dict(n_prime=branching, pruning=False, pass_prob=1.0)),
        ("rho=0.6 p=0.75", dict(n_prime=2, pruning=True, pass_prob=0.75)),
        ("rho=0.8 p=1.0", dict(n_prime=1, pruning=True, pass_prob=1.0)),
    ]
    base = dict(
        master_seed=7, leg=0, start=0, count=runs, branching=branching,
        root_mean=50.0, root_spread=15.0, child_spread=12.0,
        eval_corr=0.9, judge_bias=0.0, judge_noise=0.0, n_traits=4, repeats=1,
    )
    results: dict[str, float] = {}
    print(f"kernel lanes: {', '.join(lanes)}   ({runs} runs per workload)")
    for label, overrides in workloads:
        reference = None
        for name, lane in lanes.items():
            args = {**base, **overrides}
            best = float("inf")
            for _ in range(repeats_timing):
                t0 = time.perf_counter()
                out = lane.simulate_batch(**args)
                best = min(best, time.perf_counter() - t0)
            if reference is None:
                reference = out
            else:
                assert np.array_equal(reference[0], out[0]), "lanes disagree on call counts"
                assert np.array_equal(reference[5], out[5]), "lanes disagree on scores"
            rate = runs / best
            results[f"{label}/{name}"] = rate
            print(f"  {label:<16} {name:<9} {best * 1e3:8.1f} ms  {rate / 1e3:9.1f} kruns/s")
    return results


if __name__ == "__main__":
    run_bench()
