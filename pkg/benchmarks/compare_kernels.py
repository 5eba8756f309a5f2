#!/usr/bin/env python3
"""Benchmark the compiled integration kernel against the pure-Python fallback.

Also cross-checks that both kernels produce the same trajectory before
timing anything.  Usage: python benchmarks/compare_kernels.py [--steps N]
"""

import argparse
import time

import numpy as np

from manifold_descent import (
    HAVE_COMPILED,
    IntegratorConfig,
    MethodSpec,
    PerturbationSpec,
    simulate,
    spd_quadratic,
    standing_start,
    unit_quadratic,
)

CASES = [
    ("proposed / unit quadratic (dim 1)", MethodSpec("proposed", alpha=1.0, beta=0.9),
     unit_quadratic(1), None),
    ("pni / diag(1,4) (dim 2)", MethodSpec("pni", alpha=1.0, beta=0.5),
     spd_quadratic(np.diag([1.0, 4.0])), None),
    ("proposed / unit, perturbed", MethodSpec("proposed", alpha=1.0, beta=0.9),
     unit_quadratic(1), PerturbationSpec(delta=1e-3, seed=7)),
]


def run_case(label, method, obj, pert, t_max, repeats):
    cfg = IntegratorConfig(h=1e-3, t_max=t_max, record_every=10)
    x0 = standing_start(np.ones(obj.dim))

    ref = simulate(method, obj, x0, cfg, pert, kernel="pure")
    if HAVE_COMPILED:
        fast = simulate(method, obj, x0, cfg, pert, kernel="compiled")
        assert np.array_equal(ref.x1, fast.x1) and np.array_equal(ref.x2, fast.x2), (
            f"kernel mismatch on {label}"
        )

    timings = {}
    for kernel in (["pure", "compiled"] if HAVE_COMPILED else ["pure"]):
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            simulate(method, obj, x0, cfg, pert, kernel=kernel)
            best = min(best, time.perf_counter() - t0)
        timings[kernel] = best

    steps = cfg.n_steps
    line = f"{label:38s} pure: {steps / timings['pure']:>12.0f} steps/s"
    if HAVE_COMPILED:
        speedup = timings["pure"] / timings["compiled"]
        line += f"   compiled: {steps / timings['compiled']:>12.0f} steps/s   x{speedup:.1f}"
    print(line)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-max", type=float, default=10.0, help="horizon per run (h = 1e-3)")
    parser.add_argument("--repeats", type=int, default=3, help="timing repeats (best-of)")
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled kernel not built; timing the pure loop only")
    for label, method, obj, pert in CASES:
        run_case(label, method, obj, pert, args.t_max, args.repeats)


if __name__ == "__main__":
    main()
