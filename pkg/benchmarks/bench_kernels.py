"""Time the compiled program kernel against the numpy fallback.

    python benchmarks/bench_kernels.py --pop 50 --states 256 --samples 10
"""
import argparse
import json
import time

import numpy as np

from cmgp import kernels
from cmgp.program import draw_noise, random_genomes


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pop", type=int, default=50)
    ap.add_argument("--states", type=int, default=256)
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--genes", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print one JSON object instead of a table")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    genomes = random_genomes(rng, args.pop, args.genes)
    states = rng.uniform(0.0, 1.0, (args.states, 2))
    offsets, negate = draw_noise(rng, args.pop, args.states, args.samples, args.genes)

    backends = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])
    results = {}
    for name in backends:
        secs, (means, invalid) = best_of(
            lambda: kernels.run_population(genomes, states, offsets, negate, backend=name), args.repeats)
        results[name] = {"seconds": secs, "means": means, "invalid": invalid}

    report = {
        "executions": args.pop * args.states * args.samples,
        "numpy_ms": 1e3 * results["numpy"]["seconds"],
    }
    if "cython" in results:
        a, b = results["numpy"], results["cython"]
        ok = ~a["invalid"].astype(bool)
        report["cython_ms"] = 1e3 * b["seconds"]
        report["speedup"] = a["seconds"] / b["seconds"]
        report["max_abs_diff"] = float(np.nanmax(np.abs(a["means"][ok] - b["means"][ok]), initial=0.0))
        report["invalid_agree"] = bool(np.array_equal(a["invalid"], b["invalid"]))
    else:
        report["cython_ms"] = None
        print("compiled kernel not built; only the numpy fallback was timed")

    if args.json:
        print(json.dumps(report))
        return
    for key, value in report.items():
        print(f"{key:>14}: {value:.4g}" if isinstance(value, float) else f"{key:>14}: {value}")


if __name__ == "__main__":
    main()
