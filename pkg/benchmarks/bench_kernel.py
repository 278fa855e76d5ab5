"""Compare the compiled and pure-Python simulation kernels.

    python3 benchmarks/bench_kernel.py --steps 200000 --repeat 3

Both backends consume the same uniform stream, so besides timing each one the
script checks that they grow byte-identical graphs from the same seed.
"""
import argparse
import hashlib
import statistics
import sys
import time

from dmpa.model import ModelParams
from dmpa.simulator import available_backends, graph_to_text, simulate

PRESETS = {
    # symmetric homophily, moderate rejection
    "case_i": ModelParams.shared(0.35, 0.25, 0.25, 0.5, 0.5, 2.0),
    # strong homophily: cross-colour links almost always rejected
    "homophilous": ModelParams.shared(0.2, 0.2, 0.3, 0.95, 0.95, 1.0),
    # densification only: event 3 draws two endpoints per attempt
    "dense": ModelParams.shared(0.4, 0.05, 0.05, 0.3, 0.7, 4.0),
}


def time_backend(params, steps, seed, backend, repeat):
    times, digest = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        graph, _, sim = simulate(params, steps, seed=seed, schedule=[], backend=backend)
        times.append(time.perf_counter() - t0)
        digest = hashlib.sha256(graph_to_text(graph).encode()).hexdigest()
    return min(times), statistics.median(times), sim.rejections, digest


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--python-steps", type=int, default=None,
                    help="steps for the pure-Python backend (default: same as --steps)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--preset", choices=sorted(PRESETS), action="append")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available", file=sys.stderr)
    mismatch = False
    print(f"{'preset':<12} {'backend':<8} {'steps':>9} {'best s':>9} {'median s':>9} "
          f"{'steps/s':>12} {'rejections':>11}")
    for name in args.preset or sorted(PRESETS):
        digests = {}
        for backend in backends:
            steps = args.python_steps if backend == "python" and args.python_steps else args.steps
            best, med, rej, digest = time_backend(PRESETS[name], steps, args.seed, backend, args.repeat)
            digests[backend] = (steps, digest)
            print(f"{name:<12} {backend:<8} {steps:>9} {best:>9.3f} {med:>9.3f} "
                  f"{steps / best:>12,.0f} {rej:>11}")
        same_steps = {s for s, _ in digests.values()}
        if len(same_steps) == 1 and len({d for _, d in digests.values()}) > 1:
            print(f"{name}: backends disagree on the grown graph", file=sys.stderr)
            mismatch = True
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())
