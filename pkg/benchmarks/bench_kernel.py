"""Compiled kernel vs reference engine on the same generated scenarios.

    python3 benchmarks/bench_kernel.py [--scenarios 20] [--cores 4]

Reports best-of-N wall time per run for each backend and policy, and checks
that both backends produce identical results.
"""
import argparse
import time

from slotshift import sim
from slotshift.runtime import Policy
from slotshift.workload import AperiodicSpec, GenSpec, generate_taskset


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenarios", type=int, default=20)
    ap.add_argument("--cores", type=int, default=4)
    ap.add_argument("--utilization", type=float, default=0.5, help="per-core periodic load")
    ap.add_argument("--new", type=float, default=0.2, help="per-core new-job load")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not sim.HAVE_KERNEL:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    scenarios = [generate_taskset(GenSpec(args.utilization * args.cores, args.cores, seed=args.seed + k,
                                          aperiodic=AperiodicSpec(args.new * args.cores)))
                 for k in range(args.scenarios)]
    slots = sum(sc.horizon * sc.cores for sc in scenarios)
    print(f"{len(scenarios)} scenarios, {slots} core-slots, best of {args.repeat}")
    print(f"{'policy':<10} {'python s':>10} {'kernel s':>10} {'speedup':>8}  same")
    for policy in Policy:
        def run(backend):
            return [sim.simulate(sc, None, policy, backend=backend) for sc in scenarios]
        tp, a = best_of(lambda: run("python"), args.repeat)
        tk, b = best_of(lambda: run("kernel"), args.repeat)
        same = all(x.total_energy_j == y.total_energy_j and x.deadline_misses == y.deadline_misses
                   and x.admissions == y.admissions for x, y in zip(a, b))
        print(f"{policy.value:<10} {tp:>10.3f} {tk:>10.4f} {tp / tk:>7.0f}x  {same}")


if __name__ == "__main__":
    main()
