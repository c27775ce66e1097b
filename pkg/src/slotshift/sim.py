"""Backend selection: compiled kernel when importable, reference engine otherwise."""
from __future__ import annotations

import os
import time

from .energy import EnergyLedger, Platform
from .runtime import DeadlineMiss, Engine, Policy, SimResult, admission_requests, summarize
from .table import build_table, expand_jobs

try:
    from ._kernel import simulate_arrays as _simulate_arrays
except ImportError:  # extension not built
    _simulate_arrays = None

HAVE_KERNEL = _simulate_arrays is not None
_POLICY_CODE = {Policy.BSS: 0, Policy.DPM: 1, Policy.DVFS: 2}


def default_backend() -> str:
    forced = os.environ.get("SLOTSHIFT_BACKEND", "").lower()
    if forced in ("python", "kernel"):
        return forced
    return "kernel" if HAVE_KERNEL else "python"


def _kernel_inputs(scenario):
    core_ivs, core_jobs = [], []
    for c in range(scenario.cores):
        tasks = [t for t in scenario.tasks if t.core == c]
        table = build_table(expand_jobs(tasks, scenario.horizon), scenario.horizon, core=c)
        core_ivs.append([(iv.start, iv.end, iv.sc, iv.pending) for iv in table.intervals])
        jobs = sorted(table.jobs.values(), key=lambda j: (j.release, j.deadline, j.task, j.index))
        core_jobs.append([(j.release, j.deadline, j.wcet, j.task, j.index) for j in jobs])
    reqs = [(r.arrival, r.wcet, r.deadline, -1 if r.preferred_core is None else r.preferred_core, r.task)
            for r in admission_requests(scenario)]
    return core_ivs, core_jobs, reqs


def _run_kernel(scenario, platform: Platform, policy: Policy, strict: bool) -> SimResult:
    t0 = time.perf_counter()
    core_ivs, core_jobs, reqs = _kernel_inputs(scenario)
    states = platform.sleep_states
    out = _simulate_arrays(
        scenario.horizon, _POLICY_CODE[policy], core_ivs, core_jobs, reqs,
        list(platform.ladder.units), list(platform.ladder.levels),
        [s.break_even_s(platform.p_idle_w) for s in states],
        [s.latency_slots for s in states], [s.residency_slots for s in states],
        platform.slot_s, platform.best_effort, strict,
        policy is Policy.DVFS and platform.idle_at_fmin,
    )
    if out["aborted"]:
        task, index = out["misses"][0]
        raise DeadlineMiss(f"job {(task, index)} missed its deadline")
    ledgers = []
    for c in range(scenario.cores):
        led = EnergyLedger(len(platform.ladder.levels), len(states))
        led.run = list(out["run"][c])
        led.sleep = list(out["sleep"][c])
        led.transitions = list(out["transitions"][c])
        led.idle = out["idle"][c]
        led.idle_low = out["idle_low"][c]
        led.best_effort = out["best_effort"][c]
        ledgers.append(led)
    wall = (time.perf_counter() - t0) * 1000.0
    return summarize(policy, platform, scenario.horizon, ledgers, out["misses"], out["admissions"],
                     out["checks"], "kernel", wall)


def simulate(scenario, platform: Platform | None = None, policy: Policy | str = Policy.BSS, *,
             strict: bool = False, trace_path=None, on_slot=None, backend: str | None = None) -> SimResult:
    """Run one scenario under one policy.

    The scenario's slot length overrides the platform's. Tracing and per-slot
    hooks need the reference engine and force it.
    """
    platform = (platform or Platform()).with_slot_length(scenario.slot_length_us)
    policy = Policy.parse(policy) if isinstance(policy, str) else policy
    backend = backend or default_backend()
    if trace_path is not None or on_slot is not None:
        backend = "python"
    if backend == "kernel":
        if not HAVE_KERNEL:
            raise RuntimeError("compiled kernel not available; reinstall with Cython present")
        return _run_kernel(scenario, platform, policy, strict)
    return Engine(scenario, platform, policy, strict=strict, trace_path=trace_path, on_slot=on_slot).run()
