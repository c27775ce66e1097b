"""Slot-synchronous reference engine.

Each slot runs a decision phase (admissions, releases, policy choice) and
then applies execution effects and spare-capacity maintenance on every
core. This module is the pure-Python implementation; ``slotshift.sim``
dispatches to the compiled kernel when it is available.
"""
from __future__ import annotations

import bisect
import csv
import heapq
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import energy
from .energy import Decision, EnergyLedger, Platform
from .guarantee import AdmissionOutcome, AdmissionRequest, admit
from .model import UNIT, JobInstance, JobState
from .table import CoreTable, build_table, expand_jobs

EQ4_TOL = 1e-9


class Policy(str, Enum):
    BSS = "BSS"
    DPM = "EASS-DPM"
    DVFS = "EASS-DVFS"

    @classmethod
    def parse(cls, s: str) -> "Policy":
        key = s.strip().upper().replace("_", "-")
        for p in cls:
            if key in (p.value, p.name, p.value.split("-")[-1]):
                return p
        raise ValueError(f"unknown policy {s!r}; expected one of {[p.value for p in cls]}")


class DeadlineMiss(RuntimeError):
    pass


@dataclass
class SlotClock:
    now: int = 0
    slot_length_us: int = 1000

    def tick(self) -> None:
        self.now += 1


@dataclass
class Checks:
    eq4_violations: int = 0
    dpm_violations: int = 0
    reserved_violations: int = 0
    sc_updates: int = 0
    sleep_entries: int = 0
    dvfs_run_slots: int = 0


class CoreState:
    def __init__(self, core: int, table: CoreTable, platform: Platform, utilization: float = 0.0):
        self.core = core
        self.table = table
        self.incoming = sorted(table.jobs.values(), key=lambda j: (j.release, j.priority()))
        self.ready: list[tuple] = []
        self.wake_at = 0
        self.sleep_state: int | None = None
        self.ledger = EnergyLedger(len(platform.ladder.levels), len(platform.sleep_states))
        self.utilization = utilization
        self.sc_updates = 0
        self.mode = "idle"

    def add_job(self, job: JobInstance) -> None:
        if job.done:
            return
        bisect.insort(self.incoming, job, key=lambda j: (j.release, j.priority()))

    def release(self, now: int) -> None:
        n = 0
        while n < len(self.incoming) and self.incoming[n].release <= now:
            j = self.incoming[n]
            j.state = JobState.READY
            heapq.heappush(self.ready, (j.deadline, j.task, j.index, j))
            n += 1
        if n:
            del self.incoming[:n]

    def pick(self) -> JobInstance | None:
        return pick_edf_job(self)

    def busy_until(self, now: int) -> int | None:
        return self.wake_at if self.wake_at > now else None

    def sleeping(self, now: int) -> bool:
        return self.wake_at > now


def pick_edf_job(core: CoreState) -> JobInstance | None:
    """Earliest deadline first; ties by task id, then job index."""
    return core.ready[0][3] if core.ready else None


def update_spare_capacity(core: CoreState, executed: JobInstance | None, f_units: int) -> None:
    """Per-slot spare-capacity maintenance.

    The current interval loses one slot. An executed job accrues ``f_units``
    of reserved capacity; every whole slot of it is credited to the job's
    interval and walks back through earlier intervals that were lending
    to it.
    """
    t = core.table
    ivs = t.intervals
    cur = t.current
    ivs[cur].sc -= 1
    if executed is not None:
        executed.reserved += f_units
        while executed.reserved >= UNIT:
            executed.reserved -= UNIT
            executed.credited += 1
            i = t.interval_of(executed)
            prev = ivs[i].sc
            ivs[i].sc += 1
            while prev < 0 and i > cur:
                i -= 1
                prev = ivs[i].sc
                ivs[i].sc += 1
    core.sc_updates += 1


@dataclass
class SimResult:
    policy: str
    horizon: int
    cores: int
    slot_length_us: int
    total_energy_j: float
    avg_power_w: float
    package_power_w: float
    energy_components: dict
    deadline_misses: int
    admissions: dict
    sleep_transitions: int
    per_state_residency: dict
    freq_histogram: dict
    best_effort_slots: int
    checks: dict
    backend: str
    runtime_wall_ms: float = 0.0
    missed_jobs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(vars(self))


def summarize(policy: Policy, platform: Platform, horizon: int, ledgers: list[EnergyLedger],
              misses: list, admissions: dict, checks: dict, backend: str, wall_ms: float) -> SimResult:
    total = EnergyLedger(len(platform.ladder.levels), len(platform.sleep_states))
    for led in ledgers:
        total.merge(led)
    comps = total.components(platform)
    energy_j = sum(comps.values())
    n = len(ledgers)
    duration = horizon * platform.slot_s
    residency = {"active": sum(total.run), "idle": total.idle + total.idle_low,
                 "best_effort": total.best_effort}
    for st, k in zip(platform.sleep_states, total.sleep):
        residency[f"sleep:{st.id}"] = k
    hist = {f"{f:.4f}": k for f, k in zip(platform.ladder.levels, total.run) if k}
    return SimResult(
        policy=policy.value, horizon=horizon, cores=n, slot_length_us=platform.slot_length_us,
        total_energy_j=energy_j,
        avg_power_w=energy_j / duration / n if duration and n else 0.0,
        package_power_w=energy_j / duration if duration else 0.0,
        energy_components=comps, deadline_misses=len(misses), admissions=admissions,
        sleep_transitions=sum(total.transitions), per_state_residency=residency,
        freq_histogram=hist, best_effort_slots=total.best_effort, checks=checks,
        backend=backend, runtime_wall_ms=wall_ms, missed_jobs=[list(m) for m in misses],
    )


def admission_requests(scenario) -> list[AdmissionRequest]:
    """Requests in arrival order; aperiodic jobs get task ids after the periodic ones."""
    first_id = max((t.id for t in scenario.tasks), default=-1) + 1
    return [
        AdmissionRequest(a.arrival, a.wcet, a.deadline, a.preferred_core, task=first_id + n)
        for n, a in enumerate(sorted(scenario.admissions, key=lambda a: a.arrival))
    ]


class Engine:
    """Single-threaded simulation of one scenario under one policy."""

    def __init__(self, scenario, platform: Platform, policy: Policy, *, strict: bool = False,
                 trace_path=None, on_slot: Callable | None = None):
        self.platform = platform
        self.policy = policy
        self.strict = strict
        self.horizon = scenario.horizon
        self.clock = SlotClock(0, platform.slot_length_us)
        self.cores: list[CoreState] = []
        for c in range(scenario.cores):
            tasks = [t for t in scenario.tasks if t.core == c]
            table = build_table(expand_jobs(tasks, self.horizon), self.horizon, core=c)
            self.cores.append(CoreState(c, table, platform, sum(t.utilization for t in tasks)))
        self.requests = admission_requests(scenario)
        self._next_req = 0
        self.outcomes: list[AdmissionOutcome] = []
        self.admissions = {"offered": 0, "accepted": 0, "delegated": 0, "rejected": 0}
        self.misses: list[tuple] = []
        self.checks = Checks()
        self.on_slot = on_slot
        self._low_idle = policy is Policy.DVFS and platform.idle_at_fmin
        self._decide = {Policy.BSS: energy.bss_decide, Policy.DPM: energy.dpm_decide,
                        Policy.DVFS: energy.dvfs_decide}[policy]
        self._trace_fh = None
        self._trace = None
        if trace_path is not None:
            self._trace_fh = open(trace_path, "w", newline="")
            self._trace = csv.writer(self._trace_fh)
            self._trace.writerow(["slot", "core", "action", "job", "f_slot", "sc_current"])

    # decision phase -----------------------------------------------------

    def _admit_due(self, now: int) -> None:
        reqs = self.requests
        while self._next_req < len(reqs) and reqs[self._next_req].arrival <= now:
            req = reqs[self._next_req]
            self._next_req += 1
            self.admissions["offered"] += 1
            if req.arrival < now or req.deadline <= req.arrival or req.deadline - req.arrival < req.wcet:
                out = AdmissionOutcome(False, reason="arrival/deadline window too short")
            else:
                out = admit(self.cores, req, now)
            self.outcomes.append(out)
            if out.accepted:
                self.admissions["accepted"] += 1
                self.admissions["delegated"] += out.delegated
            else:
                self.admissions["rejected"] += 1

    def _check_deadlines(self, core: CoreState, now: int) -> None:
        while core.ready and core.ready[0][0] <= now:
            job = heapq.heappop(core.ready)[3]
            self.misses.append(job.key)
            iv = core.table.intervals[core.table.interval_of(job)]
            iv.pending -= 1
            if self.strict:
                raise DeadlineMiss(f"core {core.core}: job {job.key} missed deadline {job.deadline}")

    def run_best_effort(self, core: CoreState) -> bool:
        return self.platform.best_effort

    # dispatch -----------------------------------------------------------

    def _execute(self, core: CoreState, dec: Decision, now: int) -> tuple[JobInstance | None, int]:
        p = self.platform
        if core.sleeping(now):
            energy.account(core.ledger, Decision("sleep", state=core.sleep_state))
            return None, 0
        if dec.action == "sleep":
            st = p.sleep_states[dec.state]
            dur = min(dec.duration, self.horizon - now)
            ok = (st.break_even_s(p.p_idle_w) <= dur * p.slot_s
                  and st.latency_slots + st.residency_slots <= dur)
            self.checks.sleep_entries += 1
            self.checks.dpm_violations += not ok
            core.wake_at = now + dur
            core.sleep_state = dec.state
            energy.account(core.ledger, Decision("sleep_entry", state=dec.state))
            return None, 0
        if dec.action == "best_effort":
            if self.run_best_effort(core):
                energy.account(core.ledger, dec)
            else:
                energy.account(core.ledger, Decision("idle"), self._low_idle)
            return None, 0
        if dec.action == "idle":
            energy.account(core.ledger, dec, low_idle=self._low_idle)
            return None, 0
        job = dec.job
        f_units = p.ladder.units[dec.level]
        if dec.ideal is not None:
            self.checks.dvfs_run_slots += 1
            if p.ladder.levels[dec.level] < dec.ideal - EQ4_TOL:
                self.checks.eq4_violations += 1
        job.state = JobState.RUNNING
        job.remaining -= min(f_units, job.remaining)
        energy.account(core.ledger, dec)
        return job, f_units

    def step(self) -> None:
        now = self.clock.now
        self._admit_due(now)
        for core in self.cores:
            core.table.advance(now)
            core.release(now)
            self._check_deadlines(core, now)
            if core.sleeping(now):
                dec = Decision("sleep", state=core.sleep_state)
            else:
                dec = self._decide(core, self.platform)
            job, f_units = self._execute(core, dec, now)
            update_spare_capacity(core, job, f_units)
            if job is not None:
                if not 0 <= job.reserved < UNIT:
                    self.checks.reserved_violations += 1
                if job.done:
                    job.state = JobState.COMPLETE
                    heapq.heappop(core.ready)
                    core.table.intervals[core.table.interval_of(job)].pending -= 1
                else:
                    job.state = JobState.READY
            self.checks.sc_updates += 1
            if self._trace is not None:
                self._trace.writerow([
                    now, core.core, dec.action, f"{job.task}:{job.index}" if job else "",
                    f"{f_units / UNIT:.9f}" if job else "",
                    core.table.intervals[core.table.current].sc,
                ])
        if self.on_slot is not None:
            self.on_slot(self, now)
        self.clock.tick()

    def finish(self) -> None:
        for core in self.cores:
            self._check_deadlines(core, self.horizon)
            for j in core.incoming:
                if not j.done:
                    self.misses.append(j.key)
        if self._trace_fh is not None:
            self._trace_fh.close()

    def run(self) -> SimResult:
        t0 = time.perf_counter()
        try:
            while self.clock.now < self.horizon:
                self.step()
        finally:
            self.finish()
        wall = (time.perf_counter() - t0) * 1000.0
        return summarize(self.policy, self.platform, self.horizon, [c.ledger for c in self.cores],
                         self.misses, dict(self.admissions), vars(self.checks).copy(), "python", wall)
