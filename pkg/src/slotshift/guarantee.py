"""Run-time admission: acceptance test, table insertion and delegation."""
from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass

from .model import UNIT, JobInstance, TaskSpec
from .table import CapacityInterval, CoreTable


class BeyondHorizon(ValueError):
    """The job's deadline lies past the end of the scheduling table."""


@dataclass
class AdmissionRequest:
    arrival: int
    wcet: int
    deadline: int
    preferred_core: int | None = None
    task: int = -1

    def job(self) -> JobInstance:
        return JobInstance(task=self.task, index=0, release=self.arrival,
                           deadline=self.deadline, wcet=self.wcet)


@dataclass
class AdmissionOutcome:
    accepted: bool
    core: int | None = None
    delegated: bool = False
    reason: str = ""


def usable_capacity(table: CoreTable, deadline: int, now: int) -> int:
    """Spare slots in [now, deadline) after a virtual split at the deadline."""
    ivs = table.intervals
    i = table.find(now)
    usable = 0
    while i < len(ivs):
        iv = ivs[i]
        if iv.end <= deadline:
            usable += max(0, iv.sc)
            if iv.end == deadline:
                break
        else:
            usable += max(0, min(iv.sc, deadline - max(iv.start, now)))
            break
        i += 1
    return usable


def acceptance_test(table: CoreTable, job: JobInstance, now: int | None = None,
                    blocked_until: int | None = None) -> bool:
    """True iff the job's WCET fits the spare capacity before its deadline.

    Slots before ``max(now, job.release, blocked_until)`` count as lost to
    the job. The table is not modified.
    """
    if job.wcet <= 0:
        return True
    if now is None:
        now = job.release
    if job.deadline > table.horizon:
        return False
    start = max(now, job.release, blocked_until or now)
    if job.deadline - start < job.wcet:
        return False
    return usable_capacity(table, job.deadline, now) - (start - now) >= job.wcet


def insert_job(table: CoreTable, job: JobInstance, now: int) -> int:
    """Add ``job`` to the table, splitting at its deadline if needed.

    Returns the index of the interval the job joined. Spare capacities are
    rebalanced from that interval back to the current one.
    """
    ivs = table.intervals
    d = job.deadline
    if d > table.horizon:
        raise BeyondHorizon(f"deadline {d} beyond horizon {table.horizon}")
    cur = table.find(now)
    i = bisect.bisect_left(ivs, d, key=lambda iv: iv.end)
    iv = ivs[i]
    old_sc = iv.sc
    table.jobs[job.key] = job
    if iv.end == d:
        iv.jobs.append(job.key)
        iv.pending += not job.done
        iv.sc -= job.wcet
        new_sc = iv.sc
    else:
        # lengths here are measured from now when the split interval is current
        head = d - (max(iv.start, now) if i == cur else iv.start)
        tail = CapacityInterval(d, iv.end, jobs=iv.jobs, sc=iv.sc - head, pending=iv.pending)
        first = CapacityInterval(iv.start, d, jobs=[job.key], pending=int(not job.done))
        first.sc = head - job.wcet + min(tail.sc, 0)
        ivs[i:i + 1] = [first, tail]
        new_sc = first.sc
    k = i - 1
    while k >= cur:
        delta = min(new_sc, 0) - min(old_sc, 0)
        if delta == 0:
            break
        old_sc = ivs[k].sc
        ivs[k].sc += delta
        new_sc = ivs[k].sc
        k -= 1
    return i


def split_at(table: CoreTable, t: int, now: int) -> None:
    """Add an interval boundary at slot ``t`` (> now) without changing any demand.

    The part after ``t`` keeps the members, so its spare capacity loses the
    slots that now lie before the boundary; the new empty head lends to it
    as usual.
    """
    i = table.find(t)
    iv = table.intervals[i]
    if iv.start == t:
        return
    lead = t - (max(iv.start, now) if i == table.find(now) else iv.start)
    tail = CapacityInterval(t, iv.end, jobs=iv.jobs, sc=iv.sc - lead, pending=iv.pending)
    head = CapacityInterval(iv.start, t, sc=lead + min(tail.sc, 0))
    table.intervals[i:i + 1] = [head, tail]


def _core_order(n_cores: int, preferred: int | None) -> list[int]:
    order = list(range(n_cores))
    if preferred is not None and 0 <= preferred < n_cores:
        order.remove(preferred)
        order.insert(0, preferred)
    return order


def admit(cores, request: AdmissionRequest, now: int) -> AdmissionOutcome:
    """Preferred core first, then ascending index; first passing core wins."""
    job = request.job()
    if request.deadline > cores[0].table.horizon:
        return AdmissionOutcome(False, reason=f"deadline {request.deadline} beyond horizon")
    for c in _core_order(len(cores), request.preferred_core):
        core = cores[c]
        if acceptance_test(core.table, job, now, core.busy_until(now)):
            job.core = c
            insert_job(core.table, job, now)
            core.add_job(job)
            delegated = request.preferred_core is not None and c != request.preferred_core
            return AdmissionOutcome(True, c, delegated, "accepted")
    return AdmissionOutcome(False, reason="insufficient spare capacity on every core")


def edf_feasible(work, now: int, blocked_until: int | None = None) -> bool:
    """Exact uniprocessor check: EDF from ``now`` meets every deadline.

    ``work`` holds (release, deadline, slots) triples; nothing executes
    before ``blocked_until``.
    """
    pending = sorted((max(r, now), d, c) for r, d, c in work if c > 0)
    ready: list[list[int]] = []
    t = max(now, blocked_until or now)
    k = 0
    while k < len(pending) or ready:
        if not ready and pending[k][0] > t:
            t = pending[k][0]
        while k < len(pending) and pending[k][0] <= t:
            r, d, c = pending[k]
            heapq.heappush(ready, [d, c])
            k += 1
        item = ready[0]
        if t >= item[0]:
            return False
        item[1] -= 1
        if item[1] == 0:
            heapq.heappop(ready)
        t += 1
    return True


def admit_vm(cores, task: TaskSpec, first_release: int, now: int,
             preferred_core: int | None = None) -> AdmissionOutcome:
    """Admit every job of a new periodic vCPU on one core, or none of them.

    The check is exact (EDF over all outstanding work plus the new jobs).
    Each job gets an interval boundary at its release before insertion.
    """
    for c in _core_order(len(cores), preferred_core):
        core = cores[c]
        if core.utilization + task.utilization > 1.0 + 1e-12:
            continue
        horizon = core.table.horizon
        jobs = []
        k = 0
        while first_release + (k + 1) * task.period <= horizon:
            r = first_release + k * task.period
            jobs.append(JobInstance(task=task.id, index=k, release=r, deadline=r + task.period,
                                    wcet=task.wcet, core=c))
            k += 1
        work = [(j.release, j.deadline, -(-j.remaining // UNIT))
                for j in core.table.jobs.values() if not j.done and j.deadline > now]
        work += [(j.release, j.deadline, j.wcet) for j in jobs]
        if not edf_feasible(work, now, core.busy_until(now)):
            continue
        for j in jobs:
            if j.release > now:
                split_at(core.table, j.release, now)
            insert_job(core.table, j, now)
            core.add_job(j)
        core.utilization += task.utilization
        delegated = preferred_core is not None and c != preferred_core
        return AdmissionOutcome(True, c, delegated, f"{len(jobs)} jobs")
    return AdmissionOutcome(False, reason="no core can host the vCPU")
