"""Annotated per-core scheduling tables: capacity intervals and spare capacity."""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

from .model import JobInstance, TaskSpec

DEFAULT_HORIZON_CAP = 4096


class TableError(ValueError):
    pass


@dataclass
class CapacityInterval:
    start: int
    end: int
    jobs: list[tuple[int, int]] = field(default_factory=list)
    sc: int = 0
    pending: int = 0  # member jobs with remaining execution

    def __post_init__(self):
        if self.start >= self.end:
            raise TableError(f"empty interval range [{self.start},{self.end})")

    @property
    def empty(self) -> bool:
        return not self.jobs

    def __len__(self) -> int:
        return self.end - self.start


@dataclass
class CoreTable:
    core: int
    horizon: int
    intervals: list[CapacityInterval] = field(default_factory=list)
    jobs: dict[tuple[int, int], JobInstance] = field(default_factory=dict)
    current: int = 0

    def find(self, t: int) -> int:
        """Index of the interval containing slot ``t``."""
        i = bisect.bisect_right(self.intervals, t, key=lambda iv: iv.start) - 1
        if i < 0 or t >= self.intervals[i].end:
            raise TableError(f"slot {t} outside table [0,{self.horizon})")
        return i

    def interval_of(self, job: JobInstance) -> int:
        i = bisect.bisect_left(self.intervals, job.deadline, key=lambda iv: iv.end)
        if i >= len(self.intervals) or self.intervals[i].end != job.deadline:
            raise TableError(f"no interval ends at deadline {job.deadline}")
        return i

    def rem_exec(self, i: int) -> int:
        return self.intervals[i].pending

    def advance(self, now: int) -> None:
        """Move ``current`` to the interval containing slot ``now``."""
        while self.current < len(self.intervals) and self.intervals[self.current].end <= now:
            self.current += 1

    def clone(self) -> "CoreTable":
        """Copy of the interval structure sharing the job objects."""
        ivs = [CapacityInterval(iv.start, iv.end, list(iv.jobs), iv.sc, iv.pending) for iv in self.intervals]
        return CoreTable(self.core, self.horizon, ivs, dict(self.jobs), self.current)

    def snapshot(self) -> list[tuple]:
        return [(iv.start, iv.end, tuple(iv.jobs), iv.sc, iv.pending) for iv in self.intervals]

    def to_json(self) -> list[dict]:
        return [
            {"start": iv.start, "end": iv.end, "sc": iv.sc, "job_ids": [list(k) for k in iv.jobs]}
            for iv in self.intervals
        ]


def hyperperiod(tasks: Iterable[TaskSpec], cap: int = DEFAULT_HORIZON_CAP) -> int:
    periods = [t.period for t in tasks if t.period]
    if not periods:
        return 0
    h = reduce(math.lcm, periods)
    if h > cap:
        raise TableError(f"hyperperiod {h} exceeds horizon cap {cap}; pass an explicit horizon")
    return h


def expand_jobs(tasks: Iterable[TaskSpec], horizon: int) -> list[JobInstance]:
    """Unroll periodic tasks into jobs whose deadlines fall within the horizon."""
    jobs = []
    for t in tasks:
        k = 0
        while (k + 1) * t.period <= horizon:
            r = k * t.period
            jobs.append(JobInstance(task=t.id, index=k, release=r, deadline=r + t.period,
                                    wcet=t.wcet, core=t.core))
            k += 1
    jobs.sort(key=JobInstance.priority)
    return jobs


def build_intervals(jobs: list[JobInstance], horizon: int, core: int = 0) -> CoreTable:
    """Group jobs by deadline into contiguous intervals tiling [0, horizon)."""
    table = CoreTable(core=core, horizon=horizon)
    by_deadline: dict[int, list[JobInstance]] = {}
    for j in sorted(jobs, key=JobInstance.priority):
        if j.deadline > horizon:
            raise TableError(f"job {j.key} deadline {j.deadline} beyond horizon {horizon}")
        by_deadline.setdefault(j.deadline, []).append(j)
        table.jobs[j.key] = j

    prev_end = 0
    for d in sorted(by_deadline):
        members = by_deadline[d]
        start = max(prev_end, min(j.release for j in members))
        if start >= d:
            raise TableError(f"deadline {d}: no slot left after {start}")
        if start > prev_end:
            table.intervals.append(CapacityInterval(prev_end, start))
        table.intervals.append(CapacityInterval(
            start, d, jobs=[j.key for j in members], pending=sum(not j.done for j in members)))
        prev_end = d
    if prev_end < horizon:
        table.intervals.append(CapacityInterval(prev_end, horizon))
    return table


def compute_spare_capacities(table: CoreTable) -> CoreTable:
    """Fill in sc back-to-front: |I| - sum of member WCETs + min(sc(next), 0)."""
    nxt = 0
    for iv in reversed(table.intervals):
        demand = sum(table.jobs[k].committed for k in iv.jobs)
        iv.sc = len(iv) - demand + min(nxt, 0)
        nxt = iv.sc
    return table


def build_table(jobs: list[JobInstance], horizon: int, core: int = 0) -> CoreTable:
    return compute_spare_capacities(build_intervals(jobs, horizon, core))


def verify_feasible(table: CoreTable) -> bool:
    """EDF at full speed over the horizon; True iff every job meets its deadline."""
    jobs = sorted(table.jobs.values(), key=lambda j: j.release)
    left = {j.key: j.wcet for j in jobs}
    ready: list[JobInstance] = []
    nxt = 0
    for t in range(table.horizon):
        while nxt < len(jobs) and jobs[nxt].release <= t:
            ready.append(jobs[nxt])
            nxt += 1
        if any(j.deadline <= t for j in ready):
            return False
        if ready:
            j = min(ready, key=JobInstance.priority)
            left[j.key] -= 1
            if left[j.key] == 0:
                ready.remove(j)
    return not ready and nxt == len(jobs)


def dump_tables(tables: Iterable[CoreTable]) -> str:
    return json.dumps({str(t.core): t.to_json() for t in tables}, indent=1)
