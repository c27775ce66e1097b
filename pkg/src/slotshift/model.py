"""Shared domain types: vCPUs, tasks, jobs and normalized frequencies.

Execution amounts (remaining execution, reserved spare capacity, frequency)
are stored as integers in units of 1e-9 slot so that repeated frequency
decrements never drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

UNIT = 1_000_000_000  # fixed-point resolution: 1e-9 slot
COMPLETION_TOL = 1  # remaining <= 1 unit counts as complete


class InfeasibleSpec(ValueError):
    """Raised when a vCPU's latency bound cannot be met by any integer period."""


def to_units(x: float) -> int:
    return int(round(x * UNIT))


def from_units(u: int) -> float:
    return u / UNIT


@dataclass(frozen=True)
class VcpuSpec:
    utilization: float
    max_latency: int

    def __post_init__(self):
        if not 0.0 < self.utilization < 1.0:
            raise InfeasibleSpec(f"utilization must be in (0,1), got {self.utilization}")
        if self.max_latency < 1:
            raise InfeasibleSpec(f"max_latency must be >= 1 slot, got {self.max_latency}")


class TaskKind(str, Enum):
    PERIODIC = "periodic"
    APERIODIC = "aperiodic"


@dataclass(frozen=True)
class TaskSpec:
    id: int
    wcet: int
    period: int | None = None
    core: int = 0
    kind: TaskKind = TaskKind.PERIODIC

    def __post_init__(self):
        if self.wcet < 1:
            raise ValueError(f"task {self.id}: wcet must be >= 1")
        if self.kind is TaskKind.PERIODIC:
            if self.period is None or not 1 <= self.wcet <= self.period:
                raise ValueError(f"task {self.id}: need 1 <= C <= T, got C={self.wcet} T={self.period}")
        elif self.period is not None:
            raise ValueError(f"aperiodic task {self.id} has a period")

    @property
    def utilization(self) -> float:
        return self.wcet / self.period if self.period else 0.0


class JobState(str, Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"
    COMPLETE = "complete"


@dataclass
class JobInstance:
    """One invocation of a task.

    ``remaining`` and ``reserved`` are in fixed-point units (see ``UNIT``).
    ``credited`` counts whole slots already handed back to the job's
    interval, which makes ``wcet - credited`` the work the table still
    charges to this job.
    """

    task: int
    index: int
    release: int
    deadline: int
    wcet: int
    remaining: int = -1
    reserved: int = 0
    credited: int = 0
    state: JobState = JobState.PENDING
    core: int = 0
    guaranteed: bool = True

    def __post_init__(self):
        if self.release >= self.deadline:
            raise ValueError(f"job {self.key}: release {self.release} >= deadline {self.deadline}")
        if self.remaining < 0:
            self.remaining = self.wcet * UNIT

    @property
    def key(self) -> tuple[int, int]:
        return (self.task, self.index)

    @property
    def c(self) -> float:
        return self.remaining / UNIT

    @property
    def reserved_sc(self) -> float:
        return self.reserved / UNIT

    @property
    def done(self) -> bool:
        return self.remaining <= COMPLETION_TOL

    @property
    def committed(self) -> int:
        """Slots still charged against the job's interval."""
        return self.wcet - self.credited

    def priority(self) -> tuple[int, int, int]:
        return (self.deadline, self.task, self.index)


@dataclass(frozen=True, order=True)
class NormalizedFrequency:
    value: float
    units: int = field(init=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.value <= 1.0:
            raise ValueError(f"normalized frequency must be in (0,1], got {self.value}")
        object.__setattr__(self, "units", to_units(self.value))


F_MAX = NormalizedFrequency(1.0)


def map_vcpu_to_task(spec: VcpuSpec, period_cap: int, task_id: int = 0, core: int = 0) -> TaskSpec:
    """Pick the largest integer period meeting the vCPU latency bound.

    The longest gap between two invocations of a periodic task is 2(T - C),
    so T <= L / (2(1 - U)). WCET is rounded up so C/T never falls below U.
    """
    if period_cap < 1:
        raise ValueError("period_cap must be >= 1")
    # the epsilon absorbs representation error in 1 - U (e.g. 1 - 0.95)
    bound = math.floor(spec.max_latency / (2.0 * (1.0 - spec.utilization)) + 1e-9)
    if bound < 1:
        raise InfeasibleSpec(
            f"latency {spec.max_latency} unattainable at U={spec.utilization}: "
            f"L/(2(1-U)) = {spec.max_latency / (2.0 * (1.0 - spec.utilization)):.3f} < 1"
        )
    period = min(bound, period_cap)
    wcet = math.ceil(spec.utilization * period - 1e-12)
    wcet = max(1, min(wcet, period))
    return TaskSpec(id=task_id, wcet=wcet, period=period, core=core)
