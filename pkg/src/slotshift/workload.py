"""Task-set generation (UUnifast) and scenario files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import TaskSpec


class Unsatisfiable(ValueError):
    pass


@dataclass(frozen=True)
class AdmissionRecord:
    arrival: int
    wcet: int
    deadline: int
    preferred_core: int | None = None


@dataclass
class Scenario:
    horizon: int
    cores: int
    tasks: list[TaskSpec]
    admissions: list[AdmissionRecord] = field(default_factory=list)
    slot_length_us: int = 1000
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "horizon_slots": self.horizon,
            "slot_length_us": self.slot_length_us,
            "cores": self.cores,
            "tasks": [{"id": t.id, "core": t.core, "wcet": t.wcet, "period": t.period} for t in self.tasks],
            "admissions": [{"arrival": a.arrival, "wcet": a.wcet, "deadline": a.deadline,
                            "preferred_core": a.preferred_core} for a in self.admissions],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            horizon=int(d["horizon_slots"]),
            cores=int(d["cores"]),
            tasks=[TaskSpec(id=int(t["id"]), wcet=int(t["wcet"]), period=int(t["period"]),
                            core=int(t["core"])) for t in d.get("tasks", [])],
            admissions=[AdmissionRecord(int(a["arrival"]), int(a["wcet"]), int(a["deadline"]),
                                        None if a.get("preferred_core") is None else int(a["preferred_core"]))
                        for a in d.get("admissions", [])],
            slot_length_us=int(d.get("slot_length_us", 1000)),
            seed=d.get("seed"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def core_utilization(self) -> list[float]:
        u = [0.0] * self.cores
        for t in self.tasks:
            u[t.core] += t.utilization
        return u


@dataclass
class AperiodicSpec:
    utilization: float = 0.0
    wcet_range: tuple[int, int] = (10, 15)
    period_range: tuple[int, int] = (10, 15)


@dataclass
class GenSpec:
    utilization: float
    cores: int = 1
    n_tasks: int | None = None  # None: pick from the utilization
    wcet_range: tuple[int, int] = (1, 15)
    period_range: tuple[int, int] = (15, 50)
    aperiodic: AperiodicSpec = field(default_factory=AperiodicSpec)
    horizon_range: tuple[int, int] = (1800, 2200)
    slot_length_us: int = 1000
    seed: int = 0
    max_attempts: int = 1000

    def __post_init__(self):
        for name in ("wcet_range", "period_range", "horizon_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValueError(f"{name} must be a non-empty positive range, got {(lo, hi)}")
        if not 0 < self.utilization <= self.cores:
            raise Unsatisfiable(f"utilization {self.utilization} outside (0, {self.cores}]")

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        d = dict(d)
        ap = d.pop("aperiodic", None) or {}
        for k in ("wcet_range", "period_range", "horizon_range"):
            if k in d:
                d[k] = tuple(d[k])
        ap = AperiodicSpec(ap.get("utilization", 0.0), tuple(ap.get("wcet_range", (10, 15))),
                           tuple(ap.get("period_range", (10, 15))))
        d.pop("cases", None)
        return cls(aperiodic=ap, **d)


def uunifast(n: int, u: float, rng: np.random.Generator) -> list[float]:
    """n utilizations uniformly distributed over the simplex summing to u."""
    if n < 1 or u <= 0:
        raise ValueError("need n >= 1 and u > 0")
    out = []
    remaining = u
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        out.append(remaining - nxt)
        remaining = nxt
    out.append(remaining)
    return out


def _partition(utils: list[float], cores: int) -> list[int] | None:
    """Worst-fit decreasing; None if some task does not fit."""
    load = [0.0] * cores
    where = [0] * len(utils)
    for i in sorted(range(len(utils)), key=lambda i: (-utils[i], i)):
        c = min(range(cores), key=lambda c: (load[c], c))
        if load[c] + utils[i] > 1.0 + 1e-12:
            return None
        load[c] += utils[i]
        where[i] = c
    return where


def _periodic(spec: GenSpec, rng: np.random.Generator) -> list[TaskSpec]:
    lo_c, hi_c = spec.wcet_range
    lo_t, hi_t = spec.period_range
    mean_u = ((lo_c + hi_c) / 2) / ((lo_t + hi_t) / 2)
    n = spec.n_tasks or max(1, math.ceil(spec.utilization / mean_u))
    for _ in range(spec.max_attempts):
        us = uunifast(n, spec.utilization, rng)
        periods = rng.integers(lo_t, hi_t, endpoint=True, size=n)
        wcets = [min(max(int(round(u * T)), lo_c), hi_c, int(T)) for u, T in zip(us, periods)]
        actual = [c / T for c, T in zip(wcets, periods)]
        where = _partition(actual, spec.cores)
        if where is not None:
            return [TaskSpec(id=i, wcet=wcets[i], period=int(periods[i]), core=where[i]) for i in range(n)]
    raise Unsatisfiable(f"no partitionable task set after {spec.max_attempts} attempts "
                        f"(U={spec.utilization}, cores={spec.cores})")


def _aperiodic(spec: GenSpec, horizon: int, rng: np.random.Generator) -> list[AdmissionRecord]:
    ap = spec.aperiodic
    if ap.utilization <= 0:
        return []
    lo_c, hi_c = ap.wcet_range
    lo_w, hi_w = ap.period_range
    budget = ap.utilization * horizon
    out = []
    offered = 0
    while offered < budget:
        c = int(rng.integers(lo_c, hi_c, endpoint=True))
        window = int(rng.integers(max(lo_w, c), max(hi_w, c), endpoint=True))
        if window >= horizon:
            break
        arrival = int(rng.integers(0, horizon - window, endpoint=True))
        core = int(rng.integers(0, spec.cores))
        out.append(AdmissionRecord(arrival, c, arrival + window, core))
        offered += c
    out.sort(key=lambda a: (a.arrival, a.deadline, a.wcet, a.preferred_core))
    return out


def generate_taskset(spec: GenSpec) -> Scenario:
    """Draw a partitioned periodic task set and an aperiodic admission stream."""
    rng = np.random.default_rng(spec.seed)
    tasks = _periodic(spec, rng)
    horizon = int(rng.integers(spec.horizon_range[0], spec.horizon_range[1], endpoint=True))
    return Scenario(horizon=horizon, cores=spec.cores, tasks=tasks,
                    admissions=_aperiodic(spec, horizon, rng),
                    slot_length_us=spec.slot_length_us, seed=spec.seed)
