"""Platform power model, energy ledger and the two energy-aware policies.

The decision functions here read a core's live table and ready queue; they
never mutate state. The engine applies whatever they return.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import UNIT, JobInstance
from .table import CoreTable


@dataclass(frozen=True)
class SleepState:
    id: str
    power_w: float
    transition_j: float
    latency_slots: int = 1
    residency_slots: int = 1

    def break_even_s(self, p_idle_w: float) -> float:
        return self.transition_j / (p_idle_w - self.power_w)


@dataclass(frozen=True)
class FrequencyLadder:
    f_max_hz: float
    levels: tuple[float, ...]  # normalized, ascending, last == 1.0

    def __post_init__(self):
        lv = tuple(sorted(self.levels))
        if not lv or lv[0] <= 0 or abs(lv[-1] - 1.0) > 1e-12:
            raise ValueError(f"ladder levels must lie in (0,1] and include 1.0: {self.levels}")
        object.__setattr__(self, "levels", lv[:-1] + (1.0,))

    @classmethod
    def from_hz(cls, f_max_hz: float, levels_hz) -> "FrequencyLadder":
        return cls(f_max_hz, tuple(f / f_max_hz for f in levels_hz))

    @property
    def units(self) -> tuple[int, ...]:
        return tuple(int(round(f * UNIT)) for f in self.levels)

    @property
    def f_min(self) -> float:
        return self.levels[0]

    def select(self, ideal: float) -> int:
        """Index of the lowest level >= ideal."""
        for i, f in enumerate(self.levels):
            if f >= ideal:
                return i
        return len(self.levels) - 1


@dataclass(frozen=True)
class PowerCurve:
    p_static_w: float = 1.0
    p_dyn_w: float = 2.0
    alpha: float = 3.0

    def __call__(self, f: float) -> float:
        return self.p_static_w + self.p_dyn_w * f ** self.alpha


def _default_ladder() -> FrequencyLadder:
    return FrequencyLadder.from_hz(2.3e9, [1.0e9 + 1e8 * k for k in range(14)])


@dataclass(frozen=True)
class Platform:
    slot_length_us: int = 1000
    cores: int = 4
    ladder: FrequencyLadder = field(default_factory=_default_ladder)
    power: PowerCurve = field(default_factory=PowerCurve)
    p_idle_w: float = 1.0
    sleep_states: tuple[SleepState, ...] = (SleepState("C6", 0.1, 3e-3, 1, 1),)
    best_effort: bool = False
    best_effort_f: float = 1.0
    idle_at_fmin: bool = True  # EASS-DVFS idles at the lowest level, charged P(f_min)

    def __post_init__(self):
        states = tuple(sorted(self.sleep_states, key=lambda s: -s.power_w))
        for s in states:
            if s.power_w >= self.p_idle_w:
                raise ValueError(f"sleep state {s.id}: power {s.power_w} W not below idle {self.p_idle_w} W")
        object.__setattr__(self, "sleep_states", states)
        if self.power.alpha < 1:
            raise ValueError("alpha must be >= 1")

    @property
    def slot_s(self) -> float:
        return self.slot_length_us * 1e-6

    def with_slot_length(self, slot_length_us: int) -> "Platform":
        return replace(self, slot_length_us=int(slot_length_us))

    @classmethod
    def from_dict(cls, d: dict) -> "Platform":
        kw = {}
        if "slot_length_us" in d:
            kw["slot_length_us"] = int(d["slot_length_us"])
        if "cores" in d:
            kw["cores"] = int(d["cores"])
        if "ladder" in d:
            kw["ladder"] = FrequencyLadder.from_hz(float(d["ladder"]["f_max_hz"]), d["ladder"]["levels_hz"])
        p = d.get("power", {})
        if p:
            kw["power"] = PowerCurve(p.get("p_static_w", 1.0), p.get("p_dyn_w", 2.0), p.get("alpha", 3.0))
            kw["p_idle_w"] = p.get("p_idle_w", kw["power"].p_static_w)
        if "sleep_states" in d:
            kw["sleep_states"] = tuple(
                SleepState(str(s["id"]), float(s["p_w"]), float(s["e_tr_j"]),
                           int(s.get("latency_slots", 1)), int(s.get("residency_slots", 1)))
                for s in d["sleep_states"])
        if "best_effort" in d:
            kw["best_effort"] = bool(d["best_effort"])
        if "best_effort_f" in d:
            kw["best_effort_f"] = float(d["best_effort_f"])
        if "idle_at_fmin" in d:
            kw["idle_at_fmin"] = bool(d["idle_at_fmin"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "Platform":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "slot_length_us": self.slot_length_us,
            "cores": self.cores,
            "ladder": {"f_max_hz": self.ladder.f_max_hz,
                       "levels_hz": [round(f * self.ladder.f_max_hz, 3) for f in self.ladder.levels]},
            "power": {"p_static_w": self.power.p_static_w, "p_dyn_w": self.power.p_dyn_w,
                      "alpha": self.power.alpha, "p_idle_w": self.p_idle_w},
            "sleep_states": [{"id": s.id, "p_w": s.power_w, "e_tr_j": s.transition_j,
                              "latency_slots": s.latency_slots, "residency_slots": s.residency_slots}
                             for s in self.sleep_states],
            "best_effort": self.best_effort,
            "best_effort_f": self.best_effort_f,
            "idle_at_fmin": self.idle_at_fmin,
        }


@dataclass
class Decision:
    action: str  # run | idle | sleep | best_effort
    job: JobInstance | None = None
    level: int | None = None
    state: int | None = None
    duration: int = 0
    ideal: float | None = None


class EnergyLedger:
    """Per-core slot counters; energies are derived from them on demand.

    Keeping counts rather than running float sums makes the totals
    independent of accumulation order.
    """

    def __init__(self, n_levels: int, n_states: int):
        self.run = [0] * n_levels
        self.idle = 0
        self.idle_low = 0  # idle at the minimum ladder level
        self.best_effort = 0
        self.sleep = [0] * n_states
        self.transitions = [0] * n_states

    @property
    def slots(self) -> int:
        return sum(self.run) + self.idle + self.idle_low + self.best_effort + sum(self.sleep)

    def components(self, platform: Platform) -> dict[str, float]:
        s = platform.slot_s
        lv = platform.ladder.levels
        active = sum(n * platform.power(lv[i]) for i, n in enumerate(self.run)) * s
        active += self.best_effort * platform.power(platform.best_effort_f) * s
        idle = (self.idle * platform.p_idle_w + self.idle_low * platform.power(lv[0])) * s
        sleep = sum(n * st.power_w for n, st in zip(self.sleep, platform.sleep_states)) * s
        trans = sum(n * st.transition_j for n, st in zip(self.transitions, platform.sleep_states))
        return {"active_j": active, "idle_j": idle, "sleep_j": sleep, "transition_j": trans}

    def total(self, platform: Platform) -> float:
        return sum(self.components(platform).values())

    def merge(self, other: "EnergyLedger") -> None:
        self.run = [a + b for a, b in zip(self.run, other.run)]
        self.sleep = [a + b for a, b in zip(self.sleep, other.sleep)]
        self.transitions = [a + b for a, b in zip(self.transitions, other.transitions)]
        self.idle += other.idle
        self.idle_low += other.idle_low
        self.best_effort += other.best_effort

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, list) else v) for k, v in vars(self).items()}


def account(ledger: EnergyLedger, decision: Decision, low_idle: bool = False) -> None:
    """Record one slot. Sleep entry is charged its transition once."""
    a = decision.action
    if a == "run":
        ledger.run[decision.level] += 1
    elif a == "idle":
        if low_idle:
            ledger.idle_low += 1
        else:
            ledger.idle += 1
    elif a == "best_effort":
        ledger.best_effort += 1
    elif a == "sleep":
        ledger.sleep[decision.state] += 1
    elif a == "sleep_entry":
        ledger.sleep[decision.state] += 1
        ledger.transitions[decision.state] += 1
    else:
        raise ValueError(a)


def slot_energy(platform: Platform, decision: Decision, low_idle: bool = False) -> float:
    """Energy of a single accounted slot, in joules."""
    led = EnergyLedger(len(platform.ladder.levels), len(platform.sleep_states))
    account(led, decision, low_idle)
    return led.total(platform)


# --- EASS-DPM ---------------------------------------------------------------

def low_power_duration(table: CoreTable) -> int:
    """Slots the core may stay idle before the next pending work must start."""
    ivs = table.intervals
    i = table.current
    if i >= len(ivs):
        return 0
    duration = ivs[i].sc
    if ivs[i].pending == 0:
        i += 1
        while i < len(ivs):
            duration += max(0, ivs[i].sc)
            if ivs[i].pending:
                break
            i += 1
    return max(duration, 0)


def choose_sleep_state(platform: Platform, duration: int) -> int | None:
    """Deepest state whose latency/residency and break-even fit in ``duration`` slots."""
    window_s = duration * platform.slot_s
    for k in range(len(platform.sleep_states) - 1, -1, -1):
        st = platform.sleep_states[k]
        if st.latency_slots + st.residency_slots > duration:
            continue
        if st.break_even_s(platform.p_idle_w) <= window_s:
            return k
    return None


def dpm_decide(core, platform: Platform) -> Decision:
    job = core.pick()
    if job is not None:
        return Decision("run", job, level=len(platform.ladder.levels) - 1)
    duration = low_power_duration(core.table)
    k = choose_sleep_state(platform, duration)
    if k is not None:
        return Decision("sleep", state=k, duration=duration)
    return Decision("best_effort" if platform.best_effort else "idle")


# --- EASS-DVFS --------------------------------------------------------------

def available_spare_capacity(table: CoreTable, job: JobInstance) -> int:
    """Slack usable by ``job`` in fixed-point units."""
    ivs = table.intervals
    j = table.interval_of(job)
    spare = max(0, ivs[j].sc) * UNIT + job.reserved
    i = table.current
    while i != j and ivs[i].pending == 0 and ivs[i].sc > 0:
        spare += ivs[i].sc * UNIT
        i += 1
    return spare


def ideal_frequency(remaining: int, spare: int) -> float:
    if remaining <= 0:
        return 0.0
    return float(remaining) / (float(remaining) + float(spare))


def dvfs_decide(core, platform: Platform) -> Decision:
    ladder = platform.ladder
    job = core.pick()
    if job is None:
        if platform.best_effort:
            return Decision("best_effort")
        return Decision("idle", level=0)
    ideal = ideal_frequency(job.remaining, available_spare_capacity(core.table, job))
    return Decision("run", job, level=ladder.select(ideal), ideal=ideal)


def bss_decide(core, platform: Platform) -> Decision:
    job = core.pick()
    if job is not None:
        return Decision("run", job, level=len(platform.ladder.levels) - 1)
    return Decision("best_effort" if platform.best_effort else "idle")
