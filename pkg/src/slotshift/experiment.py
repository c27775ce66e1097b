"""Parameter sweeps and policy comparison.

Output files (all CSV, first line is a ``# schema`` comment):

runs.csv        one row per (case, slot length, policy, repetition)
aggregate.csv   mean power per (utilization, new_job_utilization, slot_length_us, policy)
compare.csv     % power reduction of each energy-aware policy vs BSS per
                (utilization, slot_length_us), averaged over new-job levels
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing as mp
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .energy import Platform
from .runtime import Policy
from .sim import simulate
from .workload import AperiodicSpec, GenSpec, Unsatisfiable, generate_taskset

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RUN_COLUMNS = [
    "utilization", "new_job_utilization", "slot_length_us", "case", "policy", "repetition",
    "seed", "horizon", "total_energy_j", "avg_power_w", "package_power_w", "deadline_misses",
    "offered", "accepted", "delegated", "rejected", "sleep_transitions", "best_effort_slots",
    "eq4_violations", "dpm_violations", "reserved_violations", "error",
]
AGG_COLUMNS = [
    "utilization", "new_job_utilization", "slot_length_us", "policy", "runs",
    "mean_avg_power_w", "mean_package_power_w", "deadline_misses", "errors",
]
CMP_COLUMNS = ["utilization", "slot_length_us", "policy", "bss_power_w", "power_w", "reduction_pct"]


@dataclass
class ExperimentGrid:
    utilizations: list[float] = field(default_factory=lambda: [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    new_job_utilizations: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.5])
    slot_lengths_us: list[int] = field(default_factory=lambda: [1000, 3000, 10000])
    cases_per_cell: int = 10
    repetitions: int = 3
    policies: list[str] = field(default_factory=lambda: [p.value for p in Policy])
    cores: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("utilizations", "new_job_utilizations", "slot_lengths_us", "policies"):
            if not getattr(self, name):
                raise ValueError(f"grid field {name!r} must be non-empty")
        if self.repetitions < 1 or self.cases_per_cell < 1:
            raise ValueError("repetitions and cases_per_cell must be >= 1")
        self.policies = [Policy.parse(p).value for p in self.policies]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentGrid":
        known = cls.__dataclass_fields__
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown grid keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentGrid":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def n_runs(self) -> int:
        return (len(self.utilizations) * len(self.new_job_utilizations) * self.cases_per_cell
                * len(self.slot_lengths_us) * len(self.policies) * self.repetitions)


def case_seed(base: int, iu: int, inew: int, case: int) -> int:
    return int(np.random.SeedSequence([base, iu, inew, case]).generate_state(1)[0])


def _work_units(grid: ExperimentGrid):
    for iu, u in enumerate(grid.utilizations):
        for inew, un in enumerate(grid.new_job_utilizations):
            for case in range(grid.cases_per_cell):
                yield u, un, case, case_seed(grid.seed, iu, inew, case)


def _run_unit(args) -> list[dict]:
    grid, platform, (u, un, case, seed) = args
    base = dict(utilization=u, new_job_utilization=un, case=case, seed=seed)
    try:
        scenario = generate_taskset(GenSpec(utilization=u * grid.cores, cores=grid.cores, seed=seed,
                                            aperiodic=AperiodicSpec(un * grid.cores)))
    except Unsatisfiable as e:
        return [dict(base, slot_length_us=sl, policy=p, repetition=r, error=str(e))
                for sl in grid.slot_lengths_us for p in grid.policies for r in range(grid.repetitions)]
    rows = []
    for sl in grid.slot_lengths_us:
        sc = replace(scenario, slot_length_us=sl)
        for p in grid.policies:
            for r in range(grid.repetitions):
                row = dict(base, slot_length_us=sl, policy=p, repetition=r, horizon=sc.horizon)
                try:
                    res = simulate(sc, platform, p)
                except Exception as e:  # recorded per row, the sweep goes on
                    row["error"] = f"{type(e).__name__}: {e}"
                else:
                    row.update(
                        total_energy_j=res.total_energy_j, avg_power_w=res.avg_power_w,
                        package_power_w=res.package_power_w, deadline_misses=res.deadline_misses,
                        sleep_transitions=res.sleep_transitions, best_effort_slots=res.best_effort_slots,
                        **res.admissions,
                        **{k: res.checks[k] for k in ("eq4_violations", "dpm_violations",
                                                      "reserved_violations")},
                    )
                rows.append(row)
    return rows


def _row_key(r):
    return (r["utilization"], r["new_job_utilization"], r["slot_length_us"], r["case"],
            r["policy"], r["repetition"])


def run_sweep(grid: ExperimentGrid, platform: Platform | None = None, jobs: int = 1) -> list[dict]:
    platform = platform or Platform()
    units = [(grid, platform, w) for w in _work_units(grid)]
    if jobs > 1:
        with mp.get_context().Pool(jobs) as pool:
            chunks = pool.map(_run_unit, units, chunksize=max(1, len(units) // (4 * jobs)))
    else:
        chunks = [_run_unit(u) for u in units]
    rows = [r for c in chunks for r in c]
    rows.sort(key=_row_key)
    return rows


def aggregate(rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        cells.setdefault((r["utilization"], r["new_job_utilization"], r["slot_length_us"], r["policy"]),
                         []).append(r)
    out = []
    for key in sorted(cells):
        ok = [r for r in cells[key] if not r.get("error")]
        n = len(ok)
        out.append(dict(
            zip(("utilization", "new_job_utilization", "slot_length_us", "policy"), key),
            runs=n,
            mean_avg_power_w=math.fsum(r["avg_power_w"] for r in ok) / n if n else "",
            mean_package_power_w=math.fsum(r["package_power_w"] for r in ok) / n if n else "",
            deadline_misses=sum(r["deadline_misses"] for r in ok),
            errors=len(cells[key]) - n,
        ))
    return out


def reduction_pct(baseline: float, power: float) -> float:
    return (baseline - power) / baseline * 100.0


def compare(agg: list[dict]) -> list[dict]:
    """Reduction vs BSS per (utilization, slot length), averaged over new-job levels."""
    cells: dict[tuple, list[float]] = {}
    for r in agg:
        if r["mean_avg_power_w"] == "":
            continue
        cells.setdefault((r["utilization"], r["slot_length_us"], r["policy"]), []).append(
            float(r["mean_avg_power_w"]))
    if not any(k[2] == Policy.BSS.value for k in cells):
        raise ValueError("no BSS baseline rows in results; sweep must include policy BSS")
    policies = sorted({k[2] for k in cells} - {Policy.BSS.value})
    if not policies:
        raise ValueError("no energy-aware policy rows in results")
    out = []
    for (u, sl) in sorted({(k[0], k[1]) for k in cells}):
        base = cells.get((u, sl, Policy.BSS.value))
        if base is None:
            log.warning("missing BSS baseline for utilization=%s slot_length_us=%s; cell omitted", u, sl)
            continue
        b = math.fsum(base) / len(base)
        for p in policies:
            vals = cells.get((u, sl, p))
            if vals is None:
                log.warning("missing %s cell for utilization=%s slot_length_us=%s; row omitted", p, u, sl)
                continue
            v = math.fsum(vals) / len(vals)
            out.append(dict(utilization=u, slot_length_us=sl, policy=p, bss_power_w=b, power_w=v,
                            reduction_pct=reduction_pct(b, v)))
    return out


# csv i/o --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def dumps_csv(rows: list[dict], columns: list[str], kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# slotshift {kind} schema v{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    for r in rows:
        for k in ("utilization", "new_job_utilization", "mean_avg_power_w", "mean_package_power_w",
                  "avg_power_w", "package_power_w", "total_energy_j"):
            if r.get(k):
                r[k] = float(r[k])
        for k in ("slot_length_us", "runs", "deadline_misses", "errors", "case", "repetition"):
            if r.get(k):
                r[k] = int(r[k])
    return rows


def write_sweep(rows: list[dict], out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs, agg = out / "runs.csv", out / "aggregate.csv"
    runs.write_text(dumps_csv(rows, RUN_COLUMNS, "runs"))
    agg.write_text(dumps_csv(aggregate(rows), AGG_COLUMNS, "aggregate"))
    return runs, agg
