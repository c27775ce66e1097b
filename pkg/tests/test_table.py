import json

import numpy as np
import pytest
from oracles import edf_trace, intervals_by_hand, sc_closed_form

from slotshift.model import JobInstance, TaskSpec
from slotshift.table import (TableError, build_intervals, build_table, dump_tables, expand_jobs, hyperperiod,
                             verify_feasible)


def J(task, r, d, c, index=0):
    return JobInstance(task=task, index=index, release=r, deadline=d, wcet=c)


def layout(table):
    return [(iv.start, iv.end, sorted(iv.jobs)) for iv in table.intervals]


def test_intervals_two_deadlines_and_trailing_gap():
    t = build_intervals([J(1, 0, 10, 4), J(0, 0, 5, 2)], horizon=12)
    assert layout(t) == [(0, 5, [(0, 0)]), (5, 10, [(1, 0)]), (10, 12, [])]
    assert t.intervals[2].empty


def test_intervals_no_jobs():
    t = build_intervals([], horizon=10)
    assert layout(t) == [(0, 10, [])]


def test_interval_start_is_max_of_prev_end_and_release():
    t = build_intervals([J(0, 0, 4, 2), J(1, 2, 6, 4)], horizon=6)
    assert layout(t) == [(0, 4, [(0, 0)]), (4, 6, [(1, 0)])]


def test_gap_before_late_release_becomes_empty_interval():
    t = build_intervals([J(0, 0, 3, 1), J(1, 5, 9, 2)], horizon=9)
    assert layout(t) == [(0, 3, [(0, 0)]), (3, 5, []), (5, 9, [(1, 0)])]


def test_deadline_beyond_horizon_rejected():
    with pytest.raises(TableError):
        build_intervals([J(0, 0, 20, 1)], horizon=10)


@pytest.mark.parametrize("jobs,horizon,expected", [
    ([J(0, 0, 5, 2), J(1, 0, 10, 4)], 12, [3, 1, 2]),
    ([J(0, 0, 4, 2), J(1, 2, 6, 4)], 6, [0, -2]),
    ([], 10, [10]),
])
def test_spare_capacity_examples(jobs, horizon, expected):
    assert [iv.sc for iv in build_table(jobs, horizon).intervals] == expected


def test_spare_capacity_matches_closed_form_on_random_tables():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        jobs = []
        for k in range(n):
            r = int(rng.integers(0, 20))
            d = r + int(rng.integers(1, 12))
            jobs.append(J(k, r, d, int(rng.integers(1, 6))))
        horizon = max(j.deadline for j in jobs) + int(rng.integers(0, 4))
        table = build_table(jobs, horizon)
        ref = intervals_by_hand([(j.release, j.deadline, j.wcet) for j in jobs], horizon)
        assert [(iv.start, iv.end) for iv in table.intervals] == [(s, e) for s, e, _ in ref]
        want = sc_closed_form([e - s for s, e, _ in ref], [c for _, _, c in ref])
        assert [iv.sc for iv in table.intervals] == want


def test_verify_feasible_examples():
    assert verify_feasible(build_table([J(0, 0, 5, 2), J(1, 0, 10, 4)], 12))
    assert not verify_feasible(build_table([J(0, 0, 4, 4), J(1, 2, 6, 4)], 6))
    assert verify_feasible(build_table([], 8))


def test_verify_feasible_agrees_with_edf_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        jobs = []
        for k in range(int(rng.integers(1, 6))):
            r = int(rng.integers(0, 10))
            jobs.append(J(k, r, r + int(rng.integers(1, 8)), int(rng.integers(1, 5))))
        horizon = max(j.deadline for j in jobs)
        trace = edf_trace([((j.deadline, j.task), j.release, j.deadline, j.wcet) for j in jobs], horizon)
        ok = all(
            sum(1 for t in range(j.release, j.deadline) if trace[t] == (j.deadline, j.task)) == j.wcet
            for j in jobs
        )
        assert verify_feasible(build_table(jobs, horizon)) == ok


def test_nonnegative_current_sc_iff_feasible_from_zero():
    rng = np.random.default_rng(5)
    for _ in range(300):
        jobs = [J(k, 0, int(rng.integers(1, 15)), int(rng.integers(1, 5))) for k in range(int(rng.integers(1, 5)))]
        table = build_table(jobs, 15)
        assert (min(iv.sc for iv in table.intervals[:1]) >= 0) == verify_feasible(table)


def test_hyperperiod_and_expansion():
    tasks = [TaskSpec(0, 1, 4), TaskSpec(1, 2, 6)]
    assert hyperperiod(tasks) == 12
    jobs = expand_jobs(tasks, 12)
    assert len(jobs) == 3 + 2
    assert all(j.deadline <= 12 for j in jobs)
    with pytest.raises(TableError):
        hyperperiod([TaskSpec(0, 1, 97), TaskSpec(1, 1, 89)], cap=1000)


def test_table_lookup_and_dump():
    t = build_table([J(0, 0, 5, 2), J(1, 0, 10, 4)], 12)
    assert t.find(0) == 0 and t.find(5) == 1 and t.find(11) == 2
    with pytest.raises(TableError):
        t.find(12)
    assert t.interval_of(t.jobs[(1, 0)]) == 1
    d = json.loads(dump_tables([t]))
    assert d["0"][0] == {"start": 0, "end": 5, "sc": 3, "job_ids": [[0, 0]]}
