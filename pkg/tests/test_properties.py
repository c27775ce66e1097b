"""Property-based checks over randomly drawn tables and admissions."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import feasible_exhaustive, sc_closed_form

from slotshift.guarantee import acceptance_test, insert_job
from slotshift.model import JobInstance
from slotshift.table import build_table, verify_feasible
from slotshift.workload import uunifast

job_st = st.tuples(st.integers(0, 12), st.integers(1, 10), st.integers(1, 4))  # release, window, wcet


def _jobs(raw):
    return [JobInstance(task=k, index=0, release=r, deadline=r + w, wcet=min(c, w)) for k, (r, w, c) in enumerate(raw)]


@given(st.lists(job_st, max_size=6), st.integers(0, 5))
def test_spare_capacity_closed_form(raw, extra):
    jobs = _jobs(raw)
    horizon = max((j.deadline for j in jobs), default=1) + extra
    t = build_table(jobs, horizon)
    lens = [len(iv) for iv in t.intervals]
    dem = [sum(t.jobs[k].wcet for k in iv.jobs) for iv in t.intervals]
    assert [iv.sc for iv in t.intervals] == sc_closed_form(lens, dem)
    # intervals tile the horizon
    assert t.intervals[0].start == 0 and t.intervals[-1].end == horizon
    assert all(a.end == b.start for a, b in zip(t.intervals, t.intervals[1:]))


@given(st.lists(job_st, max_size=4), st.integers(1, 22), st.integers(0, 5))
def test_insert_keeps_eq2(raw, d, c):
    jobs = _jobs(raw)
    t = build_table(jobs, 22)
    insert_job(t, JobInstance(task=99, index=0, release=0, deadline=d, wcet=c), now=0)
    lens = [len(iv) for iv in t.intervals]
    dem = [sum(t.jobs[k].wcet for k in iv.jobs) for iv in t.intervals]
    assert [iv.sc for iv in t.intervals] == sc_closed_form(lens, dem)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(1, 12), st.integers(1, 4)), max_size=3),
       st.integers(1, 12), st.integers(1, 5))
def test_acceptance_never_admits_infeasible(raw, d, c):
    jobs = [JobInstance(task=k, index=0, release=0, deadline=dd, wcet=min(cc, dd)) for k, (dd, cc) in enumerate(raw)]
    t = build_table(jobs, 12)
    if not verify_feasible(t):
        return
    new = JobInstance(task=99, index=0, release=0, deadline=d, wcet=c)
    if acceptance_test(t, new, now=0):
        assert feasible_exhaustive([(j.release, j.deadline, j.wcet) for j in jobs + [new]])


@given(st.integers(1, 12), st.floats(0.05, 4.0), st.integers(0, 2**31))
def test_uunifast_sums_to_target(n, u, seed):
    us = uunifast(n, u, np.random.default_rng(seed))
    assert len(us) == n
    assert abs(sum(us) - u) < 1e-9
    assert min(us) >= -1e-12
