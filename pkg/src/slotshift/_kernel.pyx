# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation loop.

Mirrors ``slotshift.runtime.Engine`` slot for slot on flat C++ vectors.
Tables are built in Python and passed in; the kernel returns raw counters
that ``slotshift.sim`` turns into a ``SimResult``.
"""
from libc.stdint cimport int64_t
from libcpp.vector cimport vector

cdef int64_t UNIT = 1000000000
cdef int64_t TOL = 1

cdef struct Iv:
    int64_t start
    int64_t end
    int64_t sc
    int64_t pending

cdef struct Job:
    int64_t release
    int64_t deadline
    int64_t wcet
    int64_t task
    int64_t index
    int64_t remaining
    int64_t reserved
    int64_t credited


cdef inline bint before(Job* a, Job* b) nogil:
    if a.deadline != b.deadline:
        return a.deadline < b.deadline
    if a.task != b.task:
        return a.task < b.task
    return a.index < b.index


cdef Py_ssize_t interval_of(vector[Iv]& ivs, int64_t deadline) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = ivs.size(), mid
    while lo < hi:
        mid = (lo + hi) // 2
        if ivs[mid].end < deadline:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t pick(vector[Job]& jobs, vector[Py_ssize_t]& ready) noexcept nogil:
    cdef Py_ssize_t best = -1, k
    for k in range(<Py_ssize_t>ready.size()):
        if best < 0 or before(&jobs[ready[k]], &jobs[ready[best]]):
            best = k
    return best


cdef void drop_ready(vector[Py_ssize_t]& ready, Py_ssize_t k) noexcept nogil:
    ready[k] = ready[ready.size() - 1]
    ready.pop_back()


cdef int64_t usable_capacity(vector[Iv]& ivs, Py_ssize_t cur, int64_t d, int64_t now) noexcept nogil:
    cdef int64_t usable = 0, head, start
    cdef Py_ssize_t i = cur
    while i < <Py_ssize_t>ivs.size():
        if ivs[i].end <= d:
            if ivs[i].sc > 0:
                usable += ivs[i].sc
            if ivs[i].end == d:
                break
        else:
            start = ivs[i].start if ivs[i].start > now else now
            head = d - start
            if ivs[i].sc < head:
                head = ivs[i].sc
            if head > 0:
                usable += head
            break
        i += 1
    return usable


cdef void insert_job(vector[Iv]& ivs, Py_ssize_t cur, int64_t d, int64_t wcet, int64_t now) noexcept nogil:
    cdef Py_ssize_t i = interval_of(ivs, d), k
    cdef int64_t old_sc = ivs[i].sc, new_sc, head, delta, s
    cdef Iv first, tail
    if ivs[i].end == d:
        ivs[i].pending += 1
        ivs[i].sc -= wcet
        new_sc = ivs[i].sc
    else:
        if i == cur:
            s = ivs[i].start if ivs[i].start > now else now
        else:
            s = ivs[i].start
        head = d - s
        tail.start = d
        tail.end = ivs[i].end
        tail.sc = ivs[i].sc - head
        tail.pending = ivs[i].pending
        first.start = ivs[i].start
        first.end = d
        first.pending = 1
        first.sc = head - wcet + (tail.sc if tail.sc < 0 else 0)
        ivs[i] = tail
        ivs.insert(ivs.begin() + i, first)
        new_sc = first.sc
    k = i - 1
    while k >= cur:
        delta = (new_sc if new_sc < 0 else 0) - (old_sc if old_sc < 0 else 0)
        if delta == 0:
            break
        old_sc = ivs[k].sc
        ivs[k].sc += delta
        new_sc = ivs[k].sc
        k -= 1


def simulate_arrays(int64_t horizon, int policy, list core_ivs, list core_jobs, object requests,
                    object level_units, object levels, object be_s, object lat, object res,
                    double slot_s, bint best_effort, bint strict, bint low_idle):
    """Run one scenario. ``policy``: 0 BSS, 1 EASS-DPM, 2 EASS-DVFS."""
    cdef Py_ssize_t ncores = len(core_ivs)
    cdef Py_ssize_t nlev = len(levels), nst = len(be_s)
    cdef vector[vector[Iv]] ivs = vector[vector[Iv]](ncores)
    cdef vector[vector[Job]] jobs = vector[vector[Job]](ncores)
    cdef vector[vector[Py_ssize_t]] ready = vector[vector[Py_ssize_t]](ncores)
    cdef vector[Py_ssize_t] nxt = vector[Py_ssize_t](ncores, 0)
    cdef vector[Py_ssize_t] nperiodic = vector[Py_ssize_t](ncores, 0)
    cdef vector[Py_ssize_t] cur = vector[Py_ssize_t](ncores, 0)
    cdef vector[int64_t] wake = vector[int64_t](ncores, 0)
    cdef vector[Py_ssize_t] sstate = vector[Py_ssize_t](ncores, 0)
    cdef vector[int64_t] lu, lat_v, res_v
    cdef vector[double] lv, be_v
    cdef vector[int64_t] run_ct = vector[int64_t](ncores * nlev, 0)
    cdef vector[int64_t] sleep_ct = vector[int64_t](ncores * nst, 0)
    cdef vector[int64_t] trans_ct = vector[int64_t](ncores * nst, 0)
    cdef vector[int64_t] idle_ct = vector[int64_t](ncores, 0)
    cdef vector[int64_t] idle_low_ct = vector[int64_t](ncores, 0)
    cdef vector[int64_t] be_ct = vector[int64_t](ncores, 0)
    cdef Iv iv
    cdef Job jb
    cdef Job* job
    cdef Py_ssize_t c, k, n, i, j, r, nreq, next_req = 0, lvl, st, order_k, cc
    cdef int64_t now, d, dur, spare, f_units, dec
    cdef int64_t offered = 0, accepted = 0, delegated = 0, rejected = 0
    cdef int64_t eq4_v = 0, dpm_v = 0, res_v_ct = 0, sc_updates = 0, sleep_entries = 0, dvfs_runs = 0
    cdef double ideal, window
    cdef bint aborted = False, ok, admitted
    cdef int64_t a_arr, a_wcet, a_dl, a_pref, a_task, blocked, start
    misses = []

    for k in range(nlev):
        lu.push_back(level_units[k])
        lv.push_back(levels[k])
    for k in range(nst):
        be_v.push_back(be_s[k])
        lat_v.push_back(lat[k])
        res_v.push_back(res[k])

    for c in range(ncores):
        for row in core_ivs[c]:
            iv.start = row[0]
            iv.end = row[1]
            iv.sc = row[2]
            iv.pending = row[3]
            ivs[c].push_back(iv)
        for row in core_jobs[c]:
            jb.release = row[0]
            jb.deadline = row[1]
            jb.wcet = row[2]
            jb.task = row[3]
            jb.index = row[4]
            jb.remaining = jb.wcet * UNIT
            jb.reserved = 0
            jb.credited = 0
            jobs[c].push_back(jb)
        nperiodic[c] = jobs[c].size()

    nreq = len(requests)
    cdef vector[int64_t] req = vector[int64_t](nreq * 5)
    for r in range(nreq):
        for k in range(5):
            req[r * 5 + k] = requests[r][k]

    now = 0
    while now < horizon and not aborted:
        for c in range(ncores):
            while cur[c] < <Py_ssize_t>ivs[c].size() and ivs[c][cur[c]].end <= now:
                cur[c] += 1

        # admissions arriving this slot
        while next_req < nreq and req[next_req * 5] <= now:
            a_arr = req[next_req * 5]
            a_wcet = req[next_req * 5 + 1]
            a_dl = req[next_req * 5 + 2]
            a_pref = req[next_req * 5 + 3]
            a_task = req[next_req * 5 + 4]
            next_req += 1
            offered += 1
            admitted = False
            if a_arr == now and a_dl > a_arr and a_dl - a_arr >= a_wcet and a_dl <= horizon:
                for order_k in range(ncores):
                    if 0 <= a_pref < ncores:
                        if order_k == 0:
                            cc = a_pref
                        else:
                            cc = order_k - 1
                            if cc >= a_pref:
                                cc += 1
                    else:
                        cc = order_k
                    if a_wcet > 0:
                        blocked = wake[cc] if wake[cc] > now else now
                        start = blocked if blocked > a_arr else a_arr
                        if a_dl - start < a_wcet:
                            continue
                        if usable_capacity(ivs[cc], cur[cc], a_dl, now) - (start - now) < a_wcet:
                            continue
                    insert_job(ivs[cc], cur[cc], a_dl, a_wcet, now)
                    jb.release = a_arr
                    jb.deadline = a_dl
                    jb.wcet = a_wcet
                    jb.task = a_task
                    jb.index = 0
                    jb.remaining = a_wcet * UNIT
                    jb.reserved = 0
                    jb.credited = 0
                    jobs[cc].push_back(jb)
                    ready[cc].push_back(jobs[cc].size() - 1)
                    if a_wcet == 0:
                        # nothing to run; keep interval bookkeeping consistent
                        i = interval_of(ivs[cc], a_dl)
                        ivs[cc][i].pending -= 1
                        ready[cc].pop_back()
                    admitted = True
                    accepted += 1
                    if 0 <= a_pref < ncores and cc != a_pref:
                        delegated += 1
                    break
            if not admitted:
                rejected += 1

        for c in range(ncores):
            # releases
            while nxt[c] < nperiodic[c] and jobs[c][nxt[c]].release <= now:
                ready[c].push_back(nxt[c])
                nxt[c] += 1
            # deadline checks
            while True:
                k = pick(jobs[c], ready[c])
                if k < 0 or jobs[c][ready[c][k]].deadline > now:
                    break
                job = &jobs[c][ready[c][k]]
                misses.append((job.task, job.index))
                ivs[c][interval_of(ivs[c], job.deadline)].pending -= 1
                drop_ready(ready[c], k)
                if strict:
                    aborted = True
                    break
            if aborted:
                break

            job = NULL
            f_units = 0
            if wake[c] > now:
                sleep_ct[c * nst + sstate[c]] += 1
            else:
                k = pick(jobs[c], ready[c])
                if k >= 0:
                    job = &jobs[c][ready[c][k]]
                    lvl = nlev - 1
                    if policy == 2:
                        i = interval_of(ivs[c], job.deadline)
                        spare = (ivs[c][i].sc if ivs[c][i].sc > 0 else 0) * UNIT + job.reserved
                        j = cur[c]
                        while j != i and ivs[c][j].pending == 0 and ivs[c][j].sc > 0:
                            spare += ivs[c][j].sc * UNIT
                            j += 1
                        ideal = <double>job.remaining / (<double>job.remaining + <double>spare)
                        lvl = nlev - 1
                        for n in range(nlev):
                            if lv[n] >= ideal:
                                lvl = n
                                break
                        dvfs_runs += 1
                        if lv[lvl] < ideal - 1e-9:
                            eq4_v += 1
                    f_units = lu[lvl]
                    dec = f_units if f_units < job.remaining else job.remaining
                    job.remaining -= dec
                    run_ct[c * nlev + lvl] += 1
                else:
                    st = -1
                    if policy == 1:
                        j = cur[c]
                        dur = 0
                        if j < <Py_ssize_t>ivs[c].size():
                            dur = ivs[c][j].sc
                            if ivs[c][j].pending == 0:
                                j += 1
                                while j < <Py_ssize_t>ivs[c].size():
                                    if ivs[c][j].sc > 0:
                                        dur += ivs[c][j].sc
                                    if ivs[c][j].pending:
                                        break
                                    j += 1
                        if dur < 0:
                            dur = 0
                        window = dur * slot_s
                        for n in range(nst - 1, -1, -1):
                            if lat_v[n] + res_v[n] > dur:
                                continue
                            if be_v[n] <= window:
                                st = n
                                break
                    if st >= 0:
                        if dur > horizon - now:
                            dur = horizon - now
                        ok = be_v[st] <= dur * slot_s and lat_v[st] + res_v[st] <= dur
                        sleep_entries += 1
                        if not ok:
                            dpm_v += 1
                        wake[c] = now + dur
                        sstate[c] = st
                        sleep_ct[c * nst + st] += 1
                        trans_ct[c * nst + st] += 1
                    elif best_effort:
                        be_ct[c] += 1
                    elif low_idle:
                        idle_low_ct[c] += 1
                    else:
                        idle_ct[c] += 1

            # spare-capacity maintenance
            ivs[c][cur[c]].sc -= 1
            if job != NULL:
                job.reserved += f_units
                while job.reserved >= UNIT:
                    job.reserved -= UNIT
                    job.credited += 1
                    i = interval_of(ivs[c], job.deadline)
                    d = ivs[c][i].sc
                    ivs[c][i].sc += 1
                    while d < 0 and i > cur[c]:
                        i -= 1
                        d = ivs[c][i].sc
                        ivs[c][i].sc += 1
                if job.reserved < 0 or job.reserved >= UNIT:
                    res_v_ct += 1
                if job.remaining <= TOL:
                    ivs[c][interval_of(ivs[c], job.deadline)].pending -= 1
                    drop_ready(ready[c], k)
            sc_updates += 1
        now += 1

    if not aborted:
        for c in range(ncores):
            while True:
                k = pick(jobs[c], ready[c])
                if k < 0 or jobs[c][ready[c][k]].deadline > horizon:
                    break
                job = &jobs[c][ready[c][k]]
                misses.append((job.task, job.index))
                drop_ready(ready[c], k)
            for k in range(nxt[c], nperiodic[c]):
                misses.append((jobs[c][k].task, jobs[c][k].index))

    return {
        "run": [[run_ct[c * nlev + k] for k in range(nlev)] for c in range(ncores)],
        "sleep": [[sleep_ct[c * nst + k] for k in range(nst)] for c in range(ncores)],
        "transitions": [[trans_ct[c * nst + k] for k in range(nst)] for c in range(ncores)],
        "idle": [idle_ct[c] for c in range(ncores)],
        "idle_low": [idle_low_ct[c] for c in range(ncores)],
        "best_effort": [be_ct[c] for c in range(ncores)],
        "misses": misses,
        "aborted": aborted,
        "admissions": {"offered": offered, "accepted": accepted, "delegated": delegated,
                       "rejected": rejected},
        "checks": {"eq4_violations": eq4_v, "dpm_violations": dpm_v,
                   "reserved_violations": res_v_ct, "sc_updates": sc_updates,
                   "sleep_entries": sleep_entries, "dvfs_run_slots": dvfs_runs},
    }
