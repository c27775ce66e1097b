import numpy as np
import pytest
from oracles import uunifast_by_hand

from slotshift.table import build_table, expand_jobs, verify_feasible
from slotshift.workload import AperiodicSpec, GenSpec, Scenario, Unsatisfiable, generate_taskset, uunifast


class FixedDraws:
    def __init__(self, draws):
        self.draws = list(draws)

    def random(self):
        return self.draws.pop(0)


def test_uunifast_degenerate():
    assert uunifast(1, 0.5, np.random.default_rng(0)) == [0.5]


def test_uunifast_hand_evaluation():
    assert uunifast(2, 1.0, FixedDraws([0.25])) == pytest.approx([0.75, 0.25])
    assert uunifast(4, 0.9, FixedDraws([0.3, 0.6, 0.5])) == pytest.approx(
        uunifast_by_hand(4, 0.9, [0.3, 0.6, 0.5]))


def test_uunifast_sum_and_range():
    rng = np.random.default_rng(3)
    for n in (1, 3, 10):
        us = uunifast(n, 0.6, rng)
        assert len(us) == n and sum(us) == pytest.approx(0.6)
        assert all(0 <= u <= 0.6 for u in us)


def test_uunifast_mean_is_uniform_share():
    rng = np.random.default_rng(9)
    draws = np.array([uunifast(4, 1.0, rng) for _ in range(4000)])
    assert np.allclose(draws.mean(axis=0), 0.25, atol=0.02)


def test_generated_set_is_partitioned_and_feasible():
    for seed in range(20):
        sc = generate_taskset(GenSpec(utilization=0.2, cores=1, seed=seed))
        assert all(u <= 1 + 1e-12 for u in sc.core_utilization())
        for t in sc.tasks:
            assert 1 <= t.wcet <= 15 and 15 <= t.period <= 50
    for seed in range(10):
        sc = generate_taskset(GenSpec(utilization=3.2, cores=4, seed=seed,
                                      aperiodic=AperiodicSpec(0.8)))
        assert 1800 <= sc.horizon <= 2200
        assert all(u <= 1 + 1e-12 for u in sc.core_utilization())
        for c in range(4):
            jobs = expand_jobs([t for t in sc.tasks if t.core == c], sc.horizon)
            assert verify_feasible(build_table(jobs, sc.horizon))


def test_aperiodic_stream_shape():
    sc = generate_taskset(GenSpec(utilization=1.0, cores=2, seed=1, aperiodic=AperiodicSpec(0.4)))
    assert sc.admissions
    offered = sum(a.wcet for a in sc.admissions)
    assert offered >= 0.4 * sc.horizon
    assert offered - max(a.wcet for a in sc.admissions) < 0.4 * sc.horizon
    for a in sc.admissions:
        assert 10 <= a.wcet <= 15
        assert a.wcet <= a.deadline - a.arrival <= 15
        assert 0 <= a.arrival and a.deadline <= sc.horizon
        assert a.preferred_core in (0, 1)
    assert [a.arrival for a in sc.admissions] == sorted(a.arrival for a in sc.admissions)


def test_unsatisfiable():
    with pytest.raises(Unsatisfiable):
        GenSpec(utilization=8.0, cores=4)
    with pytest.raises(Unsatisfiable):
        # the WCET floor of 10 lifts three ~0.33 tasks to >= 0.62 each
        generate_taskset(GenSpec(utilization=1.0, cores=1, n_tasks=3, wcet_range=(10, 15),
                                 period_range=(15, 16), max_attempts=20))


def test_same_seed_same_bytes(tmp_path):
    spec = GenSpec(utilization=2.0, cores=4, seed=42, aperiodic=AperiodicSpec(0.4))
    generate_taskset(spec).save(tmp_path / "a.json")
    generate_taskset(spec).save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    sc = Scenario.load(tmp_path / "a.json")
    assert sc.dumps() == (tmp_path / "a.json").read_text()


def test_genspec_from_dict():
    spec = GenSpec.from_dict({"utilization": 1.2, "cores": 4, "period_range": [20, 30],
                              "aperiodic": {"utilization": 0.2}, "cases": 5})
    assert spec.period_range == (20, 30) and spec.aperiodic.utilization == 0.2
