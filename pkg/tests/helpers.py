"""Scenario builders shared by the test modules."""
from slotshift.model import TaskSpec
from slotshift.workload import AperiodicSpec, GenSpec, Scenario, generate_taskset


def make_scenario(seed, u=0.5, unew=0.2, cores=4):
    return generate_taskset(GenSpec(utilization=u * cores, cores=cores, seed=seed,
                                    aperiodic=AperiodicSpec(unew * cores)))


def one_core(tasks, horizon, admissions=()):
    return Scenario(horizon=horizon, cores=1,
                    tasks=[TaskSpec(id=i, wcet=c, period=t) for i, (c, t) in enumerate(tasks)],
                    admissions=list(admissions))
