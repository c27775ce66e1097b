"""Energy-aware slot-shifting scheduler simulator."""
from .energy import FrequencyLadder, Platform, PowerCurve, SleepState
from .guarantee import AdmissionRequest, acceptance_test, admit, insert_job
from .model import UNIT, JobInstance, TaskSpec, VcpuSpec, map_vcpu_to_task
from .runtime import DeadlineMiss, Engine, Policy, SimResult
from .sim import HAVE_KERNEL, simulate
from .table import CoreTable, build_table, expand_jobs, verify_feasible
from .workload import GenSpec, Scenario, generate_taskset, uunifast

__version__ = "0.1.0"
