import json
import logging

import pytest

from slotshift.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main
from slotshift.energy import Platform
from slotshift.experiment import (AGG_COLUMNS, RUN_COLUMNS, ExperimentGrid, aggregate, compare, dumps_csv, read_csv,
                                  reduction_pct, run_sweep, write_sweep)
from slotshift.workload import Scenario


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_generate_writes_requested_cases(tmp_path):
    spec = _write(tmp_path / "g.json", {"utilization": 1.2, "cores": 4, "cases": 3,
                                        "aperiodic": {"utilization": 0.4}})
    assert main(["--seed", "1", "generate", spec, str(tmp_path / "out")]) == EXIT_OK
    files = sorted((tmp_path / "out").glob("*.json"))
    assert len(files) == 3
    # same seed, same bytes
    assert main(["generate", spec, str(tmp_path / "again"), "--seed", "1"]) == EXIT_OK
    assert [f.read_bytes() for f in files] == [f.read_bytes() for f in sorted((tmp_path / "again").glob("*.json"))]


def test_missing_files_are_usage_errors(tmp_path, capsys):
    assert main(["generate", str(tmp_path / "nope.json"), str(tmp_path)]) == EXIT_USAGE
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert "not found" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "x.json", "--policy", "turbo"])


def test_run_empty_scenario(tmp_path, capsys):
    sc = _write(tmp_path / "s.json", {"horizon_slots": 100, "cores": 1, "tasks": [], "admissions": []})
    assert main(["run", sc]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["avg_power_w"] == pytest.approx(Platform().p_idle_w)
    assert res["deadline_misses"] == 0
    for key in ("total_energy_j", "admissions", "sleep_transitions", "per_state_residency", "freq_histogram",
                "best_effort_slots", "runtime_wall_ms"):
        assert key in res
    # DPM: one long idle window beats break-even
    assert main(["run", sc, "--policy", "EASS-DPM"]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    p = Platform()
    st = p.sleep_states[0]
    want = (st.transition_j + 100 * p.slot_s * st.power_w) / (100 * p.slot_s)
    assert res["avg_power_w"] == pytest.approx(want)
    assert res["avg_power_w"] < p.p_idle_w


def test_run_infeasible_and_miss_exit_codes(tmp_path):
    bad = _write(tmp_path / "b.json", {"horizon_slots": 8, "cores": 1,
                                       "tasks": [{"id": 0, "core": 0, "wcet": 3, "period": 4},
                                                 {"id": 1, "core": 0, "wcet": 2, "period": 4}]})
    assert main(["run", bad]) == EXIT_INFEASIBLE
    ok = _write(tmp_path / "ok.json", {"horizon_slots": 8, "cores": 1,
                                       "tasks": [{"id": 0, "core": 0, "wcet": 1, "period": 4}]})
    assert main(["run", ok, "--out", str(tmp_path / "r.json"), "--strict"]) == EXIT_OK


def test_run_trace_and_tables(tmp_path):
    sc = _write(tmp_path / "s.json", {"horizon_slots": 8, "cores": 2,
                                      "tasks": [{"id": 0, "core": 0, "wcet": 1, "period": 4}]})
    out = tmp_path / "r.json"
    assert main(["--trace", str(tmp_path / "t.csv"), "run", sc, "--out", str(out),
                 "--dump-tables", str(tmp_path / "tab.json")]) == EXIT_OK
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "slot,core,action,job,f_slot,sc_current" and len(lines) == 1 + 8 * 2
    assert json.loads(out.read_text())["backend"] == "python"
    tabs = json.loads((tmp_path / "tab.json").read_text())
    assert tabs["0"][0] == {"start": 0, "end": 4, "sc": 3, "job_ids": [[0, 0]]}


def test_default_grid_size():
    assert ExperimentGrid().n_runs() == 5670


def test_one_cell_sweep_and_compare(tmp_path):
    grid = _write(tmp_path / "grid.json", {"utilizations": [0.3], "new_job_utilizations": [0.1],
                                           "slot_lengths_us": [1000], "cases_per_cell": 1, "repetitions": 1,
                                           "policies": ["BSS"]})
    assert main(["sweep", grid, str(tmp_path / "o")]) == EXIT_OK
    runs = (tmp_path / "o" / "runs.csv").read_text().splitlines()
    agg = (tmp_path / "o" / "aggregate.csv").read_text().splitlines()
    assert runs[0].startswith("# slotshift runs schema v1") and len(runs) == 3
    assert agg[1] == ",".join(AGG_COLUMNS) and len(agg) == 3
    # compare without an energy-aware policy is a diagnostic, not a crash
    assert main(["compare", str(tmp_path / "o")]) == EXIT_USAGE


def test_sweep_parallel_is_byte_identical(tmp_path):
    g = ExperimentGrid(utilizations=[0.2, 0.6], new_job_utilizations=[0.2], slot_lengths_us=[1000, 10000],
                       cases_per_cell=2, repetitions=2)
    write_sweep(run_sweep(g, jobs=1), tmp_path / "a")
    write_sweep(run_sweep(g, jobs=2), tmp_path / "b")
    for name in ("runs.csv", "aggregate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_csv(tmp_path / "a" / "runs.csv")
    assert len(rows) == g.n_runs() and not any(r["error"] for r in rows)


def test_reduction_arithmetic():
    assert reduction_pct(3.0, 2.1) == pytest.approx(30.0)
    assert reduction_pct(2.0, 2.0) == 0.0


def test_compare_omits_missing_cells(caplog):
    agg = [
        dict(utilization=0.2, slot_length_us=1000, policy="BSS", mean_avg_power_w=3.0),
        dict(utilization=0.2, slot_length_us=1000, policy="EASS-DVFS", mean_avg_power_w=2.1),
        dict(utilization=0.3, slot_length_us=1000, policy="BSS", mean_avg_power_w=3.0),
        dict(utilization=0.4, slot_length_us=1000, policy="EASS-DVFS", mean_avg_power_w=2.0),
    ]
    with caplog.at_level(logging.WARNING):
        rows = compare(agg)
    assert [(r["utilization"], r["policy"]) for r in rows] == [(0.2, "EASS-DVFS")]
    assert rows[0]["reduction_pct"] == pytest.approx(30.0)
    assert "missing" in caplog.text
    with pytest.raises(ValueError):
        compare([r for r in agg if r["policy"] != "BSS"])


def test_partial_failures_recorded_per_row():
    g = ExperimentGrid(utilizations=[0.2], new_job_utilizations=[0.1], slot_lengths_us=[1000],
                       cases_per_cell=1, repetitions=1, policies=["BSS"])
    rows = run_sweep(g, platform=Platform())
    rows.append(dict(rows[0], repetition=1, error="Boom", avg_power_w=None))
    agg = aggregate(rows)
    assert agg[0]["runs"] == 1 and agg[0]["errors"] == 1
    assert "Boom" in dumps_csv(rows, RUN_COLUMNS, "runs")


def test_scenario_file_roundtrip(tmp_path):
    sc = Scenario.from_dict({"horizon_slots": 10, "cores": 1, "tasks": [{"id": 0, "core": 0, "wcet": 1,
                                                                        "period": 5}],
                             "admissions": [{"arrival": 1, "wcet": 2, "deadline": 8, "preferred_core": None}]})
    sc.save(tmp_path / "s.json")
    assert Scenario.load(tmp_path / "s.json") == sc
