import csv
import subprocess
import sys
from importlib import resources

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import make_record
from procbench import cli
from procbench.procurement import tco
from procbench.scaling import load_series
from procbench.store import ResultStore

ARBOR_CSV = str(resources.files("procbench").joinpath("data/arbor-strong.csv"))
EXAMPLE_MODEL = str(resources.files("procbench").joinpath("data/procurement-example.yaml"))

REFERENCE_ONLY = """
reference_system: &ref
  name: reference
  nodes: 936
  node_peak_flops: 78.125e+12
  devices_per_node: 4
  device_memory_bytes: 40000000000
  avg_power_watts: 2.0e+6
  capex_currency: 1.0e+8
  energy_price_per_kwh: 0.25
  lifetime_hours: 43800
  availability: 0.9
references:
  - {benchmark: a, reference_nodes: 8, reference_runtime_seconds: 498, weight: 0.25}
  - {benchmark: b, reference_nodes: 16, reference_runtime_seconds: 100, weight: 0.5}
proposals:
  - system: *ref
    commitments:
      - {benchmark: a, committed_runtime_seconds: 498, committed_nodes: 8}
      - {benchmark: b, committed_runtime_seconds: 100, committed_nodes: 16}
"""


def run(argv):
    args = cli.build_parser().parse_args(argv)
    return args.func(args)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ------------------------------------------------------------ run

def test_run_writes_one_row_per_workpackage(tmp_path):
    outcome = run(["run", "--platform", "simulated", "--benchmark", "amdahl-sleeper",
                   "--output-dir", str(tmp_path), "--run-id", "r"])
    assert outcome.exit_status == 0
    rows = read_csv(tmp_path / "runs" / "r" / "results.csv")
    assert rows[0] == ["benchmark", "tags", "nodes", "fom_s", "status"]
    assert rows[1:] == [["amdahl-sleeper", "-", str(n), repr(10 + 80 / n), "success"] for n in (1, 2, 4, 8)]
    stored = ResultStore(tmp_path / "store.jsonl").records()
    assert [r.run_id for r in stored] == [f"r/amdahl-sleeper/{i}" for i in range(4)]
    assert (tmp_path / "runs" / "r" / "amdahl-sleeper" / "0" / "execute" / "stdout.txt").exists()


def test_run_with_invalid_definitions_writes_nothing(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nsteps: []\n")
    out = tmp_path / "out"
    outcome = run(["run", "--definitions", str(bad), "--output-dir", str(out)])
    assert outcome.exit_status == 2
    assert not (out / "store.jsonl").exists()


def test_run_unknown_benchmark_is_usage_error(tmp_path):
    assert run(["run", "--benchmark", "nope", "--output-dir", str(tmp_path)]).exit_status == 2


def test_run_failure_exit_status(tmp_path):
    outcome = run(["run", "--platform", "simulated", "--benchmark", "ior-easy", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 1
    assert ResultStore(tmp_path / "store.jsonl").records()[0].status == "step-failure"


def test_run_same_run_id_twice_is_collision(tmp_path):
    argv = ["run", "--platform", "simulated", "--benchmark", "amdahl-sleeper", "--output-dir", str(tmp_path),
            "--run-id", "x"]
    assert run(argv).exit_status == 0
    assert run(argv).exit_status == 2


def test_run_is_deterministic(tmp_path):
    tables = []
    for i in range(2):
        run(["run", "--platform", "simulated", "--tags", "noisy", "--seed", "3", "--benchmark", "amdahl-sleeper",
             "--output-dir", str(tmp_path / str(i)), "--run-id", "r"])
        tables.append((tmp_path / str(i) / "runs" / "r" / "results.csv").read_bytes())
    assert tables[0] == tables[1]


# ------------------------------------------------------------ analyze

def test_analyze_arbor_fixture(tmp_path):
    outcome = run(["analyze", "--series", ARBOR_CSV, "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    rel = read_csv(tmp_path / "arbor-strong-strong-relative.csv")
    assert [(float(x), round(float(y), 4)) for x, y in rel[1:]] == [
        (0.5, 1.3313), (1.0, 1.0), (1.5, 0.6667), (2.0, 0.502)]
    eff = read_csv(tmp_path / "arbor-strong-strong-efficiency.csv")
    assert float(eff[-1][1]) == pytest.approx(498 / 250)
    # the exported series reads back unchanged
    exported = load_series(tmp_path / "arbor-strong-strong-series.csv")
    original = load_series(ARBOR_CSV)
    assert (exported.points, exported.reference_index) == (original.points, original.reference_index)


def test_analyze_weak_mode(tmp_path):
    series = tmp_path / "w.csv"
    series.write_text("nodes,runtime_s\n1*,10\n4,12.5\n")
    assert run(["analyze", "--mode", "weak", "--series", str(series), "--output-dir", str(tmp_path)]).exit_status == 0
    assert read_csv(tmp_path / "w-weak-efficiency.csv")[1:] == [["1", "1.0"], ["4", "0.8"]]


def test_analyze_from_store_recovers_amdahl(tmp_path):
    run(["run", "--platform", "simulated", "--benchmark", "amdahl-sleeper", "--output-dir", str(tmp_path)])
    outcome = run(["analyze", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    assert "t_s=10 s, t_p=80 s" in outcome.summary
    assert "reference 8 nodes" in outcome.summary


def test_analyze_empty_store_is_usage_error(tmp_path):
    assert run(["analyze", "--output-dir", str(tmp_path)]).exit_status == 2


# ------------------------------------------------------------ evaluate

def test_evaluate_reference_as_proposal(tmp_path):
    model = tmp_path / "m.yaml"
    model.write_text(REFERENCE_ONLY)
    outcome = run(["evaluate", str(model), "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    ranking = read_csv(tmp_path / "evaluation-ranking.csv")
    expected_tco = 1e8 + 2000 * 43800 * 0.9 * 0.25
    assert float(ranking[1][2]) == pytest.approx(0.75)
    assert float(ranking[1][4]) == pytest.approx(0.75 / expected_tco)


def test_evaluate_ranks_bundled_example(tmp_path):
    outcome = run(["evaluate", EXAMPLE_MODEL, "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    ranking = read_csv(tmp_path / "evaluation-ranking.csv")
    assert [r[1] for r in ranking[1:]] == ["fast", "slow"]
    assert "high-scaling hs-app committed/reference = 0.6667" in outcome.summary


@pytest.mark.parametrize("text", ["reference_system: [", "proposals: 3\n", REFERENCE_ONLY.replace("936", "-1")])
def test_evaluate_malformed_model(tmp_path, text):
    model = tmp_path / "m.yaml"
    model.write_text(text)
    assert run(["evaluate", str(model), "--output-dir", str(tmp_path)]).exit_status == 2


def test_evaluate_missing_file(tmp_path):
    assert run(["evaluate", str(tmp_path / "none.yaml"), "--output-dir", str(tmp_path)]).exit_status == 2


# ------------------------------------------------------------ ci check and report

def fill(path, history, new, **kw):
    store = ResultStore(path)
    for i, t in enumerate(history):
        store.append(make_record(t, run_id=f"h{i}", **kw))
    if new is not None:
        store.append(make_record(new, run_id="new", **kw))


@pytest.mark.parametrize("new, status", [(106.0, 1), (104.0, 0), (50.0, 0)])
def test_ci_check(tmp_path, new, status):
    fill(tmp_path / "store.jsonl", [100.0, 102.0, 98.0], new)
    outcome = run(["ci", "check", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == status
    rows = read_csv(tmp_path / "ci-findings.csv")
    assert rows[1][6] == ("fail" if status else "info")


def test_ci_check_empty_store(tmp_path):
    outcome = run(["ci", "check", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    assert "empty" in outcome.summary


def test_ci_check_flags_before_subcommand(tmp_path):
    fill(tmp_path / "s.jsonl", [100.0], 104.0)
    assert cli.main(["--store", str(tmp_path / "s.jsonl"), "--output-dir", str(tmp_path),
                     "ci", "check", "--threshold", "0.01"]) == 1


def test_report(tmp_path):
    fill(tmp_path / "store.jsonl", [100.0, 102.0, 98.0], 106.0)
    outcome = run(["report", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    rows = read_csv(tmp_path / "report.csv")
    assert rows[1] == ["arbor", "-", "8", "4", "4", "106", "success", "101"]


def test_validate_and_schema(tmp_path):
    outcome = run(["validate", "--schema", "--output-dir", str(tmp_path)])
    assert outcome.exit_status == 0
    assert "5 definition(s) valid" in outcome.summary
    assert (tmp_path / "schema.md").read_text().startswith("#")


# ------------------------------------------------------------ usage errors

@pytest.mark.parametrize("argv", [
    [], ["frobnicate"], ["run", "--max-parallel", "0"], ["ci", "check", "--window", "0"],
    ["ci", "check", "--threshold", "-1"], ["analyze", "--mode", "diagonal"], ["evaluate"], ["ci"],
    ["run", "--seed", "abc"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.text(max_size=200))
def test_fuzzed_definition_files_never_crash(tmp_path, text):
    path = tmp_path / "fuzz.yaml"
    path.write_text(text, encoding="utf-8")
    outcome = run(["validate", "--definitions", str(path), "--output-dir", str(tmp_path)])
    assert outcome.exit_status in (0, 2)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.text(max_size=200))
def test_fuzzed_procurement_models_never_crash(tmp_path, text):
    path = tmp_path / "model.yaml"
    path.write_text(text, encoding="utf-8")
    assert run(["evaluate", str(path), "--output-dir", str(tmp_path)]).exit_status == 2


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "procbench", "validate", "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "definition(s) valid" in proc.stdout


def test_tco_of_reference_fixture():
    # cross-check of the number used above
    from procbench.procurement import parse_procurement_model
    model = parse_procurement_model(REFERENCE_ONLY)
    assert tco(model.reference_system) == pytest.approx(1e8 + 2000 * 43800 * 0.9 * 0.25)
