import io
import math
import statistics
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procbench.workloads import amdahl, bisection, triad
from procbench.workloads.amdahl import AmdahlConfig, model_time, run_amdahl
from procbench.workloads.bisection import BisectionConfig, pair_bisection, run_bisection, simulate_bisection
from procbench.workloads.triad import TriadConfig, run_triad, triad_arrays


# ------------------------------------------------------------ amdahl

def test_amdahl_line():
    out = io.StringIO()
    assert run_amdahl(AmdahlConfig(1, 8), 4, out) == 3.0
    assert out.getvalue() == "FOM: time=3.0 s\n"
    assert model_time(AmdahlConfig(1.5, 8), 1) == 9.5


def test_amdahl_noise_is_seeded_and_bounded():
    cfg = AmdahlConfig(10, 80, 0.05, seed=3)
    values = [model_time(cfg, n) for n in (1, 2, 4, 8)]
    assert values == [model_time(cfg, n) for n in (1, 2, 4, 8)]
    for n, v in zip((1, 2, 4, 8), values):
        base = 10 + 80 / n
        assert abs(v / base - 1) <= 0.05
    assert values != [model_time(AmdahlConfig(10, 80, 0.05, seed=4), n) for n in (1, 2, 4, 8)]


def test_amdahl_config_validation():
    with pytest.raises(ValueError):
        AmdahlConfig(-1, 1)
    with pytest.raises(ValueError):
        AmdahlConfig(1, 1, noise_fraction=1.0)
    with pytest.raises(ValueError):
        model_time(AmdahlConfig(1, 1), 0)


def test_amdahl_reads_bench_nodes():
    out = io.StringIO()
    result = amdahl.invoke(["--serial", "1", "--parallel", "8"], {"BENCH_NODES": "8"}, out, simulate=True)
    assert result.returncode == 0
    assert out.getvalue() == "FOM: time=2.0 s\n"


def test_amdahl_local_sleep_within_jitter():
    out = io.StringIO()
    elapsed = run_amdahl(AmdahlConfig(0.5, 1.0), 2, out, simulate=False)
    assert elapsed == pytest.approx(1.0, rel=0.2)


def test_amdahl_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "procbench.workloads.amdahl", "--serial", "1", "--parallel", "2"],
                          capture_output=True, text=True, env={"BENCH_NODES": "2", "BENCH_SIMULATE": "1"})
    assert proc.returncode == 0
    assert proc.stdout == "FOM: time=2.0 s\n"


# ------------------------------------------------------------ bisection

def test_pairing_examples():
    assert pair_bisection(4) == [(0, 2), (1, 3)]
    assert pair_bisection(2) == [(0, 1)]
    for bad in (0, 3, -2):
        with pytest.raises(ValueError):
            pair_bisection(bad)


@given(st.integers(1, 2000).map(lambda k: 2 * k))
def test_pairing_is_perfect_matching_across_halves(p):
    pairs = pair_bisection(p)
    flat = [x for pair in pairs for x in pair]
    assert len(flat) == len(set(flat)) == p
    assert all(a != b and a < p // 2 <= b for a, b in pairs)


def test_bisection_single_pair():
    result = run_bisection(BisectionConfig(2, message_bytes=1024))
    assert len(result.pairs) == 1
    assert result.minimum == result.pairs[0].bandwidth
    assert result.pairs[0].bytes_moved == 2048


def test_bisection_minimum_le_every_pair():
    result = run_bisection(BisectionConfig(6, message_bytes=256 * 1024, repetitions=2, bidirectional=False))
    assert [p.pair for p in result.pairs] == [(0, 3), (1, 4), (2, 5)]
    assert all(result.minimum <= p.bandwidth for p in result.pairs)
    assert all(math.isfinite(p.bandwidth) and p.bandwidth > 0 for p in result.pairs)


def test_bisection_bandwidth_stable_when_doubling_repetitions():
    def median_bw(reps):
        samples = []
        for _ in range(3):
            res = run_bisection(BisectionConfig(2, message_bytes=8 << 20, repetitions=reps))
            samples.append(res.pairs[0].bandwidth)
        return statistics.median(samples)

    one, two = median_bw(1), median_bw(2)
    assert two == pytest.approx(one, rel=0.5)


def test_simulated_bisection_deterministic():
    cfg = BisectionConfig(8)
    a, b = simulate_bisection(cfg, 1e10, seed=1), simulate_bisection(cfg, 1e10, seed=1)
    assert a == b
    assert all(0.9e10 <= p.bandwidth <= 1e10 for p in a.pairs)


def test_bisection_cli_output():
    out = io.StringIO()
    result = bisection.invoke(["--processes", "4", "--message-bytes", "4096"], {}, out, simulate=True)
    lines = out.getvalue().splitlines()
    assert result.returncode == 0
    assert lines[0].startswith("pair 0-2: bytes=8192 ")
    assert lines[-1].startswith("FOM: min_bisection_bandwidth=")
    bad = bisection.invoke(["--processes", "3"], {}, io.StringIO(), simulate=True)
    assert bad.returncode == 2


# ------------------------------------------------------------ triad

def test_triad_closed_form():
    a, b, c = triad_arrays(8)
    assert b.tolist() == list(range(8)) and c.tolist() == [1.0] * 8
    result = run_triad(TriadConfig(8, 1, scalar=2.0))
    assert result.a.tolist() == [i + 2.0 for i in range(8)]


def test_triad_rejects_zero_repetitions():
    with pytest.raises(ValueError):
        TriadConfig(8, 0)
    out = io.StringIO()
    assert triad.invoke(["--length", "8", "--repetitions", "0"], {}, out).returncode != 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 50_000), st.integers(1, 5), st.floats(-10, 10))
def test_triad_bandwidth_positive_and_finite(length, reps, s):
    result = run_triad(TriadConfig(length, reps, s))
    assert math.isfinite(result.bandwidth) and result.bandwidth > 0
    np.testing.assert_array_equal(result.a, np.arange(length) + s)


def test_triad_simulated_bandwidth():
    out = io.StringIO()
    res = triad.invoke(["--length", "1000", "--repetitions", "2"], {"SIM_MEMORY_BANDWIDTH": "4.8e10"}, out,
                       simulate=True)
    assert res.returncode == 0
    text = out.getvalue()
    assert "Solution Validates" in text
    assert "FOM: triad_bandwidth=48000000000.0 B/s" in text
    assert res.seconds == pytest.approx(48000 / 4.8e10)
