import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from procbench.metrics import (
    Metric, MetricError, NoMatchError, ParseError, apply_rule, extract_metrics, normalize_fom,
    parse_number, read_reference_file, verify_presence, verify_scalar,
)
from procbench.specmodel import FomSpec, VerificationRule

TIME = FomSpec(r"time=(\S+) s", "s", "time")
RATE = FomSpec(r"rate=(\S+)", "tok/s", "rate", 2.0e7)

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_extract_time():
    m = extract_metrics("warmup\ntime=12.5 s\ndone\n", TIME)
    assert m == Metric("fom", 12.5, "s", "time")


def test_last_match_wins():
    assert extract_metrics("time=1 s\ntime=2 s\ntime=3e1 s\n", TIME).value == 30.0


def test_no_match():
    with pytest.raises(NoMatchError):
        extract_metrics("nothing here", TIME)


@pytest.mark.parametrize("text", ["1,5", "1.000,0", "nan", "inf", "0x10", "", "1e", "--1"])
def test_locale_independent_grammar_rejects(text):
    with pytest.raises(ParseError):
        parse_number(text)


@pytest.mark.parametrize("text, value", [("1.5", 1.5), ("-.5", -0.5), ("3.", 3.0), ("2E-3", 0.002), ("+7", 7.0)])
def test_parse_number(text, value):
    assert parse_number(text) == value


def test_normalize_rate():
    assert normalize_fom(Metric("fom", 1.0e6, "tok/s", "rate"), RATE) == 20.0
    assert normalize_fom(Metric("fom", 4.0, "s", "time"), TIME) == 4.0


def test_normalize_rejects_bad_rates():
    with pytest.raises(MetricError):
        normalize_fom(Metric("fom", 0.0, "tok/s", "rate"), RATE)
    with pytest.raises(MetricError):
        normalize_fom(Metric("fom", 1.0, "s", "time"), RATE)


@given(st.floats(1e-6, 1e12), st.floats(1e-6, 1e12))
def test_normalized_rate_is_decreasing(r1, r2):
    assume(r1 < r2)
    a = normalize_fom(Metric("fom", r1, "", "rate"), RATE)
    b = normalize_fom(Metric("fom", r2, "", "rate"), RATE)
    assert a >= b


@given(st.floats(1e-6, 1e12))
def test_time_round_trips_through_output(t):
    assert extract_metrics(f"time={t!r} s\n", TIME).value == t


# ------------------------------------------------------------ verification

def test_verify_scalar_boundary():
    assert verify_scalar(1.1, 1.0, 0.1 + 1e-12).passed
    assert not verify_scalar(1.2, 1.0, 0.1).passed
    assert verify_scalar(-2.0, -2.0, 0.0).passed


def test_zero_reference_uses_absolute_tolerance():
    out = verify_scalar(1e-9, 0.0, 1e-8)
    assert out.passed and "absolute" in out.detail
    assert not verify_scalar(1e-7, 0.0, 1e-8).passed


def test_negative_tolerance_rejected():
    with pytest.raises(ValueError):
        verify_scalar(1.0, 1.0, -1e-3)


@given(finite.filter(lambda x: abs(x) < 1e100), finite.filter(lambda x: 0 < abs(x) < 1e100),
       st.floats(0, 1))
def test_verify_scalar_matches_definition(obs, ref, tol):
    assert verify_scalar(obs, ref, tol).passed == (abs(obs - ref) <= tol * abs(ref))


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6).filter(bool), st.floats(0, 1), st.floats(0, 1))
def test_verify_scalar_monotone_in_tolerance(obs, ref, t1, t2):
    lo, hi = sorted((t1, t2))
    if verify_scalar(obs, ref, lo).passed:
        assert verify_scalar(obs, ref, hi).passed


@given(st.floats(-1e6, 1e6).filter(bool), st.floats(0, 10), st.floats(0, 1))
def test_verify_scalar_symmetric_deviation(ref, dev, tol):
    up = verify_scalar(ref + dev, ref, tol).passed
    down = verify_scalar(ref - dev, ref, tol).passed
    assert up == down or math.isclose(abs(dev), tol * abs(ref), rel_tol=1e-9)


@given(st.text(max_size=40), st.lists(st.text(min_size=1, max_size=5), max_size=4))
def test_presence_is_substring_check(output, keys):
    assert verify_presence(output, keys).passed == all(k in output for k in keys)


def test_reference_file(tmp_path):
    path = tmp_path / "ref.txt"
    path.write_text("# header\n1.0\n\n2.5  # trailing comment\n")
    assert read_reference_file(path) == ["1.0", "2.5"]
    output = "residual: 1.0000000001\nresidual: 2.5\n"
    rule = VerificationRule("scalar_tolerance", "residual", reference_file="ref.txt", rel_tolerance=1e-8)
    assert apply_rule(rule, output, base_dir=tmp_path).passed
    assert not apply_rule(rule, "residual: 1.0\n", base_dir=tmp_path).passed
    missing = VerificationRule("scalar_tolerance", "residual", reference_file="nope.txt", rel_tolerance=1)
    assert not apply_rule(missing, output, base_dir=tmp_path).passed


def test_apply_rule_kinds():
    out = "checksum = abc123\nresidual=1e-9\nFOM: 3.0\n"
    assert apply_rule(VerificationRule("exact_match", "checksum", reference="abc123"), out).passed
    assert not apply_rule(VerificationRule("exact_match", "checksum", reference="abc124"), out).passed
    assert apply_rule(VerificationRule("scalar_tolerance", "residual", reference=1.05e-9,
                                       rel_tolerance=0.1), out).passed
    assert apply_rule(VerificationRule("scalar_tolerance", "fom", reference=3.0, rel_tolerance=0.0),
                      out, fom_value=3.0).passed
    assert apply_rule(VerificationRule("key_presence", "FOM:"), out).passed
    assert not apply_rule(VerificationRule("key_presence", "Solution Validates"), out).passed
