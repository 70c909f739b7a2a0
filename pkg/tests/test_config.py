import math

import pytest
from hypothesis import given, settings, strategies as st

from stueckelberg.config import EXPERIMENTS, SCHEMA, ConfigError, defaults, parse, serialize, set_value


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_defaults_serialize_round_trip(experiment):
    cfg = defaults(experiment)
    if experiment == "fit":
        cfg.values["fit.input"] = "scan.json"
    text = serialize(cfg)
    again = parse(text)
    assert again.experiment == experiment
    assert again.values == cfg.values
    assert serialize(again) == text


@settings(max_examples=60, deadline=None)
@given(
    st.floats(allow_nan=False, allow_infinity=False, min_value=1e-300, max_value=1e300),
    st.integers(0, 2**32 - 1),
)
def test_float_values_survive_exactly(t1, seed):
    cfg = defaults("ple")
    cfg.values["bloch.t1_ns"] = t1
    cfg.seed = seed
    again = parse(serialize(cfg))
    assert again.values["bloch.t1_ns"] == t1 and again.seed == seed


def test_infinity_round_trip():
    cfg = parse("experiment = ple\nbloch.t2_star_ns = inf\n")
    assert math.isinf(cfg["bloch.t2_star_ns"])
    assert "bloch.t2_star_ns = inf" in serialize(cfg)


def test_comments_and_blank_lines():
    cfg = parse("# header\n\nexperiment = ramsey  # trailing\nmc.shots = 10\n")
    assert cfg["mc.shots"] == 10


def test_unknown_key_reports_line_and_suggestion():
    with pytest.raises(ConfigError) as info:
        parse("experiment = ple\n\nbloch.t1_nss = 3\n", source="run.cfg")
    msg = str(info.value)
    assert "run.cfg:3" in msg and "bloch.t1_ns" in msg


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse("experiment = ple\nbloch.t1_ns = 3\nbloch.t1_ns = 4\n")


@pytest.mark.parametrize(
    "line, message",
    [
        ("bloch.t1_ns = -1", "positive"),
        ("bloch.t1_ns = nan", "NaN"),
        ("bloch.t1_ns = fast", "bad value"),
        ("readout.mode = sometimes", "expected one of"),
        ("scan.detuning_points = 1.5", "bad value"),
        ("scan.detuning_min_mhz = 200", "must exceed"),
        ("noequals", "key = value"),
    ],
)
def test_value_validation(line, message):
    with pytest.raises(ConfigError, match=message):
        parse(f"experiment = ple\n{line}\n")


def test_missing_or_conflicting_experiment():
    with pytest.raises(ConfigError, match="no 'experiment"):
        parse("bloch.t1_ns = 3\n")
    with pytest.raises(ConfigError, match="not 'lzs'"):
        parse("experiment = ple\n", experiment="lzs")
    with pytest.raises(ConfigError, match="did you mean 'ple'"):
        parse("experiment = plee\n")
    assert parse("", experiment="echo").experiment == "echo"


def test_bool_parsing():
    cfg = defaults("spin-rabi")
    for raw, val in (("true", True), ("no", False), ("1", True)):
        assert set_value(cfg, "mw.full3level", raw)["mw.full3level"] is val
    with pytest.raises(ConfigError):
        set_value(cfg, "mw.full3level", "maybe")


def test_cross_key_checks():
    with pytest.raises(ConfigError, match="rise_ns"):
        parse("experiment = optical-rabi\npulse.shape = smoothed\n")
    with pytest.raises(ConfigError, match="fit.input"):
        parse("experiment = fit\n")


def test_every_key_is_documented_type():
    for schema in SCHEMA.values():
        for key, spec in schema.items():
            assert "." in key
            assert isinstance(spec.kind, tuple) or spec.kind in (int, float, bool, str)
