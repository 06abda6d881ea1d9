import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molia import Scenario, TimingSchedule, load_scenario, load_times, preset_times
from molia.errors import ScenarioError
from molia.io import (
    TABLE2,
    TIME_KEYS,
    bundled,
    dump_scenario,
    dump_times,
    parse_scenario,
    parse_times,
    preset_problem,
)


def _same(a: Scenario, b: Scenario):
    return (
        np.allclose(a.tx_positions, b.tx_positions, rtol=1e-12, atol=0)
        and np.allclose(a.rx_positions, b.rx_positions, rtol=1e-12, atol=0)
        and a.diffusion == b.diffusion
        and np.array_equal(a.flow, b.flow)
        and a.rx_radius == pytest.approx(b.rx_radius, rel=1e-12)
        and a.amplitudes == b.amplitudes
        and a.reaction_coeffs == b.reaction_coeffs
        and a.slot_duration == b.slot_duration
        and a.env_noise == b.env_noise
    )


def test_bundled_scenario_is_reference_geometry(scn):
    assert _same(parse_scenario(bundled("table1.scenario")), scn)


def test_empty_scenario_file_gives_defaults(scn):
    assert _same(parse_scenario("# nothing here\n"), scn)


def test_scenario_round_trip(scn):
    s = scn.replace(env_noise=(17.0, 5.0), reaction_coeffs=(2.0, 2.5, 3.0), flow=(1e-6, 0, -2e-6))
    assert _same(parse_scenario(dump_scenario(s)), s)


def test_units_and_comments():
    s = parse_scenario("rx1 = 0, 0.00015, 0 m  # metres\nzeta0 = 1e6\nzeta1 = 3e6\n")
    assert np.allclose(s.rx_positions[0], [0, 150e-6, 0])
    assert s.amplitudes == (1e6, 3e6)


@pytest.mark.parametrize(
    "text",
    ["bogus = 1", "D1 = fast", "tx1 = 0, 0", "Ts 10", "c1 = 2\nc1 = 3", "zeta0 = 5e6"],
)
def test_bad_scenarios_rejected(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_missing_scenario_file_named(tmp_path):
    path = tmp_path / "nope.scenario"
    with pytest.raises(ScenarioError, match="nope.scenario"):
        load_scenario(path)


@settings(max_examples=40)
@given(st.lists(st.floats(0, 10, allow_subnormal=False), min_size=12, max_size=12))
def test_times_round_trip_is_exact(values):
    ts = TimingSchedule.from_vector(values)
    assert parse_times(dump_times(ts)) == ts


def test_times_file_keys_and_order():
    text = dump_times(preset_times("r-gen"))
    assert [ln.split(" = ")[0] for ln in text.splitlines()] == list(TIME_KEYS)
    with pytest.raises(ScenarioError, match="missing"):
        parse_times("\n".join(text.splitlines()[:-1]))


def test_presets(tmp_path):
    for key, row in TABLE2.items():
        assert np.array_equal(preset_times(key).as_vector(), row)
        assert preset_times("table2-" + key) == preset_times(key)
        assert preset_problem("table2-" + key) == key
        assert preset_problem("optimum-" + key) == key
    assert preset_problem("some/file.times") is None
    with pytest.raises(ScenarioError):
        preset_times("table3-r-spec")
    f = tmp_path / "x.times"
    f.write_text(dump_times(preset_times("nr-spec")))
    assert load_times(f) == preset_times("nr-spec")
    with pytest.raises(ScenarioError, match="not found"):
        load_times(tmp_path / "missing.times")


@pytest.mark.parametrize("name", ["table2-r-spec", "table2-r-gen", "table2-nr-spec", "table2-nr-gen"])
def test_bundled_table2_files_match_presets(name):
    assert parse_times(bundled(name + ".times")) == preset_times(name)
