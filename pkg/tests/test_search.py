import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molia import SearchSpec, check_conditions, lemma2_times, objective_pe, optimize, preset_times, snap
from molia.errors import InfeasiblePointError
from molia.search import canonical_problem

PRINTED_DT12 = -0.2323
PRINTED_R_SPEC = (0.0, 0.232, 0.332, 0.410, 0.466, 1.051)  # t~1, t~2, t~3, t1, t2, t3


@pytest.mark.parametrize("name", ["r-spec", "r-gen", "nr-spec", "nr-gen"])
def test_snap_moves_rounded_rows_by_about_a_millisecond(scn, name):
    ts, change = snap(scn, preset_times(name), name)
    assert change <= 1.5e-3
    rep = check_conditions(scn, ts)
    assert abs(rep.ia_residual) < 1e-9
    if name.startswith("r-"):
        assert np.all(np.abs(rep.reaction_residuals) < 1e-9)


def test_snap_is_idempotent(scn, snapped):
    again, change = snap(scn, snapped["nr-gen"], "nr-gen")
    assert change < 1e-12


def test_r_special_optimum(r_special_opt):
    assert abs(r_special_opt.dt12 - PRINTED_DT12) < 5e-3
    ts = r_special_opt.schedule
    got = np.concatenate([ts.release[:, 0], ts.sample[:, 0]])
    assert np.all(np.abs(got - PRINTED_R_SPEC) < 1e-2)
    assert r_special_opt.objective == pytest.approx(1.1663110388515803e-3, rel=1e-9)


def test_r_special_coarse_to_fine_consistency(scn):
    runs = [optimize(SearchSpec("r-special", grid=g), scn) for g in (128, 256, 512, 1024)]
    dts = [r.dt12 for r in runs]
    pes = [r.objective for r in runs]
    assert max(dts) - min(dts) < 1e-3
    assert max(pes) / min(pes) - 1 < 1e-3


def test_random_probes_do_not_beat_optimum(scn, region, r_special_opt):
    rng = np.random.default_rng(2024)
    lo, hi = region.dt12_bounds
    probes = 0
    while probes < 50:
        x = rng.uniform(lo, hi)
        if region.excluded_distance(x) < 1e-3 or region.min_delta(x) < 0.02:
            continue
        probes += 1
        pe = objective_pe(scn, lemma2_times(region, x))
        assert pe >= r_special_opt.objective - 1e-15


def test_r_special_scan_is_deterministic_under_threads(scn):
    a = optimize(SearchSpec("r-special", grid=200, workers=1), scn)
    b = optimize(SearchSpec("r-special", grid=200, workers=4), scn)
    assert a.dt12 == b.dt12 and a.objective == b.objective
    assert a.trace_csv() == b.trace_csv()


def test_scan_trace_records_skipped_points(scn):
    res = optimize(SearchSpec("r-special", grid=512), scn)
    lines = res.trace_csv().splitlines()
    assert lines[0].startswith("dt12")
    assert len(lines) == 1 + res.evaluations
    assert any("skipped" in ln for ln in lines)
    assert lines[0] == "dt12,dt13,excluded,pe_rx1,pe_rx2,pe_rx3,pe_total,status"
    row = next(r for r in res.trace if r[-1] == "ok")
    assert row[6] == pytest.approx(np.mean(row[3:6]), rel=1e-12)


def test_equal_levels_give_half(scn, r_special_opt, snapped):
    same = scn.replace(amplitudes=(2e6, 2e6))
    assert objective_pe(same, r_special_opt.schedule) == 0.5
    assert objective_pe(same, snapped["nr-gen"], scheme="none") == 0.5


@settings(max_examples=20, deadline=None)
@given(shift=st.floats(0.0, 5.0))
def test_objective_invariant_under_time_shift(scn, r_special_opt, shift):
    ts = r_special_opt.schedule
    assert objective_pe(scn, ts.shifted(shift)) == pytest.approx(objective_pe(scn, ts), rel=1e-8)


def test_objective_mc_is_deterministic(scn, snapped):
    a = objective_pe(scn, snapped["nr-spec"], scheme="none", trials=5000)
    b = objective_pe(scn, snapped["nr-spec"], scheme="none", trials=5000)
    assert a == b


def test_objective_methods_roughly_agree(scn, snapped):
    g = objective_pe(scn, snapped["nr-gen"], scheme="none", method="gaussian")
    m = objective_pe(scn, snapped["nr-gen"], scheme="none", method="mc", trials=100_000)
    assert m == pytest.approx(g, rel=0.1)


def test_objective_names_violated_constraint(scn):
    with pytest.raises(InfeasiblePointError) as info:
        objective_pe(scn, preset_times("nr-gen"), scheme="none")
    assert info.value.constraint == "ia"
    with pytest.raises(InfeasiblePointError) as info:
        objective_pe(scn, preset_times("r-spec"))
    assert info.value.constraint in ("ia", "reaction", "reaction1", "reaction2", "reaction3")


@pytest.mark.parametrize(
    "kw",
    [dict(scheme="both"), dict(method="exact"), dict(scheme="none", method="analytic"), dict(method="gaussian")],
)
def test_objective_argument_validation(scn, r_special_opt, kw):
    with pytest.raises(ValueError):
        objective_pe(scn, r_special_opt.schedule, **kw)


def test_problem_names():
    assert canonical_problem("nr-gen") == "nr-general"
    assert canonical_problem("r-special") == "r-special"
    with pytest.raises(ValueError):
        canonical_problem("r-fancy")
    with pytest.raises(ValueError):
        SearchSpec("r-spec", grid=2)


def test_r_general_starts_from_special_optimum(scn, r_special_opt):
    res = optimize(SearchSpec("r-gen", starts=1, budget=150), scn)
    assert res.objective <= r_special_opt.objective * (1 + 1e-3)
    assert res.evaluations <= 150
    rep = check_conditions(scn, res.schedule)
    assert rep.ok_with_reaction, rep.lines()
    assert objective_pe(scn, res.schedule) == pytest.approx(res.objective, rel=1e-9)


def test_nr_special_descent_returns_feasible_point(scn):
    res = optimize(SearchSpec("nr-spec", method="gaussian", starts=2, budget=120), scn)
    ts = res.schedule
    assert ts.special_case
    assert min(ts.release.min(), ts.sample.min()) == 0.0
    assert check_conditions(scn, ts).ok
    assert objective_pe(scn, ts, scheme="none", method="gaussian") == pytest.approx(res.objective, rel=1e-9)
    a, b = optimize(SearchSpec("nr-spec", method="gaussian", starts=2, budget=120), scn), res
    assert a.objective == b.objective
