import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gains_mp, log_ratio_sum

from molia import (
    beamforming,
    build_zf,
    channel_set,
    check_conditions,
    check_conditions_special,
    mean_signals,
    preset_times,
)
from molia.alignment import IA_TERMS, INDEPENDENCY_TERMS
from molia.detection import MESSAGES
from molia.reaction import REACTION_TERMS, reaction_residuals

# printed general no-reaction row: per-type times differ
GENERAL = preset_times("nr-gen")


def test_beamforming_ratios_match_mpmath(scn):
    ch = channel_set(scn, GENERAL)
    bf = beamforming(ch)
    g = gains_mp(scn, GENERAL)
    v2 = [g[2][0][l] / g[2][1][l] for l in range(2)]
    v3 = [g[1][0][l] / g[1][2][l] for l in range(2)]
    assert bf.V[1, 0] / bf.V[1, 1] == pytest.approx(float(v2[0] / v2[1]), rel=1e-12)
    assert bf.V[2, 0] / bf.V[2, 1] == pytest.approx(float(v3[0] / v3[1]), rel=1e-12)
    assert np.allclose(bf.V.sum(axis=1), 1.0)
    assert np.array_equal(bf.V[0], [0.5, 0.5])


def test_rx2_rx3_aligned_for_any_times(scn):
    ms = mean_signals(channel_set(scn, GENERAL), beamforming(channel_set(scn, GENERAL)))
    assert np.all(ms.misalignment[1:] < 1e-12)
    assert ms.misalignment[0] > 1e-3  # printed row: IA only holds to rounding


def test_rx1_aligned_after_snap(scn, snapped):
    for name in ("nr-gen", "nr-spec", "r-gen", "r-spec"):
        ch = channel_set(scn, snapped[name])
        ms = mean_signals(ch, beamforming(ch))
        assert np.all(ms.misalignment < 1e-8), name


def test_components_reassemble_mean(scn, snapped):
    ch = channel_set(scn, snapped["nr-gen"])
    ms = mean_signals(ch, beamforming(ch), N=(2e6, 4e6, 2e6))
    des, inter = ms.components((2e6, 4e6, 2e6))
    assert np.allclose(des + inter, ms.mu, rtol=1e-8)


def test_ia_residual_matches_gain_oracle(scn):
    rep = check_conditions(scn, GENERAL)
    g = gains_mp(scn, GENERAL)
    oracle = -4 * log_ratio_sum(g, IA_TERMS)
    assert rep.ia_raw == pytest.approx(oracle, rel=1e-10, abs=1e-6)
    for k, terms in enumerate(INDEPENDENCY_TERMS):
        assert rep.independency_raw[k] == pytest.approx(-4 * log_ratio_sum(g, terms), rel=1e-10, abs=1e-6)


flows = st.tuples(*[st.floats(-2e-5, 2e-5)] * 3)


@settings(max_examples=25, deadline=None)
@given(flow=flows)
def test_condition_equations_do_not_depend_on_flow(scn, flow):
    """The signed links and elapsed times of every IA/independency term sum to
    zero, so the drift contributions cancel in the gain ratios."""
    with_flow = scn.replace(flow=flow)
    g0 = gains_mp(scn, GENERAL)
    g1 = gains_mp(with_flow, GENERAL)
    for terms in (IA_TERMS,) + INDEPENDENCY_TERMS:
        a = log_ratio_sum(g0, terms)
        b = log_ratio_sum(g1, terms)
        scale = max(abs(np.log(float(g0[i][j][0] / g0[i][j][1]))) for _, i, j in terms)
        assert abs(a - b) <= 1e-9 * scale
    assert check_conditions(with_flow, GENERAL).ia_raw == check_conditions(scn, GENERAL).ia_raw


@settings(max_examples=25, deadline=None)
@given(flow=flows)
def test_reaction_residuals_match_gain_oracle_with_flow(scn, snapped, flow):
    ts = snapped["r-gen"]
    s = scn.replace(flow=flow)
    g = gains_mp(s, ts)
    got = reaction_residuals(s, ts)
    for i, terms in enumerate(REACTION_TERMS):
        oracle = -4 * (log_ratio_sum(g, terms) - np.log(s.reaction_coeffs[i]))
        assert got[i] == pytest.approx(oracle, rel=1e-9, abs=1e-7)


def test_special_and_general_checks_agree(scn, snapped):
    ts = snapped["r-spec"]
    a = check_conditions(scn, ts)
    b = check_conditions_special(scn, ts)
    assert a.ia_residual == pytest.approx(b.ia_residual, abs=1e-12)
    assert np.allclose(a.independency_residuals, b.independency_residuals, atol=1e-12)
    assert np.allclose(a.reaction_residuals, b.reaction_residuals, atol=1e-12)


def test_snapped_rows_feasible(scn, snapped):
    for name, ts in snapped.items():
        rep = check_conditions(scn, ts)
        assert rep.ok, (name, rep.lines())
        if name.startswith("r-"):
            assert rep.ok_with_reaction, (name, rep.lines())


def test_printed_rows_miss_equalities_by_rounding(scn):
    rep = check_conditions(scn, GENERAL)
    assert not rep.ia_satisfied
    assert 1e-9 < abs(rep.ia_residual) < 1e-2


@pytest.mark.parametrize("name", ["nr-gen", "nr-spec"])
def test_zero_forcing_unbiased_for_all_triples(scn, snapped, name):
    ch = channel_set(scn, snapped[name])
    det = build_zf(ch, beamforming(ch), scn.amplitudes)
    zeta = np.asarray(scn.amplitudes)
    for k, m in enumerate(MESSAGES):
        for i in range(3):
            assert det.cond_mean[i, k] == pytest.approx(zeta[m[i]], rel=1e-8)


def test_zero_forcing_weights_cancel_interference(scn, snapped):
    ch = channel_set(scn, snapped["nr-gen"])
    bf = beamforming(ch)
    ms = mean_signals(ch, bf)
    det = build_zf(ch, bf)
    proj = det.a * ms.interference[:, 0] + det.b * ms.interference[:, 1]
    assert np.all(np.abs(proj) < 1e-12 * np.abs(det.a * ms.interference[:, 0]))


def test_mean_signals_rejects_negative_counts(scn, snapped):
    ch = channel_set(scn, snapped["nr-gen"])
    with pytest.raises(ValueError):
        mean_signals(ch, beamforming(ch), N=(-1, 1, 1))


def test_condition_lines_name_every_check(scn, snapped):
    lines = check_conditions(scn, snapped["r-spec"]).lines()
    assert [ln.split()[0] for ln in lines] == [
        "ia",
        "independency1",
        "independency2",
        "independency3",
        "reaction1",
        "reaction2",
        "reaction3",
    ]
