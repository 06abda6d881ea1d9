import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import threshold_pe_mp
from scipy import integrate, stats

from molia import (
    analytic_pe_reaction,
    beamforming,
    build_reaction,
    build_zf,
    channel_set,
    isi_decision_rules,
    map_decide,
    zf_gaussian_pe,
)
from molia.detection import poisson_threshold, poisson_threshold_pe, zf_regions
from molia.errors import DegenerateChannelError

# 1/2 [P(Y > g | 5) + P(Y <= g | 10)], g = 5 / ln 2, summed with mpmath
PE_5_10 = 0.176796160335853121835508870174


def test_threshold_pe_small_means_regression():
    assert poisson_threshold_pe(5.0, 10.0) == pytest.approx(PE_5_10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(lam0=st.floats(0.2, 25.0), gap=st.floats(0.2, 40.0))
def test_threshold_pe_matches_brute_force_sum(lam0, gap):
    lam1 = lam0 + gap
    assert poisson_threshold_pe(lam0, lam1) == pytest.approx(float(threshold_pe_mp(lam0, lam1)), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(lam0=st.floats(0.5, 500.0), ratio=st.floats(1.05, 4.0))
def test_threshold_is_likelihood_crossing(lam0, ratio):
    lam1 = lam0 * ratio
    g = float(poisson_threshold(lam0, lam1))
    k = np.arange(int(g) - 3, int(g) + 5)
    k = k[k >= 0]
    prefer_one = stats.poisson.logpmf(k, lam1) > stats.poisson.logpmf(k, lam0)
    assert np.array_equal(prefer_one, k > g)


def test_zero_bit0_mean():
    assert poisson_threshold(0.0, 7.0) == 0.0
    assert poisson_threshold_pe(0.0, 7.0) == pytest.approx(0.5 * np.exp(-7.0), rel=1e-12)


def test_reaction_detector_at_special_optimum(scn, r_special_opt):
    ch = channel_set(scn, r_special_opt.schedule)
    det = build_reaction(ch, beamforming(ch), scn)
    assert det.branch.tolist() == [0, 1, 0]
    assert np.allclose(det.lam1, 2 * det.lam0, rtol=1e-12)
    assert np.allclose(det.lam0, det.gain * scn.amplitudes[0], rtol=1e-12)
    pe = analytic_pe_reaction(det)
    assert pe.total == pytest.approx(r_special_opt.objective, rel=1e-12)
    assert pe.total == pytest.approx(pe.per_rx.mean())


def test_reaction_detector_noise_shifts_means(scn, r_special_opt):
    ch = channel_set(scn, r_special_opt.schedule)
    bf = beamforming(ch)
    quiet = build_reaction(ch, bf, scn)
    noisy = build_reaction(ch, bf, scn, noise=(17.0, 5.0))
    # type-1 branch: the surviving noise is mu_n1 - c mu_n2 = 7
    for i in np.flatnonzero(quiet.branch == 0):
        assert noisy.lam0[i] - quiet.lam0[i] == pytest.approx(7.0, rel=1e-9)


def test_equal_levels_rejected(scn, r_special_opt):
    s = scn.replace(amplitudes=(2e6, 2e6))
    ch = channel_set(s, r_special_opt.schedule)
    with pytest.raises(DegenerateChannelError):
        build_reaction(ch, beamforming(ch), s)


@pytest.fixture(scope="module")
def zf_det(scn, snapped):
    ch = channel_set(scn, snapped["nr-gen"])
    return build_zf(ch, beamforming(ch), scn.amplitudes)


def test_decision_regions_match_map_rule(zf_det):
    regions = zf_regions(zf_det)
    z1 = max(zf_det.amplitudes)
    x = np.linspace(-z1, 3 * z1, 10_000)
    for i in range(3):
        assert np.array_equal(regions.decide(i, x), map_decide(zf_det, i, x))


def test_map_decide_scalar_and_tie_rule(zf_det):
    assert map_decide(zf_det, 0, zf_det.amplitudes[0]) == 0
    assert map_decide(zf_det, 0, zf_det.amplitudes[1]) == 1


def test_zf_gaussian_pe_matches_quadrature(zf_det):
    pe = zf_gaussian_pe(zf_det)
    edges = zf_regions(zf_det).edges
    for i in range(3):
        mu, sd = zf_det.cond_mean[i], np.sqrt(zf_det.cond_var[i])
        lo, hi = float(np.min(mu - 15 * sd)), float(np.max(mu + 15 * sd))

        def half_min(x, i=i):
            return 0.5 * np.exp(min(zf_det.log_likelihood(i, x, 0), zf_det.log_likelihood(i, x, 1)))

        brk = [float(e) for e in edges[i] if lo < e < hi]
        val, _ = integrate.quad(half_min, lo, hi, points=brk or None, limit=400, epsabs=1e-13)
        assert pe.per_rx[i] == pytest.approx(val, rel=1e-6, abs=1e-12)


def _isi_columns(scn, ts):
    ch = channel_set(scn, ts)
    isi = channel_set(scn, ts, offset=scn.slot_duration)
    return isi.gains * beamforming(ch).V[None, :, :]


def test_isi_rules_coincide_without_leftovers(scn, r_special_opt):
    ch = channel_set(scn, r_special_opt.schedule)
    det = build_reaction(ch, beamforming(ch), scn)
    zero = np.zeros((3, 3, 2))
    y = np.arange(0, 400)
    for mode in ("optimum", "isi-as-noise", "adaptive"):
        rule = isi_decision_rules(det, zero, mode)
        for i in range(3):
            for prev in (0, 1):
                assert np.array_equal(rule.decide(i, y, prev), det.decide(i, y)), (mode, i, prev)


def test_adaptive_means_use_own_previous_decision(scn, r_special_opt):
    ts = r_special_opt.schedule
    ch = channel_set(scn, ts)
    det = build_reaction(ch, beamforming(ch), scn)
    isi = _isi_columns(scn, ts)
    rule = isi_decision_rules(det, isi, "adaptive")
    noise_rule = isi_decision_rules(det, isi, "isi-as-noise")
    zeta = np.asarray(scn.amplitudes)
    for i in range(3):
        for p in (0, 1):
            n_prev = np.full(3, zeta.mean())
            n_prev[i] = zeta[p]
            for bit in (0, 1):
                tot = det.desired[i] * zeta[bit] + isi[i].T @ n_prev
                assert rule.means[i, p, bit] == pytest.approx(det.post_means(i, *tot), rel=1e-12)
        # the average leftover lies between the two conditioned ones
        lo, hi = sorted(rule.means[i, :, 0])
        assert lo <= noise_rule.means[i, 0] <= hi


def test_optimum_rule_is_brute_force_map(scn, r_special_opt):
    ts = r_special_opt.schedule
    ch = channel_set(scn, ts)
    det = build_reaction(ch, beamforming(ch), scn)
    isi = _isi_columns(scn, ts)
    rule = isi_decision_rules(det, isi, "optimum")
    zeta = np.asarray(scn.amplitudes)
    for i in range(3):
        others = [j for j in range(3) if j != i]
        y = np.arange(int(det.lam1[i] * 1.5))
        for p in (0, 1):
            like = []
            for bit in (0, 1):
                total = np.zeros(y.size)
                for u, v in itertools.product((0, 1), repeat=2):
                    n_prev = np.empty(3)
                    n_prev[i], n_prev[others] = zeta[p], zeta[[u, v]]
                    tot = det.desired[i] * zeta[bit] + isi[i].T @ n_prev
                    total += stats.poisson.pmf(y, det.post_means(i, *tot))
                like.append(total)
            expect = (like[1] > like[0]).astype(np.int8)
            assert np.array_equal(rule.decide(i, y, p), expect)


def test_conditioned_rules_need_previous_decision(scn, r_special_opt):
    ch = channel_set(scn, r_special_opt.schedule)
    det = build_reaction(ch, beamforming(ch), scn)
    rule = isi_decision_rules(det, np.zeros((3, 3, 2)), "adaptive")
    with pytest.raises(ValueError):
        rule.decide(0, 10)
    with pytest.raises(ValueError):
        isi_decision_rules(det, np.zeros((3, 3, 2)), "oracle")
