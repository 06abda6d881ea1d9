import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from molia import SimConfig, analytic_pe_reaction, beamforming, build_reaction, channel_set, simulate
from molia.errors import DomainError
from molia.montecarlo import poisson_inverse, poisson_sample, wilson_interval


@pytest.mark.parametrize("lam", [0.7, 3.7, 48.0, 900.0])
def test_poisson_sample_chi_square(lam):
    rng = np.random.default_rng(7)
    y = poisson_sample(rng, np.full(200_000, lam))
    lo, hi = stats.poisson.ppf([1e-4, 1 - 1e-4], lam).astype(int)
    edges = np.arange(lo, hi + 2)
    obs = np.array([np.sum(y < lo)] + [np.sum(y == k) for k in edges[:-1]] + [np.sum(y > hi)])
    p = np.concatenate([[stats.poisson.cdf(lo - 1, lam)], stats.poisson.pmf(edges[:-1], lam), [stats.poisson.sf(hi, lam)]])
    keep = p * y.size > 5
    exp = p[keep] * y.size
    chi2 = np.sum((obs[keep] - exp) ** 2 / exp)
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3


def test_poisson_sample_normal_branch_moments():
    rng = np.random.default_rng(3)
    lam = 2.5e5
    y = poisson_sample(rng, np.full(400_000, lam))
    assert y.dtype == np.int64
    assert abs(y.mean() - lam) < 5 * np.sqrt(lam / y.size)
    assert y.var() == pytest.approx(lam, rel=0.01)


@pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf])
def test_poisson_sample_rejects_bad_means(bad):
    with pytest.raises(DomainError):
        poisson_sample(np.random.default_rng(0), [1.0, bad])


def test_poisson_inverse_zero_mean_and_monotone():
    u = np.linspace(0.01, 0.99, 50)
    assert np.all(poisson_inverse(u, 0.0) == 0)
    a, b = poisson_inverse(u, 10.0), poisson_inverse(u, 11.0)
    assert np.all(np.diff(a) >= 0) and np.all(b >= a)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 10_000), frac=st.floats(0, 1))
def test_wilson_interval_properties(n, frac):
    k = int(round(frac * n))
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1
    lo2, hi2 = wilson_interval(n - k, n)
    assert lo == pytest.approx(1 - hi2, abs=1e-12)


@pytest.fixture(scope="module")
def low_snr(scn):
    return scn.replace(amplitudes=(1e6, 2e6))


def test_seeded_runs_are_bit_identical(low_snr, r_special_opt):
    cfg = SimConfig(trials=30_000, seed=11)
    a = simulate(low_snr, r_special_opt.schedule, cfg=cfg, keep_trials=True)
    b = simulate(low_snr, r_special_opt.schedule, cfg=cfg, keep_trials=True)
    assert np.array_equal(a.errors, b.errors)
    assert np.array_equal(a.trial_errors, b.trial_errors)
    c = simulate(low_snr, r_special_opt.schedule, cfg=SimConfig(trials=30_000, seed=12))
    assert not np.array_equal(a.errors, c.errors)


@pytest.mark.parametrize("extra", [dict(), dict(isi_memory=1, rule="adaptive"), dict(detector="zf-map")])
def test_worker_count_does_not_change_results(scn, low_snr, r_special_opt, snapped, extra):
    ts = snapped["nr-gen"] if extra.get("detector") == "zf-map" else r_special_opt.schedule
    base = dict(trials=20_000, seed=5, block_size=4096, **extra)
    one = simulate(low_snr, ts, cfg=SimConfig(workers=1, **base), keep_trials=True)
    many = simulate(low_snr, ts, cfg=SimConfig(workers=4, **base), keep_trials=True)
    assert np.array_equal(one.errors, many.errors)
    assert np.array_equal(one.trial_errors, many.trial_errors)
    assert one.trial_errors.shape == (20_000, 3)
    assert np.array_equal(one.trial_errors.sum(axis=0), one.errors)


def test_mc_agrees_with_closed_form(low_snr, r_special_opt):
    ts = r_special_opt.schedule
    ch = channel_set(low_snr, ts)
    pe = analytic_pe_reaction(build_reaction(ch, beamforming(ch), low_snr))
    rep = simulate(low_snr, ts, cfg=SimConfig(trials=200_000, seed=1))
    per_rx, total_se = rep.std_errors()
    assert abs(rep.total - pe.total) < 4 * total_se
    assert np.all(np.abs(rep.rates - pe.per_rx) < 4 * per_rx + 1e-6)


def test_report_intervals_and_merge(low_snr, r_special_opt):
    a = simulate(low_snr, r_special_opt.schedule, cfg=SimConfig(trials=10_000, seed=1))
    b = simulate(low_snr, r_special_opt.schedule, cfg=SimConfig(trials=10_000, seed=2))
    m = a.merge(b)
    assert m.trials == 20_000 and np.array_equal(m.errors, a.errors + b.errors)
    iv = a.intervals
    assert iv.shape == (3, 2) and np.all(iv[:, 0] <= a.rates) and np.all(a.rates <= iv[:, 1])
    lo, hi = a.total_interval
    assert lo <= a.total <= hi


def test_paired_difference_of_identical_rules_is_zero(low_snr, r_special_opt):
    cfg = SimConfig(trials=10_000, seed=3, isi_memory=1, rule="adaptive")
    a = simulate(low_snr, r_special_opt.schedule, cfg=cfg, keep_trials=True)
    b = simulate(low_snr, r_special_opt.schedule, cfg=cfg, keep_trials=True)
    diff, se = a.paired_difference(b)
    assert diff == 0.0 and se == 0.0
    with pytest.raises(ValueError):
        simulate(low_snr, r_special_opt.schedule, cfg=cfg).paired_difference(a)


def test_count_level_reaction_model_runs(low_snr, r_special_opt):
    rep = simulate(low_snr, r_special_opt.schedule, cfg=SimConfig(trials=20_000, reaction_model="counts"))
    assert 0 < rep.total < 0.5


def test_inverse_sampler_runs(low_snr, r_special_opt):
    rep = simulate(low_snr, r_special_opt.schedule, cfg=SimConfig(trials=20_000, sampler="inverse"))
    assert 0 < rep.total < 0.5


@pytest.mark.parametrize(
    "bad",
    [
        dict(trials=0),
        dict(isi_memory=2),
        dict(detector="ml"),
        dict(rule="oracle"),
        dict(reaction_model="exact"),
        dict(sampler="sobol"),
        dict(block_size=0),
    ],
)
def test_sim_config_validation(bad):
    with pytest.raises(ValueError):
        SimConfig(**bad)
