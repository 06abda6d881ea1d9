"""Seeded Monte-Carlo simulation of the full transmit/receive chain.

Trials are processed in fixed-size blocks.  Block ``b`` draws from its own
PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(b,))``, so a result
depends only on ``(seed, trials, block_size)`` and never on how many worker
threads evaluate the blocks.  Block reports are merged by summing counts.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .alignment import BeamformingSet, beamforming
from .detection import (
    ISI_MODES,
    build_reaction,
    build_zf,
    isi_decision_rules,
    zf_regions,
)
from .errors import DomainError
from .model import Scenario, TimingSchedule, channel_set
from .reaction import react_counts, react_means

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "ErrorReport",
    "simulate",
    "poisson_sample",
    "wilson_interval",
    "NORMAL_SWITCH",
]

# Above this mean, Poisson draws use a continuity-corrected normal.
NORMAL_SWITCH = 1e4
ISI_SLOTS = 64


def poisson_sample(rng: np.random.Generator, lam, switch: float = NORMAL_SWITCH):
    """Poisson counts with mean ``lam`` (any shape).

    Exact (numpy's generator) below ``switch``; above it
    ``floor(lam + sqrt(lam) * Z + 1/2)`` clipped at zero.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise DomainError("Poisson mean must be finite and non-negative")
    big = lam >= switch
    if not np.any(big):
        return rng.poisson(lam)
    out = rng.poisson(np.where(big, 0.0, lam))
    z = rng.standard_normal(lam.shape)
    approx = np.floor(lam + np.sqrt(lam) * z + 0.5)
    return np.where(big, np.maximum(approx, 0), out).astype(np.int64)


def poisson_inverse(u, lam):
    """Poisson quantile of uniforms ``u``; a smooth coupling across means."""
    lam = np.asarray(lam, dtype=float)
    out = stats.poisson.ppf(u, np.where(lam > 0, lam, 1.0))
    return np.where(lam > 0, out, 0).astype(np.int64)


def wilson_interval(k, n, z: float = 1.959963984540054):
    """Wilson score interval for ``k`` successes out of ``n``."""
    k = np.asarray(k, dtype=float)
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the exact bounds are 0 at k = 0 and 1 at k = n; rounding misses them by ulps
    lo = np.where(k <= 0, 0.0, centre - half)
    hi = np.where(k >= n, 1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo settings.

    ``detector`` is ``"reaction"`` or ``"zf-map"``; ``rule`` selects the ISI
    decision rule of the reaction receiver when ``isi_memory == 1``.
    ``reaction_model`` chooses how perfect reaction acts on random counts:
    ``"poisson"`` draws the surviving type directly from a Poisson law with
    the post-reaction mean; ``"counts"`` samples both types and annihilates
    the sampled counts pairwise.  ``sampler="inverse"`` draws counts by
    Poisson quantiles of fixed uniforms (common random numbers across
    nearby schedules).
    """

    trials: int = 100_000
    seed: int = 0
    isi_memory: int = 0
    noise_on: bool = False
    detector: str = "reaction"
    rule: str = "optimum"
    reaction_model: str = "poisson"
    sampler: str = "direct"
    block_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.isi_memory not in (0, 1):
            raise ValueError("isi_memory must be 0 or 1")
        if self.detector not in ("reaction", "zf-map"):
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.rule not in ISI_MODES:
            raise ValueError(f"unknown ISI rule {self.rule!r}")
        if self.reaction_model not in ("poisson", "counts"):
            raise ValueError(f"unknown reaction model {self.reaction_model!r}")
        if self.sampler not in ("direct", "inverse"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass
class ErrorReport:
    """Per-receiver error counts over ``trials`` trials."""

    errors: np.ndarray
    trials: int
    seed: int | None = None
    z: float = field(default=1.959963984540054, repr=False)
    trial_errors: np.ndarray | None = field(default=None, repr=False)

    @property
    def rates(self) -> np.ndarray:
        return self.errors / self.trials

    @property
    def total(self) -> float:
        return float(self.rates.mean())

    @property
    def intervals(self) -> np.ndarray:
        """Wilson intervals per receiver, shape (3, 2)."""
        lo, hi = wilson_interval(self.errors, self.trials, self.z)
        return np.stack([lo, hi], axis=1)

    @property
    def total_interval(self):
        """Wilson interval of the pooled rate (treats the 3n decisions as
        independent)."""
        lo, hi = wilson_interval(self.errors.sum(), 3 * self.trials, self.z)
        return float(lo), float(hi)

    def std_errors(self):
        """One-sigma Wilson half-widths: per receiver and pooled total."""
        lo, hi = wilson_interval(self.errors, self.trials, 1.0)
        tlo, thi = wilson_interval(self.errors.sum(), 3 * self.trials, 1.0)
        return (hi - lo) / 2, float(thi - tlo) / 2

    def merge(self, other: "ErrorReport") -> "ErrorReport":
        return ErrorReport(self.errors + other.errors, self.trials + other.trials, self.seed)

    def paired_difference(self, other: "ErrorReport"):
        """Total-rate difference ``self - other`` and its paired standard error.

        Both reports must come from the same seed and trial count with
        ``keep_trials=True``; the draws are then shared and the error of the
        difference comes from the discordant decisions only.
        """
        if self.trial_errors is None or other.trial_errors is None:
            raise ValueError("paired comparison needs keep_trials=True on both runs")
        a = self.trial_errors.sum(axis=1).astype(float)
        b = other.trial_errors.sum(axis=1).astype(float)
        d = (a - b) / 3.0
        return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


def _block_rng(seed, b):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))


class _Chain:
    """Everything that stays fixed across trials."""

    def __init__(self, scn, ts, bf, cfg):
        self.scn = scn
        self.cfg = cfg
        ch = channel_set(scn, ts)
        self.bf = beamforming(ch) if bf is None else bf
        self.cols = ch.gains * self.bf.V[None, :, :]
        self.zeta = np.asarray(scn.amplitudes)
        self.noise = np.asarray(scn.env_noise) if cfg.noise_on else np.zeros(2)
        self.isi = None
        if cfg.isi_memory:
            ich = channel_set(scn, ts, offset=scn.slot_duration)
            self.isi = ich.gains * self.bf.V[None, :, :]
        self.c = np.asarray(scn.reaction_coeffs)

        if cfg.detector == "reaction":
            self.det = build_reaction(ch, self.bf, scn, noise=self.noise)
            self.rule = None
            if self.isi is not None:
                self.rule = isi_decision_rules(self.det, self.isi, cfg.rule)
        else:
            extra = np.tile(self.noise, (3, 1))
            if self.isi is not None:
                extra = extra + np.einsum("ijl->il", self.isi) * self.zeta.mean()
            self.det = build_zf(ch, self.bf, scn.amplitudes, noise=extra)
            self.regions = zf_regions(self.det)

    def _counts(self, rng, lam):
        if self.cfg.sampler == "inverse":
            return poisson_inverse(rng.random(lam.shape), lam)
        return poisson_sample(rng, lam)

    def _decide(self, rng, means, prev_dec=None):
        """Decisions (n, 3) from per-type mean counts (n, 3, 2)."""
        n = means.shape[0]
        out = np.empty((n, 3), dtype=np.int8)
        if self.cfg.detector == "reaction":
            for i in range(3):
                c = self.c[i]
                active = self.det.branch[i]
                if self.cfg.reaction_model == "poisson":
                    post = react_means(means[:, i, 0], means[:, i, 1], c)[active]
                    y = self._counts(rng, post)
                else:
                    y1 = self._counts(rng, means[:, i, 0])
                    y2 = self._counts(rng, means[:, i, 1])
                    y = react_counts(y1, y2, c)[active]
                if self.rule is None:
                    out[:, i] = self.det.decide(i, y)
                else:
                    prev = None if prev_dec is None else prev_dec[:, i]
                    out[:, i] = self.rule.decide(i, y, prev)
        else:
            y = self._counts(rng, means)
            for i in range(3):
                nt = self.det.combine(i, y[:, i, 0], y[:, i, 1])
                out[:, i] = self.regions.decide(i, nt)
        return out

    def run_block(self, b, n):
        rng = _block_rng(self.cfg.seed, b)
        if self.isi is None:
            bits = rng.integers(0, 2, size=(n, 3))
            means = np.einsum("ijl,nj->nil", self.cols, self.zeta[bits]) + self.noise
            dec = self._decide(rng, means)
            return dec != bits

        # One-slot memory: ceil(n / T) independent streams of T counted slots,
        # each preceded by one warm-up slot whose true bits seed the feedback.
        # The first n (stream, slot) decisions are counted.
        T = ISI_SLOTS
        S = math.ceil(n / T)
        bits = rng.integers(0, 2, size=(S, T + 2, 3))
        N = self.zeta[bits]
        wrong = np.empty((S, T, 3), dtype=bool)
        prev_dec = bits[:, 0, :].astype(np.int8)
        for k in range(1, T + 2):
            means = (
                np.einsum("ijl,sj->sil", self.cols, N[:, k])
                + np.einsum("ijl,sj->sil", self.isi, N[:, k - 1])
                + self.noise
            )
            dec = self._decide(rng, means, prev_dec)
            if k >= 2:
                wrong[:, k - 2] = dec != bits[:, k]
            prev_dec = dec
        return wrong.reshape(S * T, 3)[:n]


def _block_sizes(trials, block):
    full, rest = divmod(trials, block)
    return [block] * full + ([rest] if rest else [])


def simulate(
    scn: Scenario,
    ts: TimingSchedule,
    bf: BeamformingSet | None = None,
    cfg: SimConfig = SimConfig(),
    keep_trials: bool = False,
) -> ErrorReport:
    """Monte-Carlo error rates for a schedule.

    Per trial the three messages are drawn uniformly, molecules are released
    with the beamforming split, the receivers count Poisson numbers of
    molecules (plus one slot of leftover molecules and environment noise when
    enabled), the configured receiver decides, and errors are tallied.
    ``keep_trials`` retains the per-trial error flags for paired comparisons.
    With ``reaction_model="poisson"`` and the direct sampler the random draws
    do not depend on earlier decisions, so runs that differ only in the
    decision rule see identical channel realisations.
    """
    chain = _Chain(scn, ts, bf, cfg)
    sizes = _block_sizes(cfg.trials, cfg.block_size)
    jobs = list(enumerate(sizes))
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda bn: chain.run_block(*bn), jobs))
    else:
        parts = [chain.run_block(b, n) for b, n in jobs]
    errors = np.sum([p.sum(axis=0) for p in parts], axis=0).astype(np.int64)
    log.debug("simulated %d trials (seed %d): %s", cfg.trials, cfg.seed, errors)
    flags = np.concatenate(parts) if keep_trials else None
    return ErrorReport(errors=errors, trials=cfg.trials, seed=cfg.seed, trial_errors=flags)
