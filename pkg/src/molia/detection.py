"""Receivers and error probabilities.

Two receivers are provided:

* **No reaction** -- zero-forcing: the count pair ``(Y1, Y2)`` is projected
  onto the direction orthogonal to the aligned interference, giving an
  unbiased estimate of ``N_i``.  The bit is decided by MAP on that estimate,
  with both Poisson counts replaced by Gaussians of equal mean and variance
  (a four-component mixture per hypothesis, one component per pair of
  interfering bits).
* **Reaction** -- after perfect reaction only one molecule type survives,
  with Poisson mean ``G_i * zeta``.  MAP reduces to a count threshold and the
  error probability has a closed form in Poisson CDFs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .alignment import BeamformingSet, mean_signals
from .errors import AlignmentDegenerateError, DegenerateChannelError
from .model import ChannelSet, Scenario
from .reaction import react_means

__all__ = [
    "ZFDetector",
    "ReactionDetector",
    "IsiRule",
    "PeResult",
    "build_zf",
    "map_decide",
    "zf_gaussian_pe",
    "zf_regions",
    "DecisionRegions",
    "build_reaction",
    "poisson_threshold",
    "poisson_threshold_pe",
    "analytic_pe_reaction",
    "isi_decision_rules",
    "ISI_MODES",
]

MESSAGES = np.array(list(itertools.product((0, 1), repeat=3)))  # (8, 3)
ISI_MODES = ("optimum", "isi-as-noise", "adaptive")


@dataclass(frozen=True)
class PeResult:
    per_rx: np.ndarray
    total: float


@dataclass(frozen=True)
class ZFDetector:
    """Zero-forcing combiner ``n~_i = a_i Y_i^[1] + b_i Y_i^[2]`` and the
    Gaussian model of ``n~_i`` under every message triple.

    ``cond_mean[i, k]`` / ``cond_var[i, k]`` refer to triple ``MESSAGES[k]``.
    """

    a: np.ndarray
    b: np.ndarray
    den: np.ndarray
    columns: np.ndarray
    amplitudes: tuple
    extra_mean: np.ndarray
    cond_mean: np.ndarray
    cond_var: np.ndarray

    def combine(self, i, y1, y2):
        return self.a[i] * np.asarray(y1, float) + self.b[i] * np.asarray(y2, float)

    def log_likelihood(self, i, n_tilde, bit):
        """Log of the hypothesis-``bit`` mixture density at ``n_tilde``.

        Interfering bits are uniform, so the mixture weights are 1/4.
        """
        n = np.asarray(n_tilde, dtype=float)[..., None]
        sel = MESSAGES[:, i] == bit
        mu = self.cond_mean[i, sel]
        var = self.cond_var[i, sel]
        comp = -0.5 * (n - mu) ** 2 / var - 0.5 * np.log(2 * np.pi * var)
        return special.logsumexp(comp, axis=-1) - np.log(sel.sum())


def build_zf(
    ch: ChannelSet,
    bf: BeamformingSet,
    amplitudes=(2e6, 4e6),
    noise=(0.0, 0.0),
    tol: float = 1e-9,
) -> ZFDetector:
    """Zero-forcing detector for the scheme without reaction.

    ``noise`` is the per-type mean added to every count (environment noise
    and, for the memory-aware simulator, the average leftover ISI).
    """
    ms = mean_signals(ch, bf)
    h, hi = ms.desired, ms.interference
    den = h[:, 0] * hi[:, 1] - h[:, 1] * hi[:, 0]
    scale = np.linalg.norm(h, axis=1) * np.linalg.norm(hi, axis=1)
    bad = ~(np.abs(den) > tol * scale)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise AlignmentDegenerateError(
            f"desired signal at Rx{i + 1} is parallel to the aligned interference"
        )
    a = hi[:, 1] / den
    b = -hi[:, 0] / den
    cols = ch.gains * bf.V[None, :, :]
    zeta = np.asarray(amplitudes, dtype=float)
    N = zeta[MESSAGES]  # (8, 3)
    extra = np.broadcast_to(np.asarray(noise, float), (3, 2)).copy()
    mu = np.einsum("ijl,kj->ikl", cols, N) + extra[:, None, :]  # (3, 8, 2)
    cond_mean = a[:, None] * mu[..., 0] + b[:, None] * mu[..., 1]
    cond_var = a[:, None] ** 2 * mu[..., 0] + b[:, None] ** 2 * mu[..., 1]
    return ZFDetector(
        a=a,
        b=b,
        den=den,
        columns=cols,
        amplitudes=tuple(zeta),
        extra_mean=extra,
        cond_mean=cond_mean,
        cond_var=cond_var,
    )


def map_decide(det: ZFDetector, i: int, n_tilde):
    """MAP bit from the zero-forced observation at Rx ``i``; ties decide 0."""
    l1 = det.log_likelihood(i, n_tilde, 1)
    l0 = det.log_likelihood(i, n_tilde, 0)
    out = (l1 > l0).astype(np.int8)
    return int(out) if np.ndim(out) == 0 else out


def _decision_boundaries(det, i, grid=4001):
    """Crossings of the two hypothesis mixtures at Rx ``i``.

    Searched on a dense grid over +-12 sigma of every component plus a
    coarser one over ``[-zeta1, 3 zeta1]``: far from the means the widest
    component dominates and the decision can flip again.
    """
    mu, sd = det.cond_mean[i], np.sqrt(det.cond_var[i])
    z1 = max(det.amplitudes)
    near = np.linspace(float(np.min(mu - 12 * sd)), float(np.max(mu + 12 * sd)), grid)
    wide = np.linspace(min(-z1, near[0]), max(3 * z1, near[-1]), grid)
    x = np.union1d(near, wide)

    def g(v):
        return det.log_likelihood(i, v, 1) - det.log_likelihood(i, v, 0)

    gx = g(x)
    roots = []
    for k in np.flatnonzero(np.sign(gx[:-1]) != np.sign(gx[1:])):
        roots.append(optimize.brentq(g, x[k], x[k + 1], xtol=1e-12 * max(1.0, abs(x[k]))))
    # sign of g far to the left
    return np.array(roots), gx[0] > 0


@dataclass(frozen=True)
class DecisionRegions:
    """Boundaries of the MAP decision regions on the zero-forced axis.

    ``edges[i]`` are the sorted crossing points at Rx ``i`` and
    ``first_is_one[i]`` the decision left of the first crossing; decisions
    alternate across crossings.  Deciding by :meth:`decide` matches
    :func:`map_decide` except within the root-finding tolerance of a
    boundary.
    """

    edges: tuple
    first_is_one: tuple

    def decide(self, i, n_tilde):
        k = np.searchsorted(self.edges[i], np.asarray(n_tilde, dtype=float))
        return ((k % 2 == 0) == self.first_is_one[i]).astype(np.int8)


def zf_regions(det: ZFDetector) -> DecisionRegions:
    edges, first = [], []
    for i in range(3):
        roots, left_is_one = _decision_boundaries(det, i)
        edges.append(np.sort(roots))
        first.append(bool(left_is_one))
    return DecisionRegions(tuple(edges), tuple(first))


def zf_gaussian_pe(det: ZFDetector) -> PeResult:
    """Error probability of :func:`map_decide` under the Gaussian model.

    Deterministic counterpart of the Monte-Carlo estimate; decision-region
    boundaries are located numerically and each mixture component is
    integrated in closed form.
    """
    pe = np.empty(3)
    for i in range(3):
        roots, left_is_one = _decision_boundaries(det, i)
        edges = np.concatenate([[-np.inf], roots, [np.inf]])
        labels = [(k % 2 == 0) == left_is_one for k in range(len(edges) - 1)]
        p_err = 0.0
        for k, msg in enumerate(MESSAGES):
            mu = det.cond_mean[i, k]
            sd = np.sqrt(det.cond_var[i, k])
            cdf = stats.norm.cdf(edges, mu, sd)
            mass = np.diff(cdf)
            wrong = [m for m, lab in zip(mass, labels) if int(lab) != msg[i]]
            p_err += sum(wrong)
        pe[i] = p_err / len(MESSAGES)
    return PeResult(per_rx=pe, total=float(pe.mean()))


@dataclass(frozen=True)
class ReactionDetector:
    """Threshold receiver after perfect reaction.

    ``branch[i]`` is the surviving molecule type (0 or 1); ``gain[i]`` the
    effective gain ``G_i`` so that the post-reaction mean is ``G_i * zeta``
    (plus noise); ``lam0``/``lam1`` are the post-reaction means for bit 0/1
    and ``threshold`` the MAP count threshold (``y > threshold`` -> 1).
    """

    branch: np.ndarray
    gain: np.ndarray
    coeffs: np.ndarray
    desired: np.ndarray
    columns: np.ndarray
    amplitudes: tuple
    noise: np.ndarray
    lam0: np.ndarray
    lam1: np.ndarray
    threshold: np.ndarray

    def post_means(self, i, mean1, mean2):
        """Post-reaction mean of the surviving type at Rx ``i``."""
        out = react_means(mean1, mean2, self.coeffs[i])
        return out[self.branch[i]]

    def decide(self, i, y):
        return (np.asarray(y) > self.threshold[i]).astype(np.int8)


def poisson_threshold(lam0, lam1):
    """Crossing point of two Poisson likelihoods, ``lam1 > lam0 >= 0``.

    For ``lam0 == 0`` the threshold is 0: any molecule means bit 1.
    """
    lam0 = np.asarray(lam0, float)
    lam1 = np.asarray(lam1, float)
    pos = lam0 > 0
    with np.errstate(divide="ignore"):
        g = (lam1 - lam0) / np.log(lam1 / np.where(pos, lam0, 1.0))
    return np.where(pos, g, 0.0)


def poisson_threshold_pe(lam0, lam1, threshold=None):
    """``1/2 [P(Y > g | lam0) + P(Y <= g | lam1)]`` for a count threshold ``g``.

    Evaluated through the regularized incomplete gamma function, so it is
    safe for means of order 10^6.
    """
    lam0 = np.asarray(lam0, float)
    lam1 = np.asarray(lam1, float)
    g = poisson_threshold(lam0, lam1) if threshold is None else np.asarray(threshold, float)
    k = np.floor(g)
    # P(Y <= k) for k < 0 is 0
    f0 = np.where(k >= 0, stats.poisson.cdf(k, lam0), 0.0)
    f1 = np.where(k >= 0, stats.poisson.cdf(k, lam1), 0.0)
    return 0.5 * (1.0 - f0 + f1)


def build_reaction(
    ch: ChannelSet,
    bf: BeamformingSet,
    scn: Scenario,
    noise=None,
    rtol: float = 1e-12,
) -> ReactionDetector:
    """Threshold detector for the scheme with reaction.

    ``noise`` defaults to zero; pass ``scn.env_noise`` for the noisy
    channel.  The noise enters the per-type means before the reaction, so
    on the type-1 branch the surviving noise mean is ``mu_n1 - c mu_n2``
    whenever that is non-negative.
    """
    ms = mean_signals(ch, bf)
    h = ms.desired
    c = np.asarray(scn.reaction_coeffs, dtype=float)
    if np.any(h <= 0):
        raise DegenerateChannelError("desired gains must be positive")
    ratio = h[:, 0] / h[:, 1]
    if np.any(np.abs(ratio - c) <= rtol * c):
        i = int(np.argmax(np.abs(ratio - c) <= rtol * c))
        raise DegenerateChannelError(
            f"desired signal at Rx{i + 1} has type ratio equal to c; nothing survives the reaction"
        )
    branch = np.where(ratio > c, 0, 1)
    gain = np.where(branch == 0, h[:, 0] - c * h[:, 1], h[:, 1] - h[:, 0] / c)
    noise = np.zeros(2) if noise is None else np.asarray(noise, float)
    z0, z1 = scn.amplitudes
    lam = []
    for z in (z0, z1):
        m1 = h[:, 0] * z + noise[0]
        m2 = h[:, 1] * z + noise[1]
        r1, r2 = react_means(m1, m2, c)
        lam.append(np.where(branch == 0, r1, r2))
    lam0, lam1 = lam
    if np.any(lam1 <= lam0):
        raise DegenerateChannelError("post-reaction means do not separate the two bits")
    return ReactionDetector(
        branch=branch,
        gain=gain,
        coeffs=c,
        desired=h,
        columns=ch.gains * bf.V[None, :, :],
        amplitudes=(z0, z1),
        noise=noise,
        lam0=lam0,
        lam1=lam1,
        threshold=poisson_threshold(lam0, lam1),
    )


def analytic_pe_reaction(det: ReactionDetector) -> PeResult:
    """Closed-form error probability of the reaction receiver."""
    pe = poisson_threshold_pe(det.lam0, det.lam1, det.threshold)
    return PeResult(per_rx=pe, total=float(pe.mean()))


@dataclass(frozen=True)
class IsiRule:
    """Bit decisions for the reaction receiver with one slot of memory.

    ``decide(i, y, prev)`` takes the surviving-type count ``y`` and, for the
    optimum and adaptive rules, the receiver's own previous decision
    ``prev``.  Every
    rule is a lookup table over counts ``0..table.shape[-1]-1``; larger
    counts reuse the last entry.
    """

    mode: str
    table: np.ndarray  # (3, 2, ymax) when conditioned on prev, else (3, 1, ymax)
    means: np.ndarray  # hypothesis means used to build the table

    def decide(self, i, y, prev=None):
        y = np.minimum(np.asarray(y, dtype=np.int64), self.table.shape[-1] - 1)
        if self.table.shape[1] == 2:
            if prev is None:
                raise ValueError(f"{self.mode} rule needs the previous decision")
            return self.table[i, np.asarray(prev, dtype=np.int64), y]
        return self.table[i, 0, y]


def _threshold_table(lam0, lam1, ymax):
    y = np.arange(ymax)
    return (y > poisson_threshold(lam0, lam1)).astype(np.int8)


def isi_decision_rules(det: ReactionDetector, isi_columns, mode: str) -> IsiRule:
    """Decision rule of the reaction receiver under one-slot ISI.

    ``isi_columns[i, j]`` is the per-type mean count at Rx ``i`` per molecule
    sent by Tx ``j`` in the *previous* slot (gains at ``dt + T_s`` times the
    beamforming split).

    ``optimum``      MAP given the receiver's own previous decision, with
                     the interferers' previous bits marginalised (uniform
                     priors).
    ``isi-as-noise`` the average leftover is added to the noise mean and
                     the Poisson threshold is recomputed.
    ``adaptive``     like ``isi-as-noise`` but the receiver's own previous
                     decision fixes its own leftover term.
    """
    if mode not in ISI_MODES:
        raise ValueError(f"unknown ISI rule {mode!r}")
    isi = np.asarray(isi_columns, float)
    zeta = np.asarray(det.amplitudes)
    zbar = zeta.mean()

    def mean(i, bit, leftover):
        tot = det.desired[i] * zeta[bit] + leftover + det.noise
        return det.post_means(i, tot[0], tot[1])

    lam_hi = max(float(mean(i, 1, isi[i].T @ np.full(3, zeta[1]))) for i in range(3))
    ymax = int(lam_hi + 30 * np.sqrt(lam_hi) + 50)
    y = np.arange(ymax)

    if mode == "optimum":
        table = np.empty((3, 2, ymax), dtype=np.int8)
        means = np.empty((3, 2, 2, 4))
        for i in range(3):
            others = [j for j in range(3) if j != i]
            for p in (0, 1):
                for bit in (0, 1):
                    for k, (u, v) in enumerate(itertools.product((0, 1), repeat=2)):
                        n_prev = np.empty(3)
                        n_prev[i] = zeta[p]
                        n_prev[others] = zeta[[u, v]]
                        means[i, p, bit, k] = mean(i, bit, isi[i].T @ n_prev)
                ll = [
                    special.logsumexp(
                        stats.poisson.logpmf(y[:, None], means[i, p, bit][None, :]), axis=1
                    )
                    for bit in (0, 1)
                ]
                table[i, p] = ll[1] > ll[0]
        return IsiRule(mode, table, means)

    if mode == "isi-as-noise":
        table = np.empty((3, 1, ymax), dtype=np.int8)
        means = np.empty((3, 2))
        for i in range(3):
            left = isi[i].T @ np.full(3, zbar)
            means[i] = [mean(i, 0, left), mean(i, 1, left)]
            table[i, 0] = _threshold_table(means[i, 0], means[i, 1], ymax)
        return IsiRule(mode, table, means)

    table = np.empty((3, 2, ymax), dtype=np.int8)
    means = np.empty((3, 2, 2))
    for i in range(3):
        for p in (0, 1):
            n_prev = np.full(3, zbar)
            n_prev[i] = zeta[p]
            left = isi[i].T @ n_prev
            means[i, p] = [mean(i, 0, left), mean(i, 1, left)]
            table[i, p] = _threshold_table(means[i, p, 0], means[i, p, 1], ymax)
    return IsiRule(mode, table, means)
