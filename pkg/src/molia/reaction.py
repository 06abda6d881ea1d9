"""Reaction-based cancellation of the aligned interference.

At Rx ``i`` an enzyme makes ``c_i`` type-1 molecules annihilate with one
type-2 molecule.  If the aligned interference arrives with exactly that
type-1 : type-2 ratio it disappears completely, together with its
signal-dependent counting noise.

For shared per-type times, zero flow and a common coefficient ``c``, the IA
and reaction conditions collapse to a straight line in the plane of the
releasing-time differences ``(dt12, dt13) = (t~1 - t~2, t~1 - t~3)``; the
whole schedule then follows from one point on that line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfeasiblePointError,
    InfeasibleRegionError,
    InfeasibleScheduleError,
    InvalidReactionCoefficientError,
    ScenarioError,
)
from .model import Scenario, TimingSchedule

log = logging.getLogger(__name__)

__all__ = [
    "REACTION_TERMS",
    "TOL_EXCL",
    "ExcludedPoint",
    "Lemma2Region",
    "reaction_residuals",
    "time_scale",
    "lemma2_region",
    "lemma2_times",
    "appendix_deltas",
    "react_means",
    "react_counts",
]

TOL_EXCL = 1e-3

# (sign, rx, tx) terms of each receiver's reaction condition.
REACTION_TERMS = (
    ((+1, 0, 1), (+1, 2, 0), (-1, 2, 1)),
    ((+1, 1, 0),),
    ((+1, 2, 0),),
)


def _reaction_terms(scn: Scenario, dt: np.ndarray):
    """Raw reaction residuals (left minus right) and their normalisers.

    ``dt`` may carry leading batch axes; the outputs then have shape
    ``batch + (3,)``.
    """
    d1, d2 = scn.diffusion
    r2 = scn.sq_distances
    nu = scn.flow
    nu2 = float(nu @ nu)
    inv = 1.0 / d1 - 1.0 / d2
    batch = dt.shape[:-3]
    out = np.empty(batch + (3,))
    scales = np.empty(batch + (3,))
    for i, terms in enumerate(REACTION_TERMS):
        total = 6.0 * np.log(d1 / d2) + 4.0 * np.log(scn.reaction_coeffs[i])
        scale = 0.0
        link = np.zeros(3)
        for sign, a, b in terms:
            t1, t2 = dt[..., a, b, 0], dt[..., a, b, 1]
            rf = r2[a, b] * (1.0 / (d1 * t1) - 1.0 / (d2 * t2))
            total = total + sign * (rf + 6.0 * np.log(t1 / t2))
            total = total + sign * nu2 * (t1 / d1 - t2 / d2)
            link += sign * scn.link_vectors[a, b]
            scale = np.maximum(scale, np.abs(rf))
        out[..., i] = total - 2.0 * float(link @ nu) * inv
        scales[..., i] = scale
    return out, scales


def reaction_residuals(scn: Scenario, ts: TimingSchedule) -> np.ndarray:
    """Left-minus-right of the three reaction conditions.

    Zero at Rx ``i`` means the aligned interference reaches Rx ``i`` with
    type-1 : type-2 ratio exactly ``c_i``.  Releasing times may differ per
    type; each receiver must sample both types at the same instant.
    """
    if not np.all(ts.sample[:, 0] == ts.sample[:, 1]):
        raise InfeasibleScheduleError(
            "reaction conditions need equal per-type sampling times at every receiver"
        )
    dt = ts.deltas
    if np.any(dt <= 0):
        raise InfeasibleScheduleError("every elapsed time must be positive")
    return _reaction_terms(scn, dt)[0]


def time_scale(diffusion, c: float) -> float:
    """``s = -(1/D1 - 1/D2) / (4 ln c - 6 ln(D2/D1))`` [s/m^2].

    Under the reaction conditions the cross links satisfy
    ``t2 - t~1 = s r21^2`` and ``t3 - t~1 = s r31^2``.
    """
    d1, d2 = diffusion
    den = 4.0 * np.log(c) - 6.0 * np.log(d2 / d1)
    with np.errstate(divide="ignore"):
        s = -(1.0 / d1 - 1.0 / d2) / den
    return float(s)


@dataclass(frozen=True)
class ExcludedPoint:
    """A point of the line where one independency condition fails."""

    dt12: float
    dt13: float
    receiver: int  # zero-based


@dataclass(frozen=True)
class Lemma2Region:
    """One-dimensional feasible set of ``(dt12, dt13)``.

    The line is ``alpha * dt12 - beta * dt13 = gamma``; ``dt12_bounds`` is
    the open interval on which all nine elapsed times are positive.
    ``published_bounds`` keeps the closed-form interval bounds as originally stated
    for comparison.
    """

    s: float
    c: float
    alpha: float
    beta: float
    gamma: float
    r2: np.ndarray
    dt12_bounds: tuple
    dt13_bounds: tuple
    published_bounds: dict
    excluded: tuple
    notes: tuple = field(default=())

    # elapsed-time matrix: dt[i, j] = C12 * dt12 + C13 * dt13 + C0
    @property
    def _delta_coeffs(self):
        s, r2 = self.s, self.r2
        k = r2[0, 2] / r2[1, 2]
        a21, a31 = s * r2[1, 0], s * r2[2, 0]
        c12 = np.array([[0, 1, 0], [0, 1, 0], [0, 1, 0]], dtype=float)
        c13 = np.array([[k - 1, k - 1, k], [0, 0, 1], [0, 0, 1]], dtype=float)
        c0 = np.array([[k * a21] * 3, [a21] * 3, [a31] * 3])
        return c12, c13, c0

    def dt13_of(self, dt12):
        if self.beta == 0:
            raise InfeasiblePointError("line is vertical in dt12 (r13 == r23)", "degenerate")
        return (self.alpha * np.asarray(dt12, float) - self.gamma) / self.beta

    def dt12_of(self, dt13):
        if self.alpha == 0:
            raise InfeasiblePointError("line is horizontal in dt12 (r12 == r32)", "degenerate")
        return (self.gamma + self.beta * np.asarray(dt13, float)) / self.alpha

    @property
    def endpoints(self):
        lo, hi = self.dt12_bounds
        return (lo, float(self.dt13_of(lo))), (hi, float(self.dt13_of(hi)))

    def deltas(self, dt12, dt13=None) -> np.ndarray:
        dt13 = self.dt13_of(dt12) if dt13 is None else dt13
        return appendix_deltas(self, dt12, dt13)

    def min_delta(self, dt12) -> float:
        return float(self.deltas(dt12).min())

    def excluded_distance(self, dt12) -> float:
        """Distance in ``dt12`` to the nearest excluded point."""
        if not self.excluded:
            return np.inf
        return float(min(abs(dt12 - e.dt12) for e in self.excluded))

    def check(self, dt12, tol_excl: float = TOL_EXCL):
        """Raise :class:`InfeasiblePointError` if ``dt12`` is not admissible."""
        lo, hi = self.dt12_bounds
        if not lo < dt12 < hi:
            raise InfeasiblePointError(
                f"dt12={dt12:.6g} outside admissible interval ({lo:.6g}, {hi:.6g})",
                "positivity",
            )
        for e in self.excluded:
            if abs(dt12 - e.dt12) < tol_excl:
                raise InfeasiblePointError(
                    f"dt12={dt12:.6g} within {tol_excl:g} s of the point excluded by the "
                    f"independency condition at Rx{e.receiver + 1} ({e.dt12:.6g})",
                    f"independency{e.receiver + 1}",
                )

    def sample(self, n: int, tol_excl: float = TOL_EXCL):
        """``n`` points uniform in ``dt12`` over the open interval.

        Returns ``(dt12, dt13, excluded)`` arrays; ``excluded`` flags points
        within ``tol_excl`` of an excluded value.
        """
        lo, hi = self.dt12_bounds
        dt12 = np.linspace(lo, hi, n + 2)[1:-1]
        dt13 = self.dt13_of(dt12)
        near = np.zeros(n, dtype=bool)
        for e in self.excluded:
            near |= np.abs(dt12 - e.dt12) < tol_excl
        return dt12, dt13, near


def _common_c(scn, c):
    if c is not None:
        return float(c)
    cs = scn.reaction_coeffs
    if not (cs[0] == cs[1] == cs[2]):
        raise ScenarioError("reaction coefficients differ; pass a common c explicitly")
    return cs[0]


def lemma2_region(scn: Scenario, c: float | None = None) -> Lemma2Region:
    """Feasible ``(dt12, dt13)`` segment for shared per-type times, zero flow
    and common reaction coefficient ``c`` (default: the scenario's)."""
    if np.any(scn.flow != 0):
        raise ScenarioError("the closed-form region assumes zero flow")
    c = _common_c(scn, c)
    if not c > 0:
        raise InvalidReactionCoefficientError("reaction coefficient must be positive")
    s = time_scale(scn.diffusion, c)
    if not (np.isfinite(s) and s > 0):
        raise InvalidReactionCoefficientError(
            f"time scale s={s:.6g} is not positive for c={c:g} "
            f"and D=({scn.diffusion[0]:.3g}, {scn.diffusion[1]:.3g})"
        )
    r2 = np.array(scn.sq_distances)
    alpha = 1.0 - r2[0, 1] / r2[2, 1]
    beta = 1.0 - r2[0, 2] / r2[1, 2]
    gamma = s * (r2[0, 1] / r2[2, 1] * r2[2, 0] - r2[0, 2] / r2[1, 2] * r2[1, 0])
    notes = []
    if alpha == 0 and beta == 0:
        raise InfeasibleRegionError("degenerate geometry: r12 == r32 and r13 == r23")

    # Parametrise the line as p0 + u * d, d = (beta, alpha) so u increases
    # with dt12 whenever beta != 0.
    if beta != 0:
        d = np.array([1.0, alpha / beta])
        p0 = np.array([0.0, -gamma / beta])
    else:
        notes.append("r13 == r23: dt12 is fixed, treated as the r13 > r23 branch")
        d = np.array([0.0, 1.0])
        p0 = np.array([gamma / alpha, 0.0])

    proto = Lemma2Region(s, c, alpha, beta, gamma, r2, (0, 0), (0, 0), {}, ())
    c12, c13, c0 = proto._delta_coeffs
    # dt_ij(u) = a + b u > 0 for all nine links
    a = c12 * p0[0] + c13 * p0[1] + c0
    b = c12 * d[0] + c13 * d[1]
    lo, hi = -np.inf, np.inf
    for aa, bb in zip(a.ravel(), b.ravel()):
        if bb > 0:
            lo = max(lo, -aa / bb)
        elif bb < 0:
            hi = min(hi, -aa / bb)
        elif aa <= 0:
            raise InfeasibleRegionError("an elapsed time is non-positive on the whole line")
    if not lo < hi:
        raise InfeasibleRegionError("no point of the line keeps every elapsed time positive")
    pts = [p0 + u * d for u in (lo, hi)]
    if beta != 0:
        dt12_bounds = (float(pts[0][0]), float(pts[1][0]))
        dt13_bounds = tuple(sorted((float(pts[0][1]), float(pts[1][1]))))
    else:
        dt12_bounds = (float(p0[0]), float(p0[0]))
        dt13_bounds = (float(pts[0][1]), float(pts[1][1]))

    low = -s * min(r2[1, 0], r2[2, 0])
    published = {"dt12_lower": low, "dt13_lower": low}
    if r2[0, 2] < r2[1, 2]:
        published["dt13_upper"] = -s * r2[1, 0] / (1.0 - r2[1, 2] / r2[0, 2])

    excluded = []

    def _add(receiver, dt12=None, dt13=None):
        if dt12 is None:
            if alpha == 0:
                return
            dt12 = (gamma + beta * dt13) / alpha
        if dt13 is None:
            if beta == 0:
                return
            dt13 = (alpha * dt12 - gamma) / beta
        excluded.append(ExcludedPoint(float(dt12), float(dt13), receiver))

    den = r2[2, 1] - r2[1, 1]
    if den != 0:
        _add(1, dt12=s * (r2[1, 1] * r2[2, 0] - r2[1, 0] * r2[2, 1]) / den)
    else:
        notes.append("r32 == r22: no dt12 is excluded by the Rx2 independency condition")
    den = r2[1, 2] - r2[0, 2]
    if den != 0:
        _add(0, dt13=s * (r2[0, 2] * r2[1, 0] - r2[0, 0] * r2[1, 2]) / den)
    else:
        notes.append("r23 == r13: no dt13 is excluded by the Rx1 independency condition")
    den = r2[1, 2] - r2[2, 2]
    if den != 0:
        _add(2, dt13=s * (r2[2, 2] * r2[1, 0] - r2[2, 0] * r2[1, 2]) / den)
    else:
        notes.append("r23 == r33: no dt13 is excluded by the Rx3 independency condition")
    for n in notes:
        log.info(n)
    excluded.sort(key=lambda e: e.dt12)

    return Lemma2Region(
        s=s,
        c=c,
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        r2=r2,
        dt12_bounds=dt12_bounds,
        dt13_bounds=dt13_bounds,
        published_bounds=published,
        excluded=tuple(excluded),
        notes=tuple(notes),
    )


def appendix_deltas(region: Lemma2Region, dt12, dt13) -> np.ndarray:
    """The nine elapsed times ``t_i - t~_j`` as a (3, 3) array ``[i, j]``."""
    c12, c13, c0 = region._delta_coeffs
    return c12 * dt12 + c13 * dt13 + c0


def lemma2_times(
    region: Lemma2Region,
    dt12: float,
    t1_release: float | None = None,
    tol_excl: float = TOL_EXCL,
) -> TimingSchedule:
    """Full special-case schedule for one admissible ``dt12``.

    Without ``t1_release`` the schedule is shifted so its earliest time is 0.
    """
    region.check(dt12, tol_excl)
    dt13 = float(region.dt13_of(dt12))
    t1r = 0.0 if t1_release is None else float(t1_release)
    rel = np.array([t1r, t1r - dt12, t1r - dt13])
    r2, s = region.r2, region.s
    k = r2[0, 2] / r2[1, 2]
    smp = np.array(
        [
            k * rel[0] + (1.0 - k) * rel[2] + s * k * r2[1, 0],
            rel[0] + s * r2[1, 0],
            rel[0] + s * r2[2, 0],
        ]
    )
    ts = TimingSchedule.special(rel, smp)
    return ts.normalized() if t1_release is None else ts


def react_means(m1, m2, c):
    """Mean counts left after perfect reaction ``c M1 + M2 -> products``."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    return np.maximum(0.0, m1 - c * m2), np.maximum(0.0, m2 - m1 / c)


def react_counts(y1, y2, c):
    """Counts left after pairwise annihilation of sampled counts.

    ``c * y2`` and ``y1 / c`` are truncated toward zero when ``c`` is not an
    integer.
    """
    y1 = np.asarray(y1)
    y2 = np.asarray(y2)
    return (
        np.maximum(0, y1 - np.trunc(c * y2).astype(y1.dtype)),
        np.maximum(0, y2 - np.trunc(y1 / c).astype(y2.dtype)),
    )
