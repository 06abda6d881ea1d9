"""Time-based interference alignment for the three-user, two-type channel.

The beamforming vectors split each transmitter's molecule budget between the
two molecule types so that, at every receiver, the two interfering signal
vectors point the same way.  Rx2 and Rx3 are aligned by construction; Rx1
needs the releasing/sampling times to satisfy one scalar equation (the *IA
condition*).  The desired signal must additionally stay off the interference
direction at every receiver (the *independency conditions*).

Residuals are evaluated in closed form from the Green's function, i.e. as
signed sums of ``r_ij^2 * f(dt_ij)`` plus ``6 ln`` of elapsed-time ratios,
where ``f`` is :func:`molia.model.spread_difference`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError, InfeasibleScheduleError
from .model import ChannelSet, Scenario, TimingSchedule

__all__ = [
    "BeamformingSet",
    "MeanSignals",
    "ConditionReport",
    "beamforming",
    "mean_signals",
    "check_conditions",
    "check_conditions_special",
    "IA_TERMS",
    "INDEPENDENCY_TERMS",
    "TOL_EQ",
    "TOL_NEQ",
]

TOL_EQ = 1e-9
TOL_NEQ = 1e-3

# (sign, rx, tx) terms of the log-ratio sums; zero-based indices.
IA_TERMS = ((+1, 0, 2), (-1, 0, 1), (+1, 1, 0), (-1, 1, 2), (+1, 2, 1), (-1, 2, 0))
INDEPENDENCY_TERMS = (
    ((+1, 0, 0), (-1, 0, 1), (+1, 2, 1), (-1, 2, 0)),
    ((+1, 1, 1), (-1, 1, 0), (+1, 2, 0), (-1, 2, 1)),
    ((+1, 2, 2), (-1, 2, 0), (+1, 1, 0), (-1, 1, 2)),
)


@dataclass(frozen=True)
class BeamformingSet:
    """Per-transmitter split ``V[j] = (V_j^[1], V_j^[2])`` with unit 1-norm.

    ``A`` and ``B`` are the normalisers of Tx2 and Tx3 (sums of the raw
    gain ratios); they reappear in the received-signal decomposition.
    """

    V: np.ndarray
    A: float
    B: float


@dataclass(frozen=True)
class MeanSignals:
    """Mean received counts and their desired/interference decomposition.

    ``mu[i]`` is the mean count vector (type 1, type 2) at Rx ``i``.
    ``desired[i] * N_i`` is the desired part, ``interference[i]`` the common
    interference direction and ``interference_weights[i] @ N`` its amplitude
    ``N_I,i``.  ``misalignment[i]`` is the part of the second interferer's
    column orthogonal to ``interference[i]``, relative to its norm (zero when
    the interference is perfectly aligned).
    """

    mu: np.ndarray
    desired: np.ndarray
    interference: np.ndarray
    interference_weights: np.ndarray
    misalignment: np.ndarray

    def components(self, N):
        """Desired and aligned-interference parts for a message triple."""
        N = np.asarray(N, dtype=float)
        n_int = self.interference_weights @ N
        return self.desired * N[:, None], self.interference * n_int[:, None]


@dataclass(frozen=True)
class ConditionReport:
    """Residual bookkeeping for the IA, independency and reaction conditions.

    ``*_raw`` values are the closed-form left-hand sides; the plain values
    are normalised by the largest ``|r^2 f|`` term of the same equation.
    ``reaction`` entries are ``None`` when the schedule samples the two types
    at different times (the reaction conditions are then undefined).
    """

    ia_raw: float
    ia_residual: float
    independency_raw: np.ndarray
    independency_residuals: np.ndarray
    reaction_raw: np.ndarray | None
    reaction_residuals: np.ndarray | None
    tol_eq: float
    tol_neq: float

    @property
    def ia_satisfied(self) -> bool:
        return bool(abs(self.ia_residual) < self.tol_eq)

    @property
    def independency_satisfied(self) -> np.ndarray:
        return np.abs(self.independency_residuals) > self.tol_neq

    @property
    def reaction_satisfied(self) -> np.ndarray | None:
        if self.reaction_residuals is None:
            return None
        return np.abs(self.reaction_residuals) < self.tol_eq

    @property
    def ok(self) -> bool:
        """IA and every independency condition hold."""
        return self.ia_satisfied and bool(np.all(self.independency_satisfied))

    @property
    def ok_with_reaction(self) -> bool:
        rs = self.reaction_satisfied
        return self.ok and rs is not None and bool(np.all(rs))

    def lines(self):
        """Human-readable summary, one check per line."""
        out = [f"ia            residual={self.ia_residual:+.3e}  {_flag(self.ia_satisfied)}"]
        for i, (r, s) in enumerate(zip(self.independency_residuals, self.independency_satisfied)):
            out.append(f"independency{i + 1} residual={r:+.3e}  {_flag(s)}")
        if self.reaction_residuals is not None:
            for i, (r, s) in enumerate(zip(self.reaction_residuals, self.reaction_satisfied)):
                out.append(f"reaction{i + 1}     residual={r:+.3e}  {_flag(s)}")
        return out


def _flag(ok):
    return "ok" if ok else "FAIL"


def beamforming(ch: ChannelSet) -> BeamformingSet:
    """Beamforming vectors that align the interference at Rx2 and Rx3.

    ``V1 ~ [1, 1]``, ``V2 ~ H31 / H32`` and ``V3 ~ H21 / H23`` (element-wise),
    each scaled to unit 1-norm.
    """
    H = ch.gains
    for i, j in ((2, 1), (1, 2), (2, 0), (1, 0)):
        if not np.all(H[i, j] > 0) or not np.all(np.isfinite(H[i, j])):
            raise DegenerateChannelError(f"gain H{i + 1}{j + 1} must be positive and finite")
    v2 = H[2, 0] / H[2, 1]
    v3 = H[1, 0] / H[1, 2]
    A, B = float(v2.sum()), float(v3.sum())
    V = np.array([[0.5, 0.5], v2 / A, v3 / B])
    return BeamformingSet(V=V, A=A, B=B)


def mean_signals(ch: ChannelSet, bf: BeamformingSet, N=None) -> MeanSignals:
    """Mean received count vectors ``mu_i = sum_j H_ij V_j N_j``.

    ``N`` defaults to ``(1, 1, 1)``; the decomposition does not depend on it.
    """
    H = ch.gains
    N = np.ones(3) if N is None else np.asarray(N, dtype=float)
    if np.any(N < 0):
        raise ValueError("molecule counts must be non-negative")
    cols = H * bf.V[None, :, :]  # cols[i, j] = H_ij V_j
    mu = np.einsum("ijl,j->il", cols, N)

    ratio31 = H[2, 0] / H[2, 1]
    ratio21 = H[1, 0] / H[1, 2]
    desired = np.array([cols[0, 0], cols[1, 1], cols[2, 2]])
    interference = np.array([H[0, 1] * ratio31, H[1, 0], H[2, 0]])

    # Project the second interferer's column onto the common direction; at
    # Rx2/Rx3 this is exact, at Rx1 it holds only under the IA condition.
    second = np.array([cols[0, 2], cols[1, 2], cols[2, 1]])
    lam = np.einsum("il,il->i", second, interference) / np.einsum(
        "il,il->i", interference, interference
    )
    resid = second - lam[:, None] * interference
    norm = np.linalg.norm(second, axis=1)
    misalignment = np.linalg.norm(resid, axis=1) / np.where(norm > 0, norm, 1.0)

    weights = np.zeros((3, 3))
    weights[0, 1] = 1.0 / bf.A
    weights[0, 2] = lam[0]
    weights[1, 0] = bf.V[0, 0]
    weights[1, 2] = lam[1]
    weights[2, 0] = bf.V[0, 0]
    weights[2, 1] = lam[2]
    return MeanSignals(
        mu=mu,
        desired=desired,
        interference=interference,
        interference_weights=weights,
        misalignment=misalignment,
    )


def _signed_sum(r2, dt, diffusion, terms):
    """``sum sign * (r^2 f(dt1, dt2) + 6 ln(dt1/dt2))`` and the largest ``|r^2 f|``.

    ``dt`` may carry leading batch axes in front of its (3, 3, 2) core.
    """
    d1, d2 = diffusion
    total = 0.0
    scale = 0.0
    for sign, i, j in terms:
        a, b = dt[..., i, j, 0], dt[..., i, j, 1]
        rf = r2[i, j] * (1.0 / (d1 * a) - 1.0 / (d2 * b))
        total = total + sign * (rf + 6.0 * np.log(a / b))
        scale = np.maximum(scale, np.abs(rf))
    return total, scale


def _normalized(raw, scale):
    return raw / scale if scale > 0 else raw


def _check_positive(dt):
    if np.any(dt <= 0):
        i, j, l = np.argwhere(dt <= 0)[0]
        raise InfeasibleScheduleError(
            f"dt{i + 1}{j + 1} of type {l + 1} is not positive ({dt[i, j, l]:.6g} s)"
        )


def check_conditions(
    scn: Scenario,
    ts: TimingSchedule,
    tol_eq: float = TOL_EQ,
    tol_neq: float = TOL_NEQ,
) -> ConditionReport:
    """Evaluate the IA equality and the three independency inequalities.

    Works for arbitrary (per-type) times.  Reaction residuals are included
    when each receiver samples both molecule types at the same instant.
    """
    dt = ts.deltas
    _check_positive(dt)
    r2 = scn.sq_distances
    ia_raw, ia_scale = _signed_sum(r2, dt, scn.diffusion, IA_TERMS)
    ind_raw = np.empty(3)
    ind = np.empty(3)
    for k, terms in enumerate(INDEPENDENCY_TERMS):
        raw, scale = _signed_sum(r2, dt, scn.diffusion, terms)
        ind_raw[k] = raw
        ind[k] = _normalized(raw, scale)

    reaction_raw = reaction = None
    if np.all(ts.sample[:, 0] == ts.sample[:, 1]):
        from .reaction import _reaction_terms

        reaction_raw, scales = _reaction_terms(scn, dt)
        reaction = reaction_raw / np.where(scales > 0, scales, 1.0)

    return ConditionReport(
        ia_raw=float(ia_raw),
        ia_residual=float(_normalized(ia_raw, ia_scale)),
        independency_raw=ind_raw,
        independency_residuals=ind,
        reaction_raw=reaction_raw,
        reaction_residuals=reaction,
        tol_eq=tol_eq,
        tol_neq=tol_neq,
    )


def _special_sum(r2, tau, terms):
    total = 0.0
    scale = 0.0
    for sign, i, j in terms:
        v = r2[i, j] / tau[i, j]
        total += sign * v
        scale = max(scale, abs(v))
    return total, scale


def check_conditions_special(
    scn: Scenario,
    ts: TimingSchedule,
    tol_eq: float = TOL_EQ,
    tol_neq: float = TOL_NEQ,
) -> ConditionReport:
    """Reduced conditions for schedules that share times across both types.

    With equal per-type elapsed times the logarithms cancel and every
    ``f`` factor equals ``(1/D1 - 1/D2) / dt``, so the conditions become
    signed sums of ``r^2 / dt``.  The normalised residuals coincide with
    :func:`check_conditions`; the raw ones differ by that common factor.
    """
    if not ts.special_case:
        raise InfeasibleScheduleError("schedule is not special-case (per-type times differ)")
    tau = ts.deltas[:, :, 0]
    _check_positive(ts.deltas)
    r2 = scn.sq_distances
    ia_raw, ia_scale = _special_sum(r2, tau, IA_TERMS)
    ind_raw = np.empty(3)
    ind = np.empty(3)
    for k, terms in enumerate(INDEPENDENCY_TERMS):
        raw, scale = _special_sum(r2, tau, terms)
        ind_raw[k] = raw
        ind[k] = _normalized(raw, scale)

    from .reaction import _reaction_terms

    reaction_raw, scales = _reaction_terms(scn, ts.deltas)
    return ConditionReport(
        ia_raw=float(ia_raw),
        ia_residual=float(_normalized(ia_raw, ia_scale)),
        independency_raw=ind_raw,
        independency_residuals=ind,
        reaction_raw=reaction_raw,
        reaction_residuals=reaction_raw / np.where(scales > 0, scales, 1.0),
        tol_eq=tol_eq,
        tol_neq=tol_neq,
    )
