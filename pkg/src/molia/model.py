"""Physical scenario, diffusion channel and per-link gains.

Indices are zero-based throughout the package: transmitter ``j``, receiver
``i`` and molecule type ``l`` all run over ``0, 1, 2`` (``0, 1`` for types).
Gain arrays are laid out as ``gains[i, j, l]`` (receiver, transmitter, type).

All quantities are SI (meters, seconds, m^2/s).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, InfeasibleScheduleError, ScenarioError

__all__ = [
    "Scenario",
    "TimingSchedule",
    "ChannelSet",
    "green",
    "impulse_response",
    "channel_set",
    "spread_difference",
]

UM = 1e-6

# Locations, diffusion coefficients, receiver radius and reaction coefficients
# of the reference three-user geometry.
TABLE1 = dict(
    tx_positions=((0.0, 0.0, 0.0), (0.0, 20 * UM, 10 * UM), (0.0, 0.0, 30 * UM)),
    rx_positions=((0.0, 150 * UM, 0.0), (0.0, 200 * UM, 10 * UM), (0.0, 300 * UM, 20 * UM)),
    diffusion=(1e-8, 5e-8),
    flow=(0.0, 0.0, 0.0),
    rx_radius=15 * UM,
    amplitudes=(2e6, 4e6),
    reaction_coeffs=(2.0, 2.0, 2.0),
    slot_duration=10.0,
    env_noise=(0.0, 0.0),
)


def _frozen(a, shape=None):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ScenarioError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable physical description of a three-user molecular channel.

    Parameters
    ----------
    tx_positions, rx_positions : array_like, shape (3, 3)
        Transmitter / receiver centres in meters.
    diffusion : (float, float)
        Diffusion coefficients of molecule types 1 and 2 [m^2/s].
    flow : array_like, shape (3,)
        Medium drift velocity [m/s].
    rx_radius : float
        Radius of the (transparent, spherical) receivers [m].
    amplitudes : (float, float)
        CSK levels ``(zeta0, zeta1)``: molecules released for bit 0 / bit 1.
    reaction_coeffs : (float, float, float)
        Stoichiometric coefficient ``c_i`` of the cancelling reaction at each
        receiver.
    slot_duration : float
        Symbol slot ``T_s`` [s].
    env_noise : (float, float)
        Mean environment-noise counts per molecule type.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    diffusion: tuple = (1e-8, 5e-8)
    flow: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rx_radius: float = 15 * UM
    amplitudes: tuple = (2e6, 4e6)
    reaction_coeffs: tuple = (2.0, 2.0, 2.0)
    slot_duration: float = 10.0
    env_noise: tuple = (0.0, 0.0)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "tx_positions", _frozen(self.tx_positions, (3, 3)))
        set_(self, "rx_positions", _frozen(self.rx_positions, (3, 3)))
        set_(self, "flow", _frozen(self.flow, (3,)))
        set_(self, "diffusion", tuple(float(d) for d in self.diffusion))
        set_(self, "amplitudes", tuple(float(z) for z in self.amplitudes))
        set_(self, "reaction_coeffs", tuple(float(c) for c in self.reaction_coeffs))
        set_(self, "env_noise", tuple(float(n) for n in self.env_noise))
        set_(self, "rx_radius", float(self.rx_radius))
        set_(self, "slot_duration", float(self.slot_duration))
        self._validate()

    def _validate(self):
        d1, d2 = self.diffusion
        if len(self.diffusion) != 2 or not (d1 > 0 and d2 > 0):
            raise ScenarioError("diffusion coefficients must be two positive numbers")
        if d1 == d2:
            raise ScenarioError("D1 and D2 must differ")
        z0, z1 = self.amplitudes
        if not z1 >= z0 > 0:
            raise ScenarioError("amplitudes must satisfy zeta1 >= zeta0 > 0")
        if len(self.reaction_coeffs) != 3 or min(self.reaction_coeffs) <= 0:
            raise ScenarioError("reaction coefficients must be three positive numbers")
        if not self.slot_duration > 0:
            raise ScenarioError("slot duration must be positive")
        if len(self.env_noise) != 2 or min(self.env_noise) < 0:
            raise ScenarioError("environment noise means must be non-negative")
        if not self.rx_radius > 0:
            raise ScenarioError("receiver radius must be positive")
        if not np.all(np.isfinite(self.flow)):
            raise ScenarioError("flow must be finite")
        dist = np.sqrt(self.sq_distances)
        if np.any(dist <= self.rx_radius):
            i, j = np.argwhere(dist <= self.rx_radius)[0]
            raise ScenarioError(
                f"Rx{i + 1}-Tx{j + 1} distance {dist[i, j]:.3g} m does not exceed "
                f"the receiver radius {self.rx_radius:.3g} m"
            )

    @classmethod
    def table1(cls, **overrides) -> "Scenario":
        """Reference geometry; keyword arguments override single fields."""
        return cls(**{**TABLE1, **overrides})

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @cached_property
    def sq_distances(self) -> np.ndarray:
        """``r2[i, j] = ||r_i^Rx - r_j^Tx||^2``."""
        diff = self.rx_positions[:, None, :] - self.tx_positions[None, :, :]
        return _frozen(np.einsum("ijk,ijk->ij", diff, diff))

    @cached_property
    def link_vectors(self) -> np.ndarray:
        """``v[i, j] = r_i^Rx - r_j^Tx``, shape (3, 3, 3)."""
        return _frozen(self.rx_positions[:, None, :] - self.tx_positions[None, :, :])

    @property
    def rx_volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.rx_radius**3

    @property
    def zeta_ratio(self) -> float:
        return self.amplitudes[1] / self.amplitudes[0]

    def describe(self) -> str:
        """One-line summary for logs."""
        return (
            f"D=({self.diffusion[0]:.3g},{self.diffusion[1]:.3g}) "
            f"flow={tuple(float(v) for v in self.flow)} rR={self.rx_radius:.3g} "
            f"zeta=({self.amplitudes[0]:.6g},{self.amplitudes[1]:.6g}) "
            f"c={self.reaction_coeffs} Ts={self.slot_duration:g} "
            f"noise={self.env_noise}"
        )


@dataclass(frozen=True, eq=False)
class TimingSchedule:
    """Releasing and sampling times.

    ``release[j, l]`` is when Tx ``j`` emits type ``l``; ``sample[i, l]`` is
    when Rx ``i`` counts type ``l``.
    """

    release: np.ndarray
    sample: np.ndarray

    def __post_init__(self):
        rel = _frozen(self.release, (3, 2))
        smp = _frozen(self.sample, (3, 2))
        if not (np.all(np.isfinite(rel)) and np.all(np.isfinite(smp))):
            raise InfeasibleScheduleError("times must be finite")
        object.__setattr__(self, "release", rel)
        object.__setattr__(self, "sample", smp)

    @classmethod
    def special(cls, release, sample) -> "TimingSchedule":
        """Schedule whose two molecule types share every time."""
        rel = np.repeat(np.asarray(release, float)[:, None], 2, axis=1)
        smp = np.repeat(np.asarray(sample, float)[:, None], 2, axis=1)
        return cls(rel, smp)

    @classmethod
    def from_vector(cls, t) -> "TimingSchedule":
        """From ``[rel1_1, rel1_2, rel2_1, ..., smp3_1, smp3_2]``."""
        t = np.asarray(t, dtype=float)
        if t.shape != (12,):
            raise InfeasibleScheduleError("expected 12 times")
        return cls(t[:6].reshape(3, 2), t[6:].reshape(3, 2))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.release.ravel(), self.sample.ravel()])

    @property
    def special_case(self) -> bool:
        return bool(
            np.all(self.release[:, 0] == self.release[:, 1])
            and np.all(self.sample[:, 0] == self.sample[:, 1])
        )

    @property
    def deltas(self) -> np.ndarray:
        """``dt[i, j, l] = sample[i, l] - release[j, l]``."""
        return self.sample[:, None, :] - self.release[None, :, :]

    def shifted(self, delta: float) -> "TimingSchedule":
        return TimingSchedule(self.release + delta, self.sample + delta)

    def normalized(self) -> "TimingSchedule":
        """Shift so that the earliest time is exactly zero."""
        return self.shifted(-min(self.release.min(), self.sample.min()))

    def validate(self, scn: Scenario | None = None) -> "TimingSchedule":
        """Raise :class:`InfeasibleScheduleError` unless ``0 <= t~ < t (< T_s)``."""
        if np.any(self.release < 0):
            raise InfeasibleScheduleError("releasing times must be non-negative")
        dt = self.deltas
        if np.any(dt <= 0):
            i, j, l = np.argwhere(dt <= 0)[0]
            raise InfeasibleScheduleError(
                f"sampling time of Rx{i + 1} (type {l + 1}) does not follow the "
                f"releasing time of Tx{j + 1}",
            )
        if scn is not None and np.any(self.sample >= scn.slot_duration):
            raise InfeasibleScheduleError("sampling times must precede the end of the slot")
        return self

    def __eq__(self, other):
        if not isinstance(other, TimingSchedule):
            return NotImplemented
        return np.array_equal(self.release, other.release) and np.array_equal(
            self.sample, other.sample
        )

    __hash__ = None

    def __repr__(self):
        r = ", ".join(f"{v:.6g}" for v in self.release.ravel())
        s = ", ".join(f"{v:.6g}" for v in self.sample.ravel())
        return f"TimingSchedule(release=[{r}], sample=[{s}])"


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Gains ``H[i, j, l]``: mean count at Rx ``i`` per molecule of type ``l``
    released by Tx ``j``."""

    gains: np.ndarray
    deltas: np.ndarray

    def H(self, i: int, j: int) -> np.ndarray:
        """Diagonal of the 2x2 link matrix ``H_ij`` as a length-2 vector."""
        return self.gains[i, j]


def green(dt, link, diffusion, flow=(0.0, 0.0, 0.0)):
    """Free-space advection-diffusion Green's function.

    Concentration [1/m^3] at offset ``link`` from a unit point release after
    elapsed time ``dt``; zero for ``dt <= 0``. ``dt`` broadcasts against
    the leading axes of ``link`` (last axis = 3 coordinates).
    """
    dt = np.asarray(dt, dtype=float)
    link = np.asarray(link, dtype=float)
    flow = np.asarray(flow, dtype=float)
    pos = dt > 0
    tau = np.where(pos, dt, 1.0)
    drift = link - flow * tau[..., None]
    d2 = np.einsum("...k,...k->...", drift, drift)
    spread = 4.0 * diffusion * tau
    with np.errstate(under="ignore"):
        val = np.exp(-d2 / spread) / (np.pi * spread) ** 1.5
    return np.where(pos, val, 0.0)


def impulse_response(scn: Scenario, j: int, i: int, l: int, t, t_release):
    """Concentration at Rx ``i`` at time ``t`` of type-``l`` molecules from a
    single molecule released by Tx ``j`` at ``t_release``."""
    dt = np.asarray(t, dtype=float) - np.asarray(t_release, dtype=float)
    out = green(dt, scn.link_vectors[i, j], scn.diffusion[l], scn.flow)
    return float(out) if out.ndim == 0 else out


def channel_set(scn: Scenario, ts: TimingSchedule, offset: float = 0.0) -> ChannelSet:
    """Evaluate all 18 gains for a schedule.

    ``offset`` adds a constant to every elapsed time; ``offset=T_s`` gives
    the leftover (one-slot ISI) gains of the previous slot's releases.
    """
    dt = ts.deltas
    if np.any(dt <= 0):
        i, j, l = np.argwhere(dt <= 0)[0]
        raise InfeasibleScheduleError(
            f"Rx{i + 1} samples type {l + 1} before Tx{j + 1} releases it "
            f"(dt={dt[i, j, l]:.6g} s)"
        )
    dt = dt + offset
    D = np.asarray(scn.diffusion)
    link = np.broadcast_to(scn.link_vectors[:, :, None, :], (3, 3, 2, 3))
    g = np.empty((3, 3, 2))
    for l in range(2):
        g[:, :, l] = green(dt[:, :, l], link[:, :, l], D[l], scn.flow)
    gains = g * scn.rx_volume
    gains.setflags(write=False)
    return ChannelSet(gains=gains, deltas=_frozen(dt))


def spread_difference(dt1, dt2, scn_or_diffusion):
    """``1/(D1*dt1) - 1/(D2*dt2)`` [1/m^2].

    This is the coefficient of ``r^2/4`` in the log-ratio of the two
    molecule types' Green's functions.
    """
    d1, d2 = getattr(scn_or_diffusion, "diffusion", scn_or_diffusion)
    dt1 = np.asarray(dt1, dtype=float)
    dt2 = np.asarray(dt2, dtype=float)
    if np.any(dt1 <= 0) or np.any(dt2 <= 0):
        raise DomainError("elapsed times must be positive")
    out = 1.0 / (d1 * dt1) - 1.0 / (d2 * dt2)
    return float(out) if out.ndim == 0 else out
