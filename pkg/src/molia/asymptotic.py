"""K-user asymptotic alignment over diagonal (per-molecule-type) channels.

Each user sends a super-symbol across ``L`` molecule types; the link from
Tx ``j`` to Rx ``i`` is the diagonal matrix ``H_ij`` whose entries are the
per-type gains.  Because every matrix is diagonal, products and inverses are
element-wise and a "matrix" is stored as its length-``L`` diagonal.

Indices follow the usual one-based user numbering in names (``T_32`` etc.)
but arrays are zero-based: ``H[i, j]`` is the link Tx ``j+1`` -> Rx ``i+1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import SingularChannelError

__all__ = [
    "AsymptoticConfig",
    "DiagonalChannelStack",
    "AlignmentReport",
    "build_beamforming",
    "verify_alignment",
    "dof",
    "RANK_RTOL",
]

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class AsymptoticConfig:
    """User count ``K >= 3`` and construction order ``n >= 1``.

    ``n_max`` and ``max_types`` bound the size of constructions that are
    actually built; :func:`dof` accepts any ``n``.
    """

    K: int
    n: int
    n_max: int = 6
    max_types: int = 4096

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 3:
            raise ValueError("K must be an integer >= 3")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")

    @property
    def N(self) -> int:
        """Number of ``T_gq`` factors, ``(K-1)(K-2) - 1``."""
        return (self.K - 1) * (self.K - 2) - 1

    @property
    def n_streams(self) -> tuple:
        """Super-symbol lengths ``(n_s,1, n_s,2, ..., n_s,K)``."""
        return ((self.n + 1) ** self.N,) + (self.n**self.N,) * (self.K - 1)

    @property
    def L(self) -> int:
        """Molecule types needed, ``(n+1)^N + n^N``."""
        return (self.n + 1) ** self.N + self.n**self.N

    @property
    def pairs(self) -> list:
        """One-based ``(g, q)`` with ``g != q`` in ``{2..K}``, except ``(2, 3)``."""
        users = range(2, self.K + 1)
        return [(g, q) for g in users for q in users if g != q and (g, q) != (2, 3)]

    def check_buildable(self):
        if self.n > self.n_max:
            raise ValueError(f"n={self.n} exceeds n_max={self.n_max}")
        if self.L > self.max_types:
            raise ValueError(f"L={self.L} molecule types exceeds max_types={self.max_types}")


@dataclass(frozen=True)
class DiagonalChannelStack:
    """``H[i, j]``: diagonal of the ``L x L`` link matrix Tx ``j`` -> Rx ``i``."""

    H: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim != 3 or H.shape[0] != H.shape[1]:
            raise ValueError("expected an array of shape (K, K, L)")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def L(self) -> int:
        return self.H.shape[2]

    @classmethod
    def random(cls, K, L, rng=None, low=0.5, high=2.0):
        rng = np.random.default_rng(rng)
        return cls(rng.uniform(low, high, size=(K, K, L)))

    @classmethod
    def identity(cls, K, L):
        return cls(np.ones((K, K, L)))


def _products(T, pairs, top, L):
    """Columns ``prod T_gq^alpha_gq * w`` for every exponent tuple in ``0..top``."""
    cols = []
    for alphas in itertools.product(range(top + 1), repeat=len(pairs)):
        v = np.ones(L)
        for a, p in zip(alphas, pairs):
            if a:
                v = v * T[p] ** a
        cols.append(v)
    return np.array(cols).T  # (L, count)


def build_beamforming(cfg: AsymptoticConfig, ch: DiagonalChannelStack):
    """Per-user column sets ``V[j]`` (arrays of shape ``(L, n_s,j)``).

    ``S_j = H_1j^-1 H_13 H_23^-1 H_21`` and ``T_ij = H_i1^-1 H_ij S_j``;
    ``V_1`` collects the products of the ``T_gq`` with exponents ``0..n``
    applied to the all-ones vector, ``V_j = S_j B`` with ``B`` the same
    products with exponents ``0..n-1``.
    """
    cfg.check_buildable()
    if ch.K != cfg.K or ch.L != cfg.L:
        raise ValueError(f"channel stack must have K={cfg.K} users and L={cfg.L} types")
    H = ch.H
    if np.any(H == 0) or not np.all(np.isfinite(H)):
        raise SingularChannelError("channel diagonals must be finite and non-zero")
    h = lambda i, j: H[i - 1, j - 1]  # noqa: E731  one-based access
    S = {j: h(1, 3) * h(2, 1) / (h(1, j) * h(2, 3)) for j in range(2, cfg.K + 1)}
    T = {(i, j): h(i, j) * S[j] / h(i, 1) for (i, j) in cfg.pairs}
    V1 = _products(T, cfg.pairs, cfg.n, cfg.L)
    B = _products(T, cfg.pairs, cfg.n - 1, cfg.L)
    return [V1] + [S[j][:, None] * B for j in range(2, cfg.K + 1)]


@dataclass(frozen=True)
class AlignmentReport:
    """Per-receiver ranks of the received column spans.

    ``interference_rank[i]`` is the dimension spanned by all interfering
    columns at Rx ``i``; ``expected_interference[i]`` the dimension left
    free for the desired streams (``L - n_s,i``).  ``desired_independent[i]``
    is true when the desired columns add their full count to the span.
    """

    interference_rank: np.ndarray
    expected_interference: np.ndarray
    desired_independent: np.ndarray
    total_rank: np.ndarray

    @property
    def aligned(self) -> np.ndarray:
        return self.interference_rank <= self.expected_interference

    @property
    def ok(self) -> bool:
        return bool(np.all(self.aligned) and np.all(self.desired_independent))

    def lines(self):
        out = []
        for i in range(len(self.interference_rank)):
            out.append(
                f"rx{i + 1} interference_rank={self.interference_rank[i]} "
                f"expected<={self.expected_interference[i]} "
                f"desired_independent={bool(self.desired_independent[i])}"
            )
        return out


def _rank(M, rtol=RANK_RTOL):
    if M.size == 0:
        return 0
    norms = np.linalg.norm(M, axis=0)
    M = M / np.where(norms > 0, norms, 1.0)
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def verify_alignment(cfg: AsymptoticConfig, ch: DiagonalChannelStack, V, rtol=RANK_RTOL):
    """Numerical rank check of the alignment at every receiver.

    Columns are scaled to unit norm before the SVD (scaling does not change
    a span) and singular values below ``rtol`` times the largest count as
    zero.
    """
    K, H = cfg.K, ch.H
    ns = np.array(cfg.n_streams)
    irank, total, indep = np.empty(K, int), np.empty(K, int), np.empty(K, bool)
    for i in range(K):
        interf = np.hstack([H[i, j][:, None] * V[j] for j in range(K) if j != i])
        desired = H[i, i][:, None] * V[i]
        irank[i] = _rank(interf, rtol)
        total[i] = _rank(np.hstack([interf, desired]), rtol)
        indep[i] = total[i] - irank[i] == desired.shape[1]
    return AlignmentReport(
        interference_rank=irank,
        expected_interference=cfg.L - ns,
        desired_independent=indep,
        total_rank=total,
    )


def dof(cfg: AsymptoticConfig) -> Fraction:
    """``((n+1)^N + (K-1) n^N) / ((n+1)^N + n^N)`` as an exact fraction."""
    a = (cfg.n + 1) ** cfg.N
    b = cfg.n**cfg.N
    return Fraction(a + (cfg.K - 1) * b, a + b)
