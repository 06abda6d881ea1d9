"""Optimum releasing/sampling times.

Four problems are solved, with and without reaction, each in the general
(per-type times) and the special (shared times) form:

``r-special``   1-D scan of ``dt12`` along the reaction feasible segment.
``r-general``   five free times; ``t2``, ``t3``, ``t1`` follow from the three
                reaction equalities and ``t~3^[1]`` from the IA equality.
``nr-special``  five free shared times; ``t~1`` follows from the IA equality.
``nr-general``  eleven free times; ``t~3^[1]`` follows from the IA equality.

Equalities are enforced by elimination: each designated variable is found
by a 1-D root solve, so every evaluated schedule is exactly feasible.  When
an equation has several roots every branch is evaluated and the best one is
kept, which makes the objective a function of the free times alone.
"""

from __future__ import annotations

import csv
import io as _io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .alignment import IA_TERMS, TOL_EQ, TOL_NEQ, _signed_sum, beamforming, check_conditions
from .detection import analytic_pe_reaction, build_reaction, build_zf, zf_gaussian_pe
from .errors import (
    DegenerateChannelError,
    InfeasiblePointError,
    InfeasibleRegionError,
    InfeasibleScheduleError,
)
from .io import TIME_KEYS
from .model import Scenario, TimingSchedule, channel_set
from .montecarlo import SimConfig, simulate
from .reaction import TOL_EXCL, _reaction_terms, lemma2_region, lemma2_times

log = logging.getLogger(__name__)

__all__ = ["SearchSpec", "SearchResult", "optimize", "objective_pe", "snap", "PROBLEMS"]

PROBLEMS = ("r-special", "r-general", "nr-special", "nr-general")
_ALIASES = {"r-spec": "r-special", "r-gen": "r-general", "nr-spec": "nr-special", "nr-gen": "nr-general"}


def canonical_problem(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}")
    return name


def _scheme(problem):
    return "reaction" if problem.startswith("r-") else "none"


# ---------------------------------------------------------------------------
# objective


def objective_pe(
    scn: Scenario,
    ts: TimingSchedule,
    scheme: str = "reaction",
    method: str = "auto",
    *,
    trials: int = 20_000,
    seed: int = 0,
    sampler: str = "direct",
    check: bool = True,
    tol_eq: float = TOL_EQ,
    tol_neq: float = TOL_NEQ,
) -> float:
    """Total error probability ``(Pe1 + Pe2 + Pe3) / 3`` of a schedule.

    ``scheme`` is ``"reaction"`` or ``"none"``.  ``method="auto"`` uses the
    closed form for reaction and a fixed-seed Monte-Carlo estimate of the
    zero-forcing MAP receiver otherwise (the same seed at every point, so
    nearby schedules share their random numbers).  ``"gaussian"`` evaluates
    the zero-forcing receiver under its Gaussian model instead, and ``"mc"``
    forces simulation for either scheme.

    With ``check`` the schedule must satisfy the alignment conditions of the
    scheme; the first violated one is named in the raised
    :class:`InfeasiblePointError`.
    """
    if scheme not in ("reaction", "none"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if method == "auto":
        method = "analytic" if scheme == "reaction" else "mc"
    if method not in ("analytic", "mc", "gaussian"):
        raise ValueError(f"unknown method {method!r}")
    if (method == "analytic") != (scheme == "reaction") and method != "mc":
        raise ValueError(f"method {method!r} does not apply to scheme {scheme!r}")
    if check:
        _require_feasible(scn, ts, scheme, tol_eq, tol_neq)
    if scn.amplitudes[0] == scn.amplitudes[1]:
        return 0.5

    ch = channel_set(scn, ts)
    if method == "analytic":
        return analytic_pe_reaction(build_reaction(ch, beamforming(ch), scn)).total
    if method == "gaussian":
        return zf_gaussian_pe(build_zf(ch, beamforming(ch), scn.amplitudes)).total
    cfg = SimConfig(
        trials=trials,
        seed=seed,
        detector="reaction" if scheme == "reaction" else "zf-map",
        sampler=sampler,
    )
    return simulate(scn, ts, cfg=cfg).total


def _require_feasible(scn, ts, scheme, tol_eq, tol_neq):
    rep = check_conditions(scn, ts, tol_eq=tol_eq, tol_neq=tol_neq)
    if not rep.ia_satisfied:
        raise InfeasiblePointError(f"IA condition violated (residual {rep.ia_residual:.3e})", "ia")
    for i, ok in enumerate(rep.independency_satisfied):
        if not ok:
            raise InfeasiblePointError(
                f"independency condition at Rx{i + 1} violated "
                f"(residual {rep.independency_residuals[i]:.3e})",
                f"independency{i + 1}",
            )
    if scheme == "reaction":
        if rep.reaction_residuals is None:
            raise InfeasiblePointError(
                "reaction needs both molecule types sampled at the same time", "reaction"
            )
        for i, ok in enumerate(rep.reaction_satisfied):
            if not ok:
                raise InfeasiblePointError(
                    f"reaction condition at Rx{i + 1} violated "
                    f"(residual {rep.reaction_residuals[i]:.3e})",
                    f"reaction{i + 1}",
                )


# ---------------------------------------------------------------------------
# elimination of the equality constraints

# Index groups into the 12-vector of TIME_KEYS; a group moves as one value.
_SPECIAL_GROUPS = [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9), (10, 11)]


def _deltas(X):
    """Elapsed times ``(..., 3, 3, 2)`` of schedule vectors ``(..., 12)``."""
    rel = X[..., :6].reshape(X.shape[:-1] + (3, 2))
    smp = X[..., 6:].reshape(X.shape[:-1] + (3, 2))
    return smp[..., :, None, :] - rel[..., None, :, :]


def _ia_eq(scn, X):
    raw, scale = _signed_sum(scn.sq_distances, _deltas(X), scn.diffusion, IA_TERMS)
    return raw / scale


def _reaction_eq(i):
    def f(scn, X):
        raw, scales = _reaction_terms(scn, _deltas(X))
        return raw[..., i] / scales[..., i]

    return f


@dataclass(frozen=True)
class _Layout:
    free: list  # index groups searched over
    designated: list  # (group, equation) solved in order


def _layout(problem: str) -> _Layout:
    if problem == "r-general":
        return _Layout(
            free=[(0,), (1,), (2,), (3,), (5,)],
            designated=[
                ((8, 9), _reaction_eq(1)),
                ((10, 11), _reaction_eq(2)),
                ((6, 7), _reaction_eq(0)),
                ((4,), _ia_eq),
            ],
        )
    if problem == "nr-special":
        return _Layout(free=_SPECIAL_GROUPS[1:], designated=[((0, 1), _ia_eq)])
    if problem == "nr-general":
        return _Layout(free=[(k,) for k in range(12) if k != 4], designated=[((4,), _ia_eq)])
    raise ValueError(f"no elimination layout for {problem!r}")


_OFFSETS = np.geomspace(1e-4, 20.0, 240)
MAX_ROOTS = 3


def _roots(scn, x, group, eq, ref=None):
    """Values of ``group`` making ``eq`` vanish, nearest to ``ref`` first.

    The domain keeps every elapsed time positive: a sampling group ranges
    above the latest release, a release group below the earliest sample.
    """
    x = np.array(x, dtype=float)
    is_sample = group[0] >= 6
    if is_sample:
        types = [k - 6 for k in group]
        types = [t % 2 for t in types]
        base = max(x[2 * j + t] for j in range(3) for t in types)
        grid = base + _OFFSETS
    else:
        types = [k % 2 for k in group]
        base = min(x[6 + 2 * i + t] for i in range(3) for t in types)
        grid = base - _OFFSETS[::-1]

    def g(v):
        y = x.copy()
        y[list(group)] = v
        return float(eq(scn, y))

    batch = np.repeat(x[None, :], len(grid), axis=0)
    batch[:, list(group)] = grid[:, None]
    with np.errstate(all="ignore"):
        vals = eq(scn, batch)
    ok = np.isfinite(vals)
    sgn = np.sign(vals)
    roots = []
    for k in np.flatnonzero(ok[:-1] & ok[1:] & (sgn[:-1] != sgn[1:])):
        with np.errstate(all="ignore"):
            roots.append(brentq(g, grid[k], grid[k + 1], xtol=1e-14))
    if ref is not None:
        roots.sort(key=lambda v: abs(v - ref))
    return roots


def _completions(scn, x, layout, ref=None):
    """All schedules completing free values ``x`` (at most MAX_ROOTS per step)."""

    def rec(x, k):
        if k == len(layout.designated):
            yield x
            return
        group, eq = layout.designated[k]
        r = None if ref is None else ref[group[0]]
        for v in _roots(scn, x, group, eq, r)[:MAX_ROOTS]:
            y = x.copy()
            y[list(group)] = v
            yield from rec(y, k + 1)

    yield from rec(np.array(x, dtype=float), 0)


def snap(scn: Scenario, ts: TimingSchedule, problem: str, tol_excl: float = TOL_EXCL):
    """Move a (rounded) schedule onto the exact feasible set of ``problem``.

    The designated variables are re-solved from the remaining times, taking
    the root nearest each printed value.  Returns the snapped schedule and
    the largest absolute change in seconds.
    """
    problem = canonical_problem(problem)
    x0 = ts.as_vector()
    if problem == "r-special":
        reg = lemma2_region(scn)
        dt12 = x0[0] - x0[2]
        out = lemma2_times(reg, dt12, t1_release=x0[0], tol_excl=tol_excl)
    else:
        layout = _layout(problem)
        x = x0.copy()
        for group, eq in layout.designated:
            roots = _roots(scn, x, group, eq, ref=x0[group[0]])
            if not roots:
                raise InfeasiblePointError(
                    f"no value of {TIME_KEYS[group[0]]} satisfies the equality", TIME_KEYS[group[0]]
                )
            x[list(group)] = roots[0]
        out = TimingSchedule.from_vector(x)
    return out, float(np.max(np.abs(out.as_vector() - x0)))


# ---------------------------------------------------------------------------
# optimisation


@dataclass(frozen=True)
class SearchSpec:
    """Settings of one optimum-time search.

    ``grid`` is the number of ``dt12`` points of the r-special scan; the
    other problems run ``starts`` multi-start coordinate descents with
    golden-section line searches on boxes ``[0, span]`` for each free time,
    within ``budget`` objective calls.  ``method`` picks the objective (see
    :func:`objective_pe`); ``trials``/``seed`` configure Monte-Carlo
    objectives.
    """

    problem: str
    grid: int = 512
    refine: bool = True
    method: str = "auto"
    trials: int = 20_000
    seed: int = 0
    sampler: str = "direct"
    starts: int = 16
    budget: int = 10_000
    span: float = 3.0
    tol_neq: float = TOL_NEQ
    tol_excl: float = TOL_EXCL
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "problem", canonical_problem(self.problem))
        if self.grid < 3 or self.starts < 1 or self.budget < 1 or not self.span > 0:
            raise ValueError("grid >= 3, starts >= 1, budget >= 1 and span > 0 are required")


@dataclass
class SearchResult:
    """Optimum schedule (shift-normalised), its objective and the scan trace."""

    schedule: TimingSchedule
    objective: float
    problem: str
    evaluations: int
    trace_header: tuple
    trace: list = field(repr=False)
    dt12: float | None = None

    def trace_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.trace_header)
        for row in self.trace:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def __iter__(self):
        return iter((self.schedule, self.objective, self.trace_csv()))


def optimize(spec: SearchSpec, scn: Scenario) -> SearchResult:
    """Minimise the total error probability over the feasible times."""
    if spec.problem == "r-special":
        return _optimize_r_special(spec, scn)
    return _optimize_descent(spec, scn)


def _r_special_pe(scn, reg, dt12, tol_excl):
    ts = lemma2_times(reg, dt12, tol_excl=tol_excl)
    with np.errstate(all="ignore"):
        ch = channel_set(scn, ts)
        if not np.all(np.isfinite(ch.gains)) or np.any(ch.gains <= 0):
            raise DegenerateChannelError("gains underflow at this point")
        return analytic_pe_reaction(build_reaction(ch, beamforming(ch), scn))


_NAN3 = (math.nan,) * 3


def _scan(scn, reg, xs, spec):
    def one(x):
        try:
            pe = _r_special_pe(scn, reg, float(x), spec.tol_excl)
            return tuple(map(float, pe.per_rx)), pe.total, "ok"
        except (InfeasiblePointError, DegenerateChannelError, InfeasibleScheduleError) as e:
            log.debug("dt12=%.6g skipped: %s", x, e)
            return _NAN3, math.nan, "skipped"

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            return list(pool.map(one, xs))
    return [one(x) for x in xs]


def _optimize_r_special(spec, scn):
    if spec.method not in ("auto", "analytic"):
        raise ValueError("r-special uses the analytic objective")
    reg = lemma2_region(scn)
    dt12, dt13, excl = reg.sample(spec.grid, spec.tol_excl)
    res = _scan(scn, reg, dt12, spec)
    trace = [
        (float(a), float(b), int(e), *rx, pe, st) for a, b, e, (rx, pe, st) in zip(dt12, dt13, excl, res)
    ]
    pes = np.array([pe for _, pe, _ in res])
    if not np.any(np.isfinite(pes)):
        raise InfeasibleRegionError("no admissible point on the reaction feasible segment")
    k = int(np.nanargmin(pes))
    best_x, best = float(dt12[k]), float(pes[k])
    n_eval = len(dt12)
    if spec.refine:
        step = dt12[1] - dt12[0]
        fine = np.linspace(best_x - step, best_x + step, 41)
        fine = fine[(fine > reg.dt12_bounds[0]) & (fine < reg.dt12_bounds[1])]
        for x, (rx, pe, st) in zip(fine, _scan(scn, reg, fine, spec)):
            trace.append((float(x), float(reg.dt13_of(x)), 0, *rx, pe, "refine-" + st))
            if np.isfinite(pe) and pe < best:
                best_x, best = float(x), pe
        n_eval += len(fine)
    ts = lemma2_times(reg, best_x, tol_excl=spec.tol_excl)
    log.info("r-special optimum dt12=%.6g Pe=%.6g", best_x, best)
    return SearchResult(
        schedule=ts,
        objective=best,
        problem=spec.problem,
        evaluations=n_eval,
        trace_header=("dt12", "dt13", "excluded", "pe_rx1", "pe_rx2", "pe_rx3", "pe_total", "status"),
        trace=trace,
        dt12=best_x,
    )


class _Budget(Exception):
    pass


class _Objective:
    """Objective of the free times with the equalities eliminated."""

    def __init__(self, spec, scn, layout):
        self.spec, self.scn, self.layout = spec, scn, layout
        self.scheme = _scheme(spec.problem)
        self.calls = 0
        self.trace = []
        self.best = (math.inf, None)

    def pe_of(self, x):
        spec, scn = self.spec, self.scn
        ts = TimingSchedule.from_vector(x)
        if np.any(ts.deltas <= 0):
            return math.inf
        tsn = ts.normalized()
        if np.any(tsn.sample >= scn.slot_duration):
            return math.inf
        rep = check_conditions(scn, ts, tol_neq=spec.tol_neq)
        if not np.all(rep.independency_satisfied):
            return math.inf
        try:
            with np.errstate(all="ignore"):
                ch = channel_set(scn, ts)
                if not np.all(np.isfinite(ch.gains)) or np.any(ch.gains <= 0):
                    return math.inf
            with np.errstate(all="ignore"):
                pe = objective_pe(
                    scn,
                    ts,
                    self.scheme,
                    spec.method,
                    trials=spec.trials,
                    seed=spec.seed,
                    sampler=spec.sampler,
                    check=False,
                )
            return pe if np.isfinite(pe) else math.inf
        except (DegenerateChannelError, InfeasibleScheduleError) as e:
            log.debug("point skipped: %s", e)
            return math.inf

    def __call__(self, free, start):
        if self.calls >= self.spec.budget:
            raise _Budget
        self.calls += 1
        x = np.zeros(12)
        for g, v in zip(self.layout.free, free):
            x[list(g)] = v
        best, best_x = math.inf, None
        for y in _completions(self.scn, x, self.layout):
            pe = self.pe_of(y)
            if pe < best:
                best, best_x = pe, y
        self.trace.append((self.calls, start, *(best_x if best_x is not None else x), best))
        if best < self.best[0]:
            self.best = (best, best_x)
        return best


_GOLD = (math.sqrt(5) - 1) / 2


def _line_search(f, x, k, h, lo, hi, fx):
    """Improve coordinate ``k``: 7-point bracket in ``x_k +- h``, then golden."""
    a, b = max(lo, x[k] - h), min(hi, x[k] + h)
    pts = np.linspace(a, b, 7)
    vals = []
    for p in pts:
        y = x.copy()
        y[k] = p
        vals.append(f(y))
    j = int(np.argmin(vals))
    if not vals[j] < fx:
        return x, fx
    best_x = x.copy()
    best_x[k], best = pts[j], vals[j]
    if not np.isfinite(best):
        return best_x, best
    a, b = pts[max(j - 1, 0)], pts[min(j + 1, len(pts) - 1)]
    c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)

    def at(v):
        y = best_x.copy()
        y[k] = v
        return f(y)

    fc, fd = at(c), at(d)
    for _ in range(12):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = at(d)
    for v, fv in ((c, fc), (d, fd)):
        if fv < best:
            best_x[k], best = v, fv
    return best_x, best


def _initial_points(spec, scn, layout, rng):
    pts = []
    if spec.problem == "r-general":
        # the special-case optimum lies inside the general feasible set
        sub = optimize(SearchSpec("r-special", grid=max(64, spec.grid // 4), refine=False), scn)
        v = sub.schedule.as_vector()
        pts.append(np.array([v[g[0]] for g in layout.free]))
    while len(pts) < spec.starts:
        pts.append(_random_free(spec, layout, rng))
    return pts


def _random_free(spec, layout, rng):
    """Random free values with every release before every sample."""
    half = spec.span / 2
    return np.array(
        [rng.uniform(half, spec.span) if g[0] >= 6 else rng.uniform(0.0, half) for g in layout.free]
    )


def _optimize_descent(spec, scn):
    layout = _layout(spec.problem)
    obj = _Objective(spec, scn, layout)
    rng = np.random.default_rng(spec.seed)
    starts = _initial_points(spec, scn, layout, rng)
    d = len(layout.free)
    try:
        for s, x in enumerate(starts):
            f = lambda y, s=s: obj(y, s)  # noqa: E731
            fx = f(x)
            tries = 0
            while not np.isfinite(fx) and tries < 50:
                x = _random_free(spec, layout, rng)
                fx = f(x)
                tries += 1
            if not np.isfinite(fx):
                continue
            h = spec.span / 8
            while h > 1e-4:
                improved = False
                for k in range(d):
                    x_new, f_new = _line_search(f, x, k, h, 0.0, spec.span, fx)
                    if f_new < fx:
                        x, fx, improved = x_new, f_new, True
                if not improved:
                    h /= 2
    except _Budget:
        log.info("objective budget of %d calls exhausted", spec.budget)
    best, best_x = obj.best
    if best_x is None:
        raise InfeasibleRegionError(f"no feasible schedule found for {spec.problem}")
    ts = TimingSchedule.from_vector(best_x).normalized()
    return SearchResult(
        schedule=ts,
        objective=float(best),
        problem=spec.problem,
        evaluations=obj.calls,
        trace_header=("eval", "start", *TIME_KEYS, "pe_total"),
        trace=obj.trace,
    )

