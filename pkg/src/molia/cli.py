"""Command-line front end.

Every command writes CSV (or a times file) to ``--out`` (``-`` for standard
output) and logs the resolved scenario and seed to standard error.  Exit
codes: 0 success, 2 infeasible or unreadable input, 1 internal error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys

import numpy as np

from . import __version__
from .alignment import TOL_EQ, TOL_NEQ, beamforming, check_conditions
from .asymptotic import AsymptoticConfig, DiagonalChannelStack, build_beamforming, dof, verify_alignment
from .detection import ISI_MODES, analytic_pe_reaction, build_reaction, build_zf, zf_gaussian_pe
from .errors import InfeasibleError, MoliaError
from .io import dump_times, load_scenario, load_times, preset_problem
from .model import Scenario, channel_set
from .montecarlo import SimConfig, simulate
from .reaction import TOL_EXCL, lemma2_region
from .search import SearchSpec, canonical_problem, optimize, snap

log = logging.getLogger("molia")

PE_COLUMNS = ("zeta0", "pe_rx1", "pe_rx2", "pe_rx3", "pe_total", "method")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _write_csv(path, header, rows):
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _scenario(args) -> Scenario:
    scn = Scenario.table1() if args.scenario is None else load_scenario(args.scenario)
    over = {}
    if getattr(args, "noise_means", None) is not None:
        over["env_noise"] = args.noise_means
    if getattr(args, "c", None) is not None:
        over["reaction_coeffs"] = (args.c,) * 3
    if getattr(args, "Ts", None) is not None:
        over["slot_duration"] = args.Ts
    if over:
        scn = scn.replace(**over)
    log.info("scenario: %s", args.scenario or "built-in reference geometry")
    log.info("%s", scn.describe())
    log.info("seed: %d", args.seed)
    return scn


def _times(args, scn, default_problem=None):
    """Schedule from ``--times``; presets are snapped onto the exact feasible
    set of their problem (the printed rows are rounded to 1 ms)."""
    name = args.times
    problem = getattr(args, "snap", None)
    if name is None:
        if default_problem == "r-special":
            res = optimize(SearchSpec("r-special"), scn)
            log.info("times: r-special optimum (dt12=%.9g)", res.dt12)
            return res.schedule
        name = "table2-" + {"none": "nr-gen"}.get(default_problem, default_problem)
    ts = load_times(name)
    if problem is None:
        problem = preset_problem(name)
    if problem:
        ts, disp = snap(scn, ts, problem)
        log.info("times: %s snapped onto %s (max change %.3g s)", name, problem, disp)
    else:
        log.info("times: %s", name)
    return ts


def _zeta_range(text):
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:count, e.g. 1e6:4e6:7") from None
    if n < 1 or a <= 0 or b <= 0:
        raise argparse.ArgumentTypeError("zeta0 range needs positive bounds and count >= 1")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers") from None
    return (a, b)


# ---------------------------------------------------------------------------
# commands


def cmd_feasible_region(args):
    scn = _scenario(args)
    reg = lemma2_region(scn, args.c)
    dt12, dt13, near = reg.sample(args.points, args.tol_excl)
    rows = [(float(a), float(b), int(e), reg.min_delta(a)) for a, b, e in zip(dt12, dt13, near)]
    for (a, b) in reg.endpoints:
        rows.append((a, b, 1, 0.0))
    for e in reg.excluded:
        rows.append((e.dt12, e.dt13, 1, reg.min_delta(e.dt12)))
    rows.sort(key=lambda r: r[0])
    for note in reg.notes:
        log.info("%s", note)
    log.info("s=%.9g  segment %s to %s", reg.s, reg.endpoints[0], reg.endpoints[1])
    _write_csv(args.out, ("dt12", "dt13", "excluded", "min_delta"), rows)


def cmd_optimize_times(args):
    scn = _scenario(args)
    spec = SearchSpec(
        problem=args.problem,
        grid=args.grid,
        method=args.method,
        trials=args.trials,
        seed=args.seed,
        starts=args.starts,
        budget=args.budget,
        workers=args.workers,
    )
    res = optimize(spec, scn)
    log.info("%s: Pe=%.9g after %d evaluations", spec.problem, res.objective, res.evaluations)
    with _output(args.out) as fh:
        fh.write(f"# {spec.problem} optimum, total Pe = {res.objective:.9g}\n")
        fh.write(dump_times(res.schedule))
    if args.trace:
        with _output(args.trace) as fh:
            fh.write(res.trace_csv())


def _pe_rows(scn, ts, zeta0s, args):
    rows = []
    methods = {
        "both": ("analytic", "mc") if args.detector == "reaction" else ("gaussian", "mc"),
    }.get(args.method, (args.method,))
    for z0 in zeta0s:
        s = scn.replace(amplitudes=(z0, args.zeta_ratio * z0))
        ch = channel_set(s, ts)
        bf = beamforming(ch)
        noise = np.asarray(s.env_noise) if args.noise == "on" else np.zeros(2)
        for m in methods:
            if m == "mc":
                cfg = SimConfig(
                    trials=args.trials,
                    seed=args.seed,
                    isi_memory=args.isi,
                    noise_on=args.noise == "on",
                    detector=args.detector,
                    rule=args.rule,
                )
                rep = simulate(s, ts, bf, cfg)
                pe, tot = rep.rates, rep.total
            elif m == "analytic":
                pe = analytic_pe_reaction(build_reaction(ch, bf, s, noise=noise)).per_rx
                tot = float(pe.mean())
            else:
                pe = zf_gaussian_pe(build_zf(ch, bf, s.amplitudes, noise=noise)).per_rx
                tot = float(pe.mean())
            rows.append((float(z0), *map(float, pe), tot, m))
    return rows


def _check_methods(parser, args):
    if args.method in ("analytic",) and args.detector != "reaction":
        parser.error("the closed form applies to the reaction detector; use gaussian or mc")
    if args.method == "gaussian" and args.detector != "zf-map":
        parser.error("the gaussian model applies to the zf-map detector")
    if args.isi and args.method != "mc":
        parser.error("one-slot ISI is only simulated; use --method mc")


def cmd_error_curve(args, parser):
    _check_methods(parser, args)
    scn = _scenario(args)
    ts = _times(args, scn, "r-special" if args.detector == "reaction" else "none")
    rows = _pe_rows(scn, ts, args.zeta0, args)
    _write_csv(args.out, PE_COLUMNS, rows)


def cmd_simulate(args):
    scn = _scenario(args)
    ts = _times(args, scn, "r-special" if args.detector == "reaction" else "none")
    cfg = SimConfig(
        trials=args.trials,
        seed=args.seed,
        isi_memory=args.isi,
        noise_on=args.noise == "on",
        detector=args.detector,
        rule=args.rule,
        workers=args.workers,
    )
    rep = simulate(scn, ts, cfg=cfg)
    se = rep.std_errors()[1]
    lo, hi = rep.total_interval
    log.info("total Pe %.6g, 95%% Wilson interval [%.6g, %.6g]", rep.total, lo, hi)
    _write_csv(
        args.out,
        PE_COLUMNS + ("trials", "se_total"),
        [(scn.amplitudes[0], *map(float, rep.rates), rep.total, "mc", rep.trials, se)],
    )


def cmd_asymptotic_dof(args):
    log.info("seed: %d", args.seed)
    cfg = AsymptoticConfig(args.K, args.n, n_max=args.n_max)
    d = dof(cfg)
    lines = [f"dof = {d.numerator}/{d.denominator} ({float(d):.9g})", f"K = {cfg.K}, n = {cfg.n}, N = {cfg.N}, L = {cfg.L}"]
    try:
        cfg.check_buildable()
    except ValueError as e:
        lines.append(f"verification skipped: {e}")
    else:
        ch = DiagonalChannelStack.random(cfg.K, cfg.L, args.seed)
        rep = verify_alignment(cfg, ch, build_beamforming(cfg, ch))
        lines += rep.lines()
        lines.append(f"alignment {'ok' if rep.ok else 'FAILED'} on a random diagonal channel (seed {args.seed})")
    with _output(args.out) as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_verify(args):
    scn = _scenario(args)
    ts = _times(args, scn)
    scheme = args.scheme
    if scheme == "auto":
        prob = args.snap or preset_problem(args.times)
        scheme = "reaction" if prob and canonical_problem(prob).startswith("r-") else "none"
    ts.validate(scn)
    rep = check_conditions(scn, ts, args.tol_eq, args.tol_neq)
    ok = rep.ok if scheme == "none" else rep.ok_with_reaction
    lines = [f"scheme        {scheme}", *rep.lines(), f"result        {'PASS' if ok else 'FAIL'}"]
    with _output(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    return 0 if ok else 2


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="molia",
        description="Interference alignment by releasing/sampling times in molecular channels.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", help="scenario file (default: built-in reference geometry)")
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-v", "--verbose", action="store_true")

    def times(sp):
        sp.add_argument("--times", help="times file or preset (table2-r-spec, optimum-nr-gen, ...)")
        sp.add_argument(
            "--snap",
            metavar="PROBLEM",
            help="re-solve the designated times of PROBLEM (presets are snapped automatically)",
        )

    fr = sub.add_parser("feasible-region", help="reaction feasible segment of (dt12, dt13)")
    common(fr)
    fr.add_argument("--c", type=float, help="common reaction coefficient (default: scenario)")
    fr.add_argument("--points", type=int, default=512)
    fr.add_argument("--tol-excl", type=float, default=TOL_EXCL)

    ot = sub.add_parser("optimize-times", help="optimum releasing/sampling times")
    common(ot)
    ot.add_argument("--problem", required=True, choices=["nr-gen", "nr-spec", "r-gen", "r-spec"])
    ot.add_argument("--trace", help="scan trace CSV path")
    ot.add_argument("--grid", type=int, default=512)
    ot.add_argument("--method", default="auto", choices=["auto", "analytic", "mc", "gaussian"])
    ot.add_argument("--trials", type=int, default=20_000)
    ot.add_argument("--starts", type=int, default=16)
    ot.add_argument("--budget", type=int, default=10_000)
    ot.add_argument("--workers", type=int, default=1)

    def detector(sp):
        sp.add_argument("--detector", choices=["reaction", "zf-map"], default="reaction")
        sp.add_argument("--trials", type=int, default=1_000_000)
        sp.add_argument("--isi", type=int, choices=[0, 1], default=0)
        sp.add_argument("--rule", choices=ISI_MODES, default="optimum")
        sp.add_argument("--noise", choices=["on", "off"], default="off")
        sp.add_argument("--noise-means", type=_pair, metavar="MU1,MU2")

    ec = sub.add_parser("error-curve", help="total error probability versus zeta0")
    common(ec)
    times(ec)
    detector(ec)
    ec.add_argument("--zeta0", type=_zeta_range, default=_zeta_range("1e6:4e6:7"))
    ec.add_argument("--zeta-ratio", type=float, default=2.0, help="zeta1 / zeta0")
    ec.add_argument("--method", choices=["analytic", "gaussian", "mc", "both"], default="analytic")
    ec.add_argument("--Ts", type=float, help="slot duration override [s]")

    sm = sub.add_parser("simulate", help="Monte-Carlo error rates of one schedule")
    common(sm)
    times(sm)
    detector(sm)
    sm.add_argument("--workers", type=int, default=1)
    sm.add_argument("--Ts", type=float, help="slot duration override [s]")

    ad = sub.add_parser("asymptotic-dof", help="DoF of the K-user asymptotic construction")
    ad.add_argument("--K", type=int, default=3)
    ad.add_argument("--n", type=int, default=1)
    ad.add_argument("--n-max", type=int, default=6)
    ad.add_argument("--out", default="-")
    ad.add_argument("--seed", type=int, default=0)
    ad.add_argument("-v", "--verbose", action="store_true")

    vf = sub.add_parser("verify", help="check the alignment conditions of a schedule")
    common(vf)
    times(vf)
    vf.add_argument("--scheme", choices=["auto", "none", "reaction"], default="auto")
    vf.add_argument("--tol-eq", type=float, default=TOL_EQ)
    vf.add_argument("--tol-neq", type=float, default=TOL_NEQ)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "feasible-region":
            cmd_feasible_region(args)
        elif args.command == "optimize-times":
            cmd_optimize_times(args)
        elif args.command == "error-curve":
            cmd_error_curve(args, parser)
        elif args.command == "simulate":
            cmd_simulate(args)
        elif args.command == "asymptotic-dof":
            cmd_asymptotic_dof(args)
        elif args.command == "verify":
            if args.times is None:
                parser.error("verify needs --times")
            return cmd_verify(args)
    except (InfeasibleError, FileNotFoundError) as e:
        print(f"molia: {e}", file=sys.stderr)
        return 2
    except MoliaError as e:
        print(f"molia: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001  report, do not dump a traceback
        log.debug("internal error", exc_info=True)
        print(f"molia: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
