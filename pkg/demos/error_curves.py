"""Reaction against zero-forcing without reaction.

The reaction receiver has a Poisson threshold detector with a closed-form
error probability; Monte-Carlo confirms it.  Without reaction the receiver
combines both types by zero-forcing and decides by maximum likelihood, which
is only available by simulation.  Each scheme uses its own optimum times.
"""

from molia import Scenario, SimConfig, objective_pe, preset_times, simulate, snap

scn = Scenario.table1()
r_ts = snap(scn, preset_times("optimum-r-spec"), "r-spec")[0]
nr_ts = snap(scn, preset_times("optimum-nr-spec"), "nr-spec")[0]

print("  zeta0    reaction (analytic)  reaction (MC)   no reaction (MC)")
for z0 in (2.5e5, 5e5, 1e6, 2e6):
    s = scn.replace(amplitudes=(z0, 2 * z0))
    ana = objective_pe(s, r_ts)
    mc = simulate(s, r_ts, cfg=SimConfig(trials=200_000, seed=1)).total
    nr = simulate(s, nr_ts, cfg=SimConfig(trials=200_000, seed=1, detector="zf-map")).total
    print(f"{z0:8.2g}   {ana:12.4g}         {mc:10.4g}      {nr:10.4g}")
