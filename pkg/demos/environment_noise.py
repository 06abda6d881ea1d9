"""Environment noise and the reaction.

Background molecules of both types react with each other before detection,
so on the type-1 branch only mu_n1 - c mu_n2 survives.  The error
probability grows as this surviving noise moves away from zero.
"""

from molia import Scenario, SearchSpec, SimConfig, analytic_pe_reaction, beamforming, build_reaction, channel_set, optimize, simulate

scn = Scenario.table1(amplitudes=(1e6, 2e6))
ts = optimize(SearchSpec("r-special"), scn).schedule
ch = channel_set(scn, ts)

for mu1 in (10.0, 14.0, 17.0, 21.0):
    s = scn.replace(env_noise=(mu1, 5.0))
    ana = analytic_pe_reaction(build_reaction(ch, beamforming(ch), s, noise=s.env_noise)).total
    mc = simulate(s, ts, cfg=SimConfig(trials=200_000, seed=2, noise_on=True)).total
    print(f"mu_n1 = {mu1:4.0f}, mu_n1 - c mu_n2 = {mu1 - 2 * 5.0:4.0f}: Pe analytic {ana:.5f}, MC {mc:.5f}")
