"""Inter-symbol interference with one slot of memory.

Molecules left over from the previous slot raise the counts of the next one.
Three decision rules differ in how much they know about that leftover: the
optimum rule conditions on the receiver's own previous decision and averages
over the other users' bits, the adaptive rule shifts its threshold by the
expected leftover, and the simplest rule treats the leftover as noise.
The published special-case reaction schedule separates the first two rules
clearly; on this package's own optimum they nearly coincide.
"""

from molia import Scenario, SimConfig, preset_times, simulate, snap

scn = Scenario.table1(amplitudes=(1e6, 2e6), slot_duration=10.0)
ts = snap(scn, preset_times("table2-r-spec"), "r-spec")[0]
base = dict(trials=200_000, seed=3)

ref = simulate(scn, ts, cfg=SimConfig(**base), keep_trials=True)
print(f"no ISI        Pe = {ref.total:.5f}")
for rule in ("optimum", "adaptive", "isi-as-noise"):
    rep = simulate(scn, ts, cfg=SimConfig(isi_memory=1, rule=rule, **base), keep_trials=True)
    print(f"{rule:13s} Pe = {rep.total:.5f}")
