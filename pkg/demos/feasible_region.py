"""Where can the reaction-based scheme operate?

With equal diffusion times for both types at each link, the interference
alignment and reaction conditions leave a single free parameter: the
relative release time dt12.  The remaining relative time dt13 then lies on a
line, cut short where some elapsed time would turn negative.  A few isolated
points on that line lose the independency of the desired signal and are
excluded.
"""

from molia import Scenario, lemma2_region

scn = Scenario.table1()
region = lemma2_region(scn, c=2.0)

print(f"time scale s = {region.s:.6g} s/m^2")
print(f"s r21^2 = {region.s * scn.sq_distances[1, 0]:.4f} s, s r31^2 = {region.s * scn.sq_distances[2, 0]:.4f} s")
(a12, a13), (b12, b13) = region.endpoints
print(f"segment from ({a12:.4f}, {a13:.4f}) to ({b12:.4f}, {b13:.4f})")
for e in region.excluded:
    print(f"  excluded dt12 = {e.dt12:.5f} (independency fails at receiver {e.receiver + 1})")

dt12, dt13, near = region.sample(9)
print("\n   dt12      dt13   min elapsed time")
for x, y, flag in zip(dt12, dt13, near):
    print(f"{x:+.4f}  {y:+.4f}  {region.min_delta(x):.4f}{'  near an excluded point' if flag else ''}")
