"""Choosing the releasing and sampling times.

Along the feasible segment the error probability of the reaction receiver is
available in closed form, so a dense scan plus a local refinement finds the
best dt12.  The general problem (each type with its own times) starts from
that optimum and runs a constrained local search.
"""

import time

from molia import Scenario, SearchSpec, check_conditions, optimize

scn = Scenario.table1()

t0 = time.perf_counter()
res = optimize(SearchSpec("r-special"), scn)
print(f"special case: dt12* = {res.dt12:.4f}, Pe* = {res.objective:.4g} "
      f"({res.evaluations} evaluations, {time.perf_counter() - t0:.2f} s)")
ts = res.schedule
print("  release", ts.release[:, 0].round(4), "sample", ts.sample[:, 0].round(4))

t0 = time.perf_counter()
gen = optimize(SearchSpec("r-gen", starts=1, budget=200), scn)
print(f"general times (short budget): Pe* = {gen.objective:.4g} ({time.perf_counter() - t0:.1f} s)")
for line in check_conditions(scn, gen.schedule).lines():
    print("  " + line)
