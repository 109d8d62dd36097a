"""
Choosing the energy-optimal P-state
===================================

E(f) = (t_on f_max/f + t_off)(P_s + k n f^3). With t_off = 0 the minimum
has a closed form; otherwise it is the positive root of a quartic. Both are
checked against brute-force grid minimization, then snapped to a P-state.
"""
import numpy as np

from phienergy import (
    DEFAULT_PSTATES,
    FittedModel,
    energy_curve,
    grid_minimize,
    optimal_frequency_closed,
    optimal_frequency_quartic,
    optimal_pstate,
)
from phienergy.model import boundedness
from phienergy.optimize import energy_table

# a latency-heavy coprocessor configuration (LULESH-like, one device)
m = FittedModel(t_on=118.35, t_off=86.41, k=0.29, P_s=22.36, n_cores=16, f_max=2.01)
ratio, cls = boundedness(m.t_on, m.t_off)
print(f"t_off/t_on = {ratio:.2f} ({cls.value})")

f_quartic, method = optimal_frequency_quartic(m)
print(f"quartic root   {f_quartic:.5f} GHz ({method.value})")
print(f"grid minimum   {grid_minimize(m):.5f} GHz")

# the continuous optimum sits below the lowest P-state, so it is clamped
r = optimal_pstate(m)
print(f"P-state choice {r.f_pstate} GHz, clamped={r.clamped}, E={r.e_at_pstate:.0f} J")

print("\nenergy by P-state:")
for row in energy_table(m, DEFAULT_PSTATES):
    print(f"  {row['f']:.2f} GHz  {row['energy_j']:9.1f} J")

# with t_off = 0 the cube-root formula applies
host = FittedModel(t_on=61.14, t_off=0.0, k=0.32, P_s=21.99, n_cores=16, f_max=2.01)
print(f"\nclosed form {optimal_frequency_closed(host):.5f} GHz, "
      f"grid {grid_minimize(host):.5f} GHz")

# the energy curve itself, for plotting
f = np.linspace(0.8, 2.01, 7)
print("E(f):", np.round(energy_curve(m, f), 1))
