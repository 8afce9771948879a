"""
Observed orders of accuracy
===========================

The scheme is first order in time and second order in space. Both orders
are measured by self-convergence on the Gaussian-well problem at
``t = 0.05`` with a fixed time step: each level is compared with a much
finer reference solution.
"""

import numpy as np

from etransport import SolverConfig, advance, preset_section4
from etransport.config import initial_state

cfg = preset_section4(0.25)


def solve(num_points, dt, t_end=0.05):
    grid = cfg.grid.refined(num_points)
    state = initial_state(cfg.initial_condition, grid)
    solver = SolverConfig(dt_init=dt, dt_max=dt, t_end=t_end, snapshot_times=(), adaptive=False)
    return advance(state, cfg.model, grid, solver).final


def max_error(a, b):
    return max(np.abs(a.n - b.n).max(), np.abs(a.w - b.w).max())


# %%
# Time
# ----
dts = np.array([4e-4, 2e-4, 1e-4])
ref = solve(201, 1.25e-5)
errs = np.array([max_error(solve(201, dt), ref) for dt in dts])
for dt, e in zip(dts, errs):
    print(f"dt={dt:.1e}  error={e:.3e}")
print(f"temporal order {np.polyfit(np.log(dts), np.log(errs), 1)[0]:.2f}\n")

# %%
# Space
# -----
# Coarse grids are nested in the reference grid, so nodes are compared directly.
sizes = [51, 101, 201]
ref = solve(801, 1e-4)
errs = []
for m in sizes:
    s = solve(m, 1e-4)
    errs.append(max(np.abs(s.n - ref.n[:: 800 // (m - 1)]).max(), np.abs(s.w - ref.w[:: 800 // (m - 1)]).max()))
    print(f"N={m:<4d} error={errs[-1]:.3e}")
dx = 1.0 / (np.array(sizes) - 1)
print(f"spatial order {np.polyfit(np.log(dx), np.log(errs), 1)[0]:.2f}")
