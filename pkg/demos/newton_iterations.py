"""
Newton iterations inside one time step
======================================

Each implicit Euler step is solved by Newton's method with an exact
block-tridiagonal Jacobian. Near the solution the residual roughly squares
at every iteration until it reaches the rounding floor.
"""

import numpy as np

from etransport import SolverConfig, State, newton_solve, preset_section4

cfg = preset_section4(0.25)
x = cfg.grid.x
state = State.from_theta(1 + 0.3 * np.sin(np.pi * x) ** 2, 1 + 0.3 * np.sin(3 * np.pi * x) ** 2)

for h in (2e-3, 2e-2):
    res = newton_solve(state, h, cfg.model, cfg.grid, SolverConfig(newton_tol=1e-10))
    r = np.array(res.residuals)
    print(f"h={h:g}: {res.status.value} after {res.iters} iterations")
    for k, (a, b) in enumerate(zip(r[:-1], r[1:])):
        print(f"  r{k + 1} = {b:.2e}   r{k + 1}/r{k}^2 = {b / a**2:.3g}")
