"""
Admissible entropy exponents
============================

Which exponents ``b`` give an entropy functional ``phi_b`` that decays
along solutions? Membership is decided by one linear and one cubic
polynomial inequality in ``b``; this script evaluates them, checks the
equivalent positive-definiteness test and writes a raster for plotting.
"""

import sys
from pathlib import Path

import numpy as np

from etransport import RegionScanSpec, nbeta_membership, nstar_membership, quad_form_coeffs, region_scan

# %%
# Single exponents
# ----------------
# Each verdict comes with both margins; the point is admissible when both
# are positive.
for beta, b in [(0.0, 5.0), (0.0, 1.0), (0.0, -0.5), (0.25, -0.25)]:
    m = nstar_membership(beta, b)
    print(f"beta={beta:+.2f} b={b:+.2f}: member={m.member!s:5} linear={m.linear_margin:8.3f} cubic={m.cubic_margin:9.3f}")

# %%
# The same verdict from a 2x2 quadratic form
# ------------------------------------------
# ``A > 0`` and ``AC - B^2 > 0`` agree with the polynomial test.
A, B, C = quad_form_coeffs(0.0, 5.0)
print(f"\nquadratic form at (0, 5): A={A:.4f}, AC-B^2={A * C - B * B:.4f}")

# %%
# Pairs of exponents
# ------------------
# Decay estimates use a pair ``(b1, b2)``; a common choice is ``(beta - 1/2, 5)``.
for beta in (0.0, 0.2, 0.4):
    print(f"beta={beta}: pair ({beta - 0.5:+.1f}, 5) admissible: {nbeta_membership(beta, beta - 0.5, 5.0)}")

# %%
# Raster over the parameter plane
# -------------------------------
# A coarse raster keeps the demo fast; the CLI default uses step 0.01.
scan = region_scan(RegionScanSpec(beta_step=0.05, b_step=0.05))
print(f"\nraster {scan.member.shape}, {int(scan.member.sum())} admissible cells")
print("admissible cells inside 0 < b < 2:", scan.convexity_violations().size)

# crude text picture: one row per beta, '#' marks admissible b in [-10, 10]
for i in range(0, scan.betas.size, 4):
    row = "".join("#" if scan.member[i, j] else "." for j in range(0, scan.bs.size, 8))
    print(f"{scan.betas[i]:+.2f} {row}")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else None
if out is not None:
    scan.to_csv(out)
    print("wrote", out)
