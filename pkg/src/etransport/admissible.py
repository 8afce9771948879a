"""Admissible entropy exponents.

For a scattering exponent ``beta`` an exponent ``b`` is admissible
(``b in N*_beta``) when

    (1 - 2 beta) b + 6 > 0
    4(2beta-1) b^3 + 4(4beta^2-12beta+11) b^2 + (8beta^3-44beta^2+70beta-73) b
        - 6 (2beta-1)^2 > 0

These are exactly the conditions under which the gradient quadratic form
with coefficients ``A, B, C`` (see :func:`quad_form_coeffs`) is positive
definite; in fact ``144 (A C - B^2) = ((1-2beta) b + 6) * cubic``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "BOUNDARY_BAND",
    "Membership",
    "nstar_margins",
    "nstar_membership",
    "nbeta_membership",
    "quad_form_coeffs",
    "positive_definite_equiv_check",
    "EquivalenceReport",
    "sample_equivalence",
    "RegionScanSpec",
    "RegionScan",
    "region_scan",
]

BOUNDARY_BAND = 1e-9


class Membership(NamedTuple):
    member: bool
    linear_margin: float
    cubic_margin: float


def nstar_margins(beta, b):
    """Left-hand sides of the two defining inequalities of ``N*_beta`` (vectorised)."""
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b, dtype=float)
    s = 2.0 * beta - 1.0
    linear = (1.0 - 2.0 * beta) * b + 6.0
    cubic = (
        4.0 * s * b**3
        + 4.0 * (4.0 * beta**2 - 12.0 * beta + 11.0) * b**2
        + (8.0 * beta**3 - 44.0 * beta**2 + 70.0 * beta - 73.0) * b
        - 6.0 * s**2
    )
    return linear, cubic


def nstar_membership(beta: float, b: float) -> Membership:
    """Whether ``b`` lies in ``N*_beta`` (strict inequalities), with both margins."""
    linear, cubic = nstar_margins(beta, b)
    linear, cubic = float(linear), float(cubic)
    return Membership(linear > 0 and cubic > 0, linear, cubic)


def nbeta_membership(beta: float, b1: float, b2: float) -> bool:
    """Whether the pair ``(b1, b2)`` lies in ``N_beta``."""
    return (
        nstar_membership(beta, b1).member
        and nstar_membership(beta, b2).member
        and b1 <= b2
        and b1 <= beta - 0.5
        and b2 >= 2.5 - beta
    )


def quad_form_coeffs(beta, b):
    """Coefficients ``(A, B, C)`` of the gradient quadratic form

    ``A theta^(b+1/2-beta) |grad n|^2 + 2B n theta^(b-1/2-beta) grad n . grad theta
    + C n^2 theta^(b-3/2-beta) |grad theta|^2``.
    """
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b, dtype=float)
    lin = -2.0 * b * beta + b + 6.0
    A = lin / 3.0
    B = lin * (2.0 * b - 2.0 * beta + 1.0) / 12.0
    C = b * (4.0 * b * beta**2 - 8.0 * b * beta - 4.0 * beta**2 + 9.0 * b + 2.0 * beta - 6.0) / 6.0
    if A.ndim == 0:
        return float(A), float(B), float(C)
    return A, B, C


class EquivalenceReport(NamedTuple):
    definite: bool
    member: bool
    boundary: bool

    @property
    def agree(self) -> bool:
        return self.definite == self.member


def positive_definite_equiv_check(beta: float, b: float) -> EquivalenceReport:
    """Compare ``A > 0 and AC - B^2 > 0`` against :func:`nstar_membership`.

    Points where any of the four quantities is within :data:`BOUNDARY_BAND`
    of zero are flagged as boundary points.
    """
    A, B, C = quad_form_coeffs(beta, b)
    gram = A * C - B * B
    mem = nstar_membership(beta, b)
    boundary = min(abs(A), abs(gram), abs(mem.linear_margin), abs(mem.cubic_margin)) <= BOUNDARY_BAND
    return EquivalenceReport(A > 0 and gram > 0, mem.member, boundary)


@dataclass
class EquivalenceSummary:
    samples: int
    boundary: int
    disagreements: int


def sample_equivalence(
    num_samples: int = 10_000,
    beta_range=(-0.5, 0.5),
    b_range=(-10.0, 10.0),
    seed: int = 0,
) -> EquivalenceSummary:
    """Uniform sampling of :func:`positive_definite_equiv_check`."""
    rng = np.random.default_rng(seed)
    betas = rng.uniform(*beta_range, size=num_samples)
    bs = rng.uniform(*b_range, size=num_samples)
    boundary = disagreements = 0
    for beta, b in zip(betas, bs):
        rep = positive_definite_equiv_check(float(beta), float(b))
        if rep.boundary:
            boundary += 1
        elif not rep.agree:
            disagreements += 1
    return EquivalenceSummary(num_samples, boundary, disagreements)


# --- region scans -------------------------------------------------------------


def _axis(lo: float, hi: float, step: float, closed: bool) -> np.ndarray:
    k = round((hi - lo) / step)
    # integer multiples keep the raster reproducible bit-for-bit
    idx = np.arange(k + 1 if closed else k)
    return np.round(lo + idx * step, 12)


@dataclass(frozen=True)
class RegionScanSpec:
    """Raster of ``(beta, b)`` points; ``beta`` is half-open, ``b`` closed."""

    beta_min: float = -0.5
    beta_max: float = 0.5
    beta_step: float = 0.01
    b_min: float = -10.0
    b_max: float = 10.0
    b_step: float = 0.01

    def __post_init__(self):
        for lo, hi, step, name in (
            (self.beta_min, self.beta_max, self.beta_step, "beta"),
            (self.b_min, self.b_max, self.b_step, "b"),
        ):
            if not lo < hi:
                raise ValueError(f"{name}: need min < max")
            if not step > 0:
                raise ValueError(f"{name}: step must be positive")
            count = (hi - lo) / step
            if abs(count - round(count)) > 1e-9:
                raise ValueError(f"{name}: step {step} does not divide the range")

    def betas(self) -> np.ndarray:
        return _axis(self.beta_min, self.beta_max, self.beta_step, closed=False)

    def bs(self) -> np.ndarray:
        return _axis(self.b_min, self.b_max, self.b_step, closed=True)


@dataclass
class RegionScan:
    """Membership raster; arrays have shape ``(len(betas), len(bs))``."""

    betas: np.ndarray
    bs: np.ndarray
    member: np.ndarray
    linear_margin: np.ndarray
    cubic_margin: np.ndarray

    def convexity_violations(self) -> np.ndarray:
        """Member cells with ``-1/2 < beta < 1/2`` and ``0 < b < 2``, as ``(beta, b)`` rows."""
        bb, BB = np.meshgrid(self.betas, self.bs, indexing="ij")
        bad = self.member & (bb > -0.5) & (bb < 0.5) & (BB > 0) & (BB < 2)
        return np.column_stack([bb[bad], BB[bad]])

    def lookup(self, beta: float, b: float) -> Membership:
        i = int(np.argmin(np.abs(self.betas - beta)))
        j = int(np.argmin(np.abs(self.bs - b)))
        if not (math.isclose(self.betas[i], beta, abs_tol=1e-9) and math.isclose(self.bs[j], b, abs_tol=1e-9)):
            raise KeyError(f"({beta}, {b}) is not a raster point")
        return Membership(bool(self.member[i, j]), float(self.linear_margin[i, j]), float(self.cubic_margin[i, j]))

    def rows(self):
        for i, beta in enumerate(self.betas):
            for j, b in enumerate(self.bs):
                yield float(beta), float(b), bool(self.member[i, j]), float(self.linear_margin[i, j]), float(
                    self.cubic_margin[i, j]
                )

    def to_csv(self, path) -> Path:
        """Write ``beta,b,member,linear_margin,cubic_margin`` rows."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["beta", "b", "member", "linear_margin", "cubic_margin"])
            for beta, b, mem, lin, cub in self.rows():
                writer.writerow([repr(beta), repr(b), "true" if mem else "false", repr(lin), repr(cub)])
        return path


def region_scan(spec: RegionScanSpec | None = None) -> RegionScan:
    """Evaluate ``N*_beta`` membership on the raster described by ``spec``."""
    spec = spec or RegionScanSpec()
    betas, bs = spec.betas(), spec.bs()
    bb, BB = np.meshgrid(betas, bs, indexing="ij")
    linear, cubic = nstar_margins(bb, BB)
    return RegionScan(betas, bs, (linear > 0) & (cubic > 0), linear, cubic)
