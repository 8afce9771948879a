"""Central finite differences for the implicit Euler step on a uniform 1-D grid.

Unknowns are the nodal densities ``n_i`` and energy densities ``w_i = n_i
theta_i``. One implicit Euler step of size ``h`` solves ``F(n, w) = 0`` with

    F1_i = n_i - n_i_old - h L(g1)_i
    F2_i = w_i - w_i_old - h kappa L(g2)_i - h R(n_i, w_i)

where ``g1, g2`` come from :func:`etransport.model.flux_pair` and ``L`` is
the three-point Laplacian. Dirichlet nodes carry the linear rows
``n_i - n_D`` and ``w_i - n_D theta_D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .model import (
    ModelParams,
    flux_pair,
    flux_pair_jacobian,
    relaxation_term,
    relaxation_term_jacobian,
)

__all__ = [
    "Dirichlet",
    "NeumannZeroFlux",
    "Grid1D",
    "State",
    "BlockTridiagonal",
    "discrete_laplacian",
    "assemble_residual",
    "assemble_jacobian",
    "interior_mass_balance",
]


@dataclass(frozen=True)
class Dirichlet:
    n_D: float = 1.0
    theta_D: float = 1.0

    def __post_init__(self):
        if not (self.n_D > 0 and self.theta_D > 0):
            raise ValueError("Dirichlet data must be positive")

    @property
    def w_D(self) -> float:
        return self.n_D * self.theta_D


@dataclass(frozen=True)
class NeumannZeroFlux:
    pass


BoundaryCondition = Union[Dirichlet, NeumannZeroFlux]


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``num_points`` nodes including both endpoints."""

    x_min: float = 0.0
    x_max: float = 1.0
    num_points: int = 501
    bc_left: BoundaryCondition = field(default_factory=Dirichlet)
    bc_right: BoundaryCondition = field(default_factory=Dirichlet)

    def __post_init__(self):
        if int(self.num_points) != self.num_points or self.num_points < 3:
            raise ValueError("num_points must be an integer >= 3")
        if not self.x_max > self.x_min:
            raise ValueError("need x_min < x_max")
        if not (isinstance(self.bc_left, Dirichlet) or isinstance(self.bc_right, Dirichlet)):
            raise ValueError("at least one endpoint must carry a Dirichlet condition")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.num_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.num_points)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def trapezoid_weights(self) -> np.ndarray:
        wts = np.full(self.num_points, self.dx)
        wts[0] = wts[-1] = 0.5 * self.dx
        return wts

    def refined(self, num_points: int) -> "Grid1D":
        return replace(self, num_points=num_points)


@dataclass
class State:
    """Nodal density ``n`` and energy density ``w = n theta`` at time ``t``."""

    n: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.n.shape != self.w.shape or self.n.ndim != 1:
            raise ValueError("n and w must be 1-D arrays of equal length")

    @property
    def theta(self) -> np.ndarray:
        return self.w / self.n

    @classmethod
    def from_theta(cls, n, theta, t: float = 0.0) -> "State":
        n = np.asarray(n, dtype=float)
        return cls(n, n * np.asarray(theta, dtype=float), t)

    @classmethod
    def constant(cls, grid: Grid1D, n: float, theta: float, t: float = 0.0) -> "State":
        return cls(np.full(grid.num_points, float(n)), np.full(grid.num_points, float(n * theta)), t)

    def is_positive(self) -> bool:
        return bool(np.all(self.n > 0) and np.all(self.w > 0))

    def copy(self) -> "State":
        return State(self.n.copy(), self.w.copy(), self.t)

    def stacked(self) -> np.ndarray:
        """Unknowns as an ``(N, 2)`` array ``[n_i, w_i]``."""
        return np.column_stack([self.n, self.w])


@dataclass
class BlockTridiagonal:
    """Block-tridiagonal matrix with 2x2 blocks.

    Block row ``i`` reads ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]``;
    ``lower[0]`` and ``upper[-1]`` are ignored.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def num_blocks(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.num_blocks, 2)
        out = np.einsum("ijk,ik->ij", self.diag, x)
        out[1:] += np.einsum("ijk,ik->ij", self.lower[1:], x[:-1])
        out[:-1] += np.einsum("ijk,ik->ij", self.upper[:-1], x[1:])
        return out

    def to_dense(self) -> np.ndarray:
        m = self.num_blocks
        dense = np.zeros((2 * m, 2 * m))
        for i in range(m):
            dense[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = self.diag[i]
            if i > 0:
                dense[2 * i : 2 * i + 2, 2 * i - 2 : 2 * i] = self.lower[i]
            if i < m - 1:
                dense[2 * i : 2 * i + 2, 2 * i + 2 : 2 * i + 4] = self.upper[i]
        return dense

    def norm_inf(self) -> float:
        rows = np.abs(self.diag).sum(axis=2)
        rows[1:] += np.abs(self.lower[1:]).sum(axis=2)
        rows[:-1] += np.abs(self.upper[:-1]).sum(axis=2)
        return float(rows.max())


def discrete_laplacian(g, grid: Grid1D) -> np.ndarray:
    """Three-point Laplacian; zero at Dirichlet nodes, ghost reflection at Neumann ends."""
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.num_points,):
        raise ValueError(f"expected {grid.num_points} nodal values, got shape {g.shape}")
    inv = 1.0 / grid.dx**2
    out = np.zeros_like(g)
    out[1:-1] = (g[:-2] - 2.0 * g[1:-1] + g[2:]) * inv
    if isinstance(grid.bc_left, NeumannZeroFlux):
        out[0] = 2.0 * (g[1] - g[0]) * inv
    if isinstance(grid.bc_right, NeumannZeroFlux):
        out[-1] = 2.0 * (g[-2] - g[-1]) * inv
    return out


def _boundary_overrides(n: np.ndarray, w: np.ndarray, grid: Grid1D):
    """Replace Dirichlet end values by the boundary data before forming stencils."""
    n = n.copy()
    w = w.copy()
    for idx, bc in ((0, grid.bc_left), (-1, grid.bc_right)):
        if isinstance(bc, Dirichlet):
            n[idx] = bc.n_D
            w[idx] = bc.w_D
    return n, w


def _check_sizes(state: State, grid: Grid1D):
    if state.n.shape != (grid.num_points,):
        raise ValueError(f"state has {state.n.size} nodes, grid has {grid.num_points}")


def assemble_residual(
    state_new: State, state_old: State, h: float, params: ModelParams, grid: Grid1D
) -> np.ndarray:
    """Residual of one implicit Euler step, shape ``(N, 2)``."""
    _check_sizes(state_new, grid)
    _check_sizes(state_old, grid)
    n, w = _boundary_overrides(state_new.n, state_new.w, grid)
    g1, g2 = flux_pair(n, w, params.beta)
    res = np.empty((grid.num_points, 2))
    res[:, 0] = state_new.n - state_old.n - h * discrete_laplacian(g1, grid)
    res[:, 1] = (
        state_new.w
        - state_old.w
        - h * params.kappa * discrete_laplacian(g2, grid)
        - h * relaxation_term(state_new.n, state_new.w, params)
    )
    for idx, bc in ((0, grid.bc_left), (-1, grid.bc_right)):
        if isinstance(bc, Dirichlet):
            res[idx, 0] = state_new.n[idx] - bc.n_D
            res[idx, 1] = state_new.w[idx] - bc.w_D
    return res


def assemble_jacobian(state_new: State, h: float, params: ModelParams, grid: Grid1D) -> BlockTridiagonal:
    """Exact derivative of :func:`assemble_residual` with respect to ``(n_i, w_i)``."""
    _check_sizes(state_new, grid)
    m = grid.num_points
    n, w = _boundary_overrides(state_new.n, state_new.w, grid)
    dg = flux_pair_jacobian(n, w, params.beta)  # (m, 2, 2), row k = grad g_k
    # equation 1 diffuses g1, equation 2 diffuses kappa g2
    coupling = dg.copy()
    coupling[:, 1, :] *= params.kappa
    c = h / grid.dx**2
    dr_n, dr_w = relaxation_term_jacobian(state_new.n, state_new.w, params)

    eye = np.eye(2)
    lower = np.zeros((m, 2, 2))
    upper = np.zeros((m, 2, 2))
    diag = np.broadcast_to(eye, (m, 2, 2)).copy()

    diag[1:-1] += 2.0 * c * coupling[1:-1]
    lower[1:-1] = -c * coupling[:-2]
    upper[1:-1] = -c * coupling[2:]
    diag[:, 1, 0] -= h * dr_n
    diag[:, 1, 1] -= h * dr_w

    left, right = grid.bc_left, grid.bc_right
    if isinstance(left, Dirichlet):
        diag[0] = eye
        upper[0] = 0.0
        # boundary values are data, not unknowns, inside the interior stencils
        lower[1] = 0.0
    else:
        diag[0] += 2.0 * c * coupling[0]
        upper[0] = -2.0 * c * coupling[1]
    if isinstance(right, Dirichlet):
        diag[-1] = eye
        lower[-1] = 0.0
        upper[-2] = 0.0
    else:
        diag[-1] += 2.0 * c * coupling[-1]
        lower[-1] = -2.0 * c * coupling[-2]
    return BlockTridiagonal(lower, diag, upper)


def interior_mass_balance(state_new: State, state_old: State, h: float, params: ModelParams, grid: Grid1D):
    """Mass change of the non-Dirichlet nodes and the boundary flux that should cause it.

    Returns ``(delta_mass, h * (flux_right - flux_left))`` where mass uses
    weights ``dx`` at interior nodes, ``dx/2`` at Neumann ends and zero at
    Dirichlet ends. The stencil telescopes, so the two agree up to the
    Newton residual.
    """
    wts = np.full(grid.num_points, grid.dx)
    for idx, bc in ((0, grid.bc_left), (-1, grid.bc_right)):
        wts[idx] = 0.0 if isinstance(bc, Dirichlet) else 0.5 * grid.dx
    n, w = _boundary_overrides(state_new.n, state_new.w, grid)
    g1, _ = flux_pair(n, w, params.beta)
    flux_left = (g1[1] - g1[0]) / grid.dx if isinstance(grid.bc_left, Dirichlet) else 0.0
    flux_right = (g1[-1] - g1[-2]) / grid.dx if isinstance(grid.bc_right, Dirichlet) else 0.0
    delta = float(np.dot(wts, state_new.n - state_old.n))
    return delta, float(h * (flux_right - flux_left))
