"""Entropy functionals, dissipation, distances and decay fits along trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .discretization import Grid1D, State
from .model import EntropyPair, ModelParams, f_b, f_b_grad, log_entropy_density

__all__ = [
    "phi_b_integrand",
    "phi_b",
    "entropy_S",
    "dissipation_integral",
    "EntropySeries",
    "EntropyReport",
    "entropy_series",
    "entropy_inequality_report",
    "distance_to_equilibrium",
    "relative_distance",
    "DecayFit",
    "fit_decay",
    "algebraic_envelope",
    "GronwallReport",
    "gronwall_bound",
    "gronwall_bound_check",
    "log_entropy",
    "TRAJECTORY_COLUMNS",
    "trajectory_row",
]


def _trapezoid(values: np.ndarray, grid: Grid1D) -> float:
    return float(np.dot(grid.trapezoid_weights(), values))


def phi_b_integrand(state: State, b: float, params: ModelParams) -> np.ndarray:
    """Pointwise Bregman distance of ``f_b`` from the boundary reference state."""
    n_D, w_D = params.n_D, params.w_D
    f_ref = f_b(n_D, w_D, b)
    dn_ref, dw_ref = f_b_grad(n_D, w_D, b)
    return f_b(state.n, state.w, b) - f_ref - dn_ref * (state.n - n_D) - dw_ref * (state.w - w_D)


def phi_b(state: State, b: float, params: ModelParams, grid: Grid1D) -> float:
    """Trapezoid quadrature of :func:`phi_b_integrand`."""
    return _trapezoid(phi_b_integrand(state, b, params), grid)


def entropy_S(state: State, pair: EntropyPair, params: ModelParams, grid: Grid1D) -> float:
    """``phi_b1 / |b1| + phi_b2 / |b2|``."""
    return phi_b(state, pair.b1, params, grid) / abs(pair.b1) + phi_b(state, pair.b2, params, grid) / abs(pair.b2)


def dissipation_integral(state: State, pair: EntropyPair, beta: float, grid: Grid1D) -> float:
    """Gradient integral controlling the entropy decrease.

    ``int (theta^(b1+1/2-beta) + theta^(b2+1/2-beta)) |n_x|^2
    + n^2 (theta^(b1-3/2-beta) + theta^(b2-3/2-beta)) |theta_x|^2 dx``,
    evaluated by the midpoint rule with one-sided cell gradients and
    cell-averaged coefficients.
    """
    n = state.n
    theta = state.theta
    if np.any(~(theta > 0)) or np.any(~(n > 0)):
        raise ValueError("dissipation needs a strictly positive state")
    coef_n = theta ** (pair.b1 + 0.5 - beta) + theta ** (pair.b2 + 0.5 - beta)
    coef_t = n**2 * (theta ** (pair.b1 - 1.5 - beta) + theta ** (pair.b2 - 1.5 - beta))
    dn = np.diff(n) / grid.dx
    dt = np.diff(theta) / grid.dx
    cell = 0.5 * (coef_n[:-1] + coef_n[1:]) * dn**2 + 0.5 * (coef_t[:-1] + coef_t[1:]) * dt**2
    return float(grid.dx * cell.sum())


@dataclass
class EntropySeries:
    times: np.ndarray
    values: np.ndarray
    dissipation: np.ndarray
    pair: EntropyPair

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.dissipation)):
            raise ValueError("series arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def entropy_series(states: Sequence[State], pair: EntropyPair, params: ModelParams, grid: Grid1D) -> EntropySeries:
    times = np.array([s.t for s in states])
    values = np.array([entropy_S(s, pair, params, grid) for s in states])
    diss = np.array([dissipation_integral(s, pair, params.beta, grid) for s in states])
    return EntropySeries(times, values, diss, pair)


@dataclass
class EntropyReport:
    """Step-by-step check of the discrete entropy inequality.

    ``delta_S[j] = S[j+1] - S[j]`` and ``ratio[j] = -delta_S[j] / (h_j D[j+1])``
    (NaN where the dissipation is below ``dissipation_floor``).
    """

    series: EntropySeries
    delta_S: np.ndarray
    steps: np.ndarray
    ratio: np.ndarray
    rel_tol: float
    dissipation_floor: float
    equilibrium_data: bool

    @property
    def allowed_increase(self) -> np.ndarray:
        return self.rel_tol * np.maximum(1.0, np.abs(self.series.values[:-1]))

    @property
    def violations(self) -> np.ndarray:
        """Indices ``j`` with ``S[j+1] - S[j]`` above the allowed increase."""
        return np.flatnonzero(self.delta_S > self.allowed_increase)

    @property
    def monotone(self) -> bool:
        return self.violations.size == 0

    @property
    def empirical_C1(self) -> float:
        valid = self.ratio[np.isfinite(self.ratio)]
        return float(valid.min()) if valid.size else math.nan

    @property
    def ratio_positive(self) -> bool:
        valid = self.ratio[np.isfinite(self.ratio)]
        return bool(np.all(valid > 0))


def entropy_inequality_report(
    states: Sequence[State],
    pair: EntropyPair,
    params: ModelParams,
    grid: Grid1D,
    rel_tol: float = 1e-10,
    dissipation_floor: float = 1e-14,
) -> EntropyReport:
    """Measure ``S_j - S_{j-1}`` and the implied dissipation constant along ``states``.

    The monotonicity verdict is only meaningful for constant Dirichlet data
    with ``theta_D = 1``; ``equilibrium_data`` records whether that holds.
    """
    series = entropy_series(states, pair, params, grid)
    delta = np.diff(series.values)
    steps = np.diff(series.times)
    diss = series.dissipation[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diss > dissipation_floor, -delta / (steps * diss), np.nan)
    equilibrium = params.theta_D == 1.0
    return EntropyReport(series, delta, steps, ratio, rel_tol, dissipation_floor, equilibrium)


# --- distances and decay --------------------------------------------------------------


def distance_to_equilibrium(state: State, params: ModelParams, grid: Grid1D):
    """L2 norms ``||n - n_D||`` and ``||w - n_D theta_D||`` (trapezoid rule)."""
    dn = _trapezoid((state.n - params.n_D) ** 2, grid)
    dw = _trapezoid((state.w - params.w_D) ** 2, grid)
    return math.sqrt(dn), math.sqrt(dw)


def relative_distance(state: State, params: ModelParams, grid: Grid1D):
    """Distances of :func:`distance_to_equilibrium` divided by the equilibrium norms."""
    dist_n, dist_w = distance_to_equilibrium(state, params, grid)
    root = math.sqrt(grid.length)
    return dist_n / (params.n_D * root), dist_w / (params.w_D * root)


@dataclass
class DecayFit:
    """Least-squares decay fits.

    ``exp_rate`` is ``-d log(v)/dt``; the algebraic fit is
    ``v ~ alg_C1 / (1 + alg_C2 t)`` obtained from a straight line through ``1/v``.
    """

    window: tuple
    exp_rate: float
    exp_r2: float
    alg_C1: float
    alg_C2: float
    alg_r2: float


def _linfit(t: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


def fit_decay(times, values, window: Optional[tuple] = None) -> DecayFit:
    """Fit exponential and algebraic decay laws to ``values(times)`` inside ``window``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    mask = (times >= window[0]) & (times <= window[1])
    t, v = times[mask], values[mask]
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in window, got {t.size}")
    if np.any(~(v > 0)):
        raise ValueError("decay fits need strictly positive values")
    slope, _, exp_r2 = _linfit(t, np.log(v))
    a_slope, a_int, alg_r2 = _linfit(t, 1.0 / v)
    c1 = 1.0 / a_int if a_int != 0 else math.inf
    return DecayFit(window, -slope + 0.0, exp_r2, c1, a_slope * c1, alg_r2)


def algebraic_envelope(times, values, C2: float) -> float:
    """Smallest ``C1`` with ``values <= C1 / (1 + C2 t)`` at every sample."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    return float(np.max(values * (1.0 + C2 * times)))


@dataclass
class GronwallReport:
    hypothesis_violation: Optional[int]
    conclusion_violation: Optional[int]
    bounds: np.ndarray

    @property
    def passed(self) -> bool:
        return self.hypothesis_violation is None and self.conclusion_violation is None


def gronwall_bound(x0: float, kappa_g: float, j) -> np.ndarray:
    """``x0 / (1 + kappa x0 j / (1 + 2 kappa x0))``."""
    j = np.asarray(j, dtype=float)
    return x0 / (1.0 + kappa_g * x0 * j / (1.0 + 2.0 * kappa_g * x0))


def gronwall_bound_check(x, kappa_g: float, rel_tol: float = 1e-12) -> GronwallReport:
    """Check ``x_j + kappa x_j^2 <= x_{j-1}`` and the resulting algebraic bound.

    Reports the first index violating the hypothesis and the first index
    violating the conclusion (``None`` when there is none).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("sequence must be nonnegative")
    if not kappa_g > 0:
        raise ValueError("kappa must be positive")
    slack = rel_tol * np.maximum(1.0, np.abs(x))
    lhs = x[1:] + kappa_g * x[1:] ** 2
    hyp = np.flatnonzero(lhs > x[:-1] + slack[:-1])
    bounds = gronwall_bound(x[0], kappa_g, np.arange(x.size))
    concl = np.flatnonzero(x > bounds + slack)
    return GronwallReport(
        int(hyp[0]) + 1 if hyp.size else None,
        int(concl[0]) if concl.size else None,
        bounds,
    )


def log_entropy(state: State, grid: Grid1D) -> float:
    """Trapezoid quadrature of ``n log(n / theta^(3/2))``."""
    return _trapezoid(log_entropy_density(state.n, state.theta), grid)


TRAJECTORY_COLUMNS = (
    "t",
    "dt",
    "newton_iters",
    "S_pair",
    "dissipation",
    "dist_n",
    "dist_w",
    "rel_dist_n",
    "rel_dist_w",
    "min_n",
    "min_theta",
    "log_entropy",
)


def trajectory_row(state: State, dt: float, newton_iters: int, pair: EntropyPair, params: ModelParams, grid: Grid1D):
    """One CSV row of :data:`TRAJECTORY_COLUMNS` for an accepted state."""
    dist_n, dist_w = distance_to_equilibrium(state, params, grid)
    rel_n, rel_w = relative_distance(state, params, grid)
    return (
        state.t,
        dt,
        newton_iters,
        entropy_S(state, pair, params, grid),
        dissipation_integral(state, pair, params.beta, grid),
        dist_n,
        dist_w,
        rel_n,
        rel_w,
        float(state.n.min()),
        float(state.theta.min()),
        log_entropy(state, grid),
    )
