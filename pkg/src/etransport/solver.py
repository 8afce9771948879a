"""Newton iteration and adaptive implicit Euler time stepping.

The step controller follows a deliberately simple rule: the time step is
multiplied by ``grow_factor`` when the previous state already satisfies the
Newton tolerance for the new step (zero Newton iterations), and by
``shrink_factor`` when Newton produces a nonpositive iterate or fails to
converge.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .discretization import BlockTridiagonal, Grid1D, State, assemble_jacobian, assemble_residual
from .model import DomainError, ModelParams

__all__ = [
    "SingularPivotError",
    "SolverAbort",
    "block_thomas_solve",
    "thomas_solve",
    "SolverConfig",
    "NewtonStatus",
    "NewtonResult",
    "newton_solve",
    "StepRecord",
    "RunResult",
    "advance",
]

log = logging.getLogger(__name__)


class SingularPivotError(np.linalg.LinAlgError):
    """A pivot block became (numerically) singular during block elimination."""


class SolverAbort(RuntimeError):
    """The time step fell below ``dt_min`` without an acceptable step."""

    def __init__(self, message: str, state: State, records: list):
        super().__init__(message)
        self.state = state
        self.records = records


# --- linear algebra -------------------------------------------------------------


def block_thomas_solve(J: BlockTridiagonal, rhs) -> np.ndarray:
    """Solve ``J x = rhs`` for a block-tridiagonal matrix with 2x2 blocks.

    Block LU without pivoting across block rows; each pivot block is
    inverted in closed form. ``rhs`` may be flat (``2N``) or ``(N, 2)``; the
    result has shape ``(N, 2)``.

    Raises
    ------
    SingularPivotError
        If a pivot block has a vanishing determinant relative to its scale.
    """
    m = J.num_blocks
    r = np.asarray(rhs, dtype=float).reshape(m, 2).tolist()
    lo = J.lower.tolist()
    di = J.diag.tolist()
    up = J.upper.tolist()
    # scalar loop: 2x2 numpy ops are far slower than Python floats here
    cp = [None] * m
    dp = [None] * m
    l00 = l01 = l10 = l11 = 0.0
    c00 = c01 = c10 = c11 = 0.0
    d0 = d1 = 0.0
    for i in range(m):
        (a00, a01), (a10, a11) = di[i]
        r0, r1 = r[i]
        if i > 0:
            (l00, l01), (l10, l11) = lo[i]
            a00 -= l00 * c00 + l01 * c10
            a01 -= l00 * c01 + l01 * c11
            a10 -= l10 * c00 + l11 * c10
            a11 -= l10 * c01 + l11 * c11
            r0 -= l00 * d0 + l01 * d1
            r1 -= l10 * d0 + l11 * d1
        det = a00 * a11 - a01 * a10
        scale = max(abs(a00), abs(a01), abs(a10), abs(a11))
        if not math.isfinite(det) or abs(det) <= 1e-14 * scale * scale or scale == 0.0:
            raise SingularPivotError(f"singular pivot block at row {i}")
        inv = 1.0 / det
        i00, i01, i10, i11 = a11 * inv, -a01 * inv, -a10 * inv, a00 * inv
        if i < m - 1:
            (u00, u01), (u10, u11) = up[i]
            c00 = i00 * u00 + i01 * u10
            c01 = i00 * u01 + i01 * u11
            c10 = i10 * u00 + i11 * u10
            c11 = i10 * u01 + i11 * u11
            cp[i] = (c00, c01, c10, c11)
        d0 = i00 * r0 + i01 * r1
        d1 = i10 * r0 + i11 * r1
        dp[i] = (d0, d1)

    x = np.empty((m, 2))
    x0, x1 = dp[m - 1]
    x[m - 1] = x0, x1
    for i in range(m - 2, -1, -1):
        c00, c01, c10, c11 = cp[i]
        d0, d1 = dp[i]
        x0, x1 = d0 - (c00 * x0 + c01 * x1), d1 - (c10 * x0 + c11 * x1)
        x[i] = x0, x1
    return x


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Scalar tridiagonal solve, ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``."""
    m = len(diag)
    cp = np.zeros(m)
    dp = np.zeros(m)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, m):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < m - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.zeros(m)
    x[-1] = dp[-1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


# --- Newton ---------------------------------------------------------------------


@dataclass
class SolverConfig:
    """Newton tolerances and time-step control.

    ``adaptive=False`` runs with the constant step ``dt_init`` and aborts on
    the first failed step instead of shrinking.
    """

    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    dt_init: float = 2e-3
    dt_max: float = 2e-3
    dt_min: float = 1e-12
    grow_factor: float = 1.25
    shrink_factor: float = 0.75
    t_end: float = 1.0
    snapshot_times: Sequence[float] = (0.0, 1e-3, 5e-3, 2e-2, 1e-1, 1.0)
    adaptive: bool = True

    def __post_init__(self):
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.grow_factor > 1:
            raise ValueError("grow_factor must exceed 1")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if int(self.newton_max_iters) != self.newton_max_iters or self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be a positive integer")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")


class NewtonStatus(enum.Enum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    NO_CONVERGENCE = "no_convergence"


@dataclass
class NewtonResult:
    status: NewtonStatus
    state: Optional[State]
    iters: int
    residuals: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is NewtonStatus.CONVERGED


def _max_norm(res: np.ndarray) -> float:
    return float(np.max(np.abs(res)))


def newton_solve(
    state_old: State, h: float, params: ModelParams, grid: Grid1D, config: SolverConfig
) -> NewtonResult:
    """Solve one implicit Euler step by undamped Newton iteration from ``state_old``.

    ``residuals`` holds the max-norm residual of every iterate, starting
    with the initial guess. Any nonpositive iterate, or a singular pivot in
    the linear solve, ends the iteration as ``INFEASIBLE``.
    """
    if not h > 0:
        raise ValueError("time step must be positive")
    n = state_old.n.copy()
    w = state_old.w.copy()
    t_new = state_old.t + h
    residuals = []
    for k in range(config.newton_max_iters + 1):
        current = State(n, w, t_new)
        try:
            res = assemble_residual(current, state_old, h, params, grid)
        except DomainError:
            return NewtonResult(NewtonStatus.INFEASIBLE, None, k, residuals)
        rnorm = _max_norm(res)
        residuals.append(rnorm)
        if not math.isfinite(rnorm):
            return NewtonResult(NewtonStatus.NO_CONVERGENCE, None, k, residuals)
        if rnorm <= config.newton_tol:
            return NewtonResult(NewtonStatus.CONVERGED, current, k, residuals)
        if k == config.newton_max_iters:
            break
        try:
            jac = assemble_jacobian(current, h, params, grid)
            delta = block_thomas_solve(jac, res)
        except (DomainError, SingularPivotError):
            return NewtonResult(NewtonStatus.INFEASIBLE, None, k, residuals)
        n = n - delta[:, 0]
        w = w - delta[:, 1]
        if not (np.all(n > 0) and np.all(w > 0)):
            return NewtonResult(NewtonStatus.INFEASIBLE, None, k + 1, residuals)
    return NewtonResult(NewtonStatus.NO_CONVERGENCE, None, config.newton_max_iters, residuals)


# --- time stepping ----------------------------------------------------------------


@dataclass
class StepRecord:
    t: float
    dt: float
    newton_iters: int
    accepted: bool
    min_n: float
    min_theta: float
    residual_norm: float
    status: str = "converged"


@dataclass
class RunResult:
    records: list
    snapshots: dict
    final: State
    states: Optional[list] = None

    @property
    def accepted(self) -> list:
        return [r for r in self.records if r.accepted]


def advance(
    state: State,
    params: ModelParams,
    grid: Grid1D,
    config: SolverConfig,
    keep_states: bool = False,
    callback: Optional[Callable[[StepRecord, State], None]] = None,
) -> RunResult:
    """Integrate from ``state`` to ``config.t_end``.

    Returns every attempted step as a :class:`StepRecord` (rejected attempts
    have ``accepted=False``), snapshots keyed by requested time (taken at the
    first accepted state at or after that time), and the final state. With
    ``keep_states`` the initial and every accepted state are kept as well.

    The last step is shortened so the run ends exactly at ``t_end``; the
    controller's nominal step is not affected by that.

    Raises
    ------
    SolverAbort
        When no step at or above ``dt_min`` is acceptable.
    """
    if not state.is_positive():
        raise ValueError("initial state must be strictly positive")
    current = state.copy()
    dt = config.dt_init
    records: list = []
    states = [current] if keep_states else None
    pending = sorted(config.snapshot_times)
    snapshots: dict = {}

    def take_snapshots(s: State):
        while pending and s.t >= pending[0] - 1e-12 * max(1.0, pending[0]):
            snapshots[pending.pop(0)] = s

    take_snapshots(current)
    end = config.t_end
    while current.t < end * (1 - 1e-14):
        h = min(dt, end - current.t)
        result = newton_solve(current, h, params, grid, config)
        if not result.converged:
            last = result.residuals[-1] if result.residuals else math.nan
            records.append(
                StepRecord(current.t + h, h, result.iters, False, math.nan, math.nan, last, result.status.value)
            )
            if not config.adaptive:
                raise SolverAbort(
                    f"fixed step {h:g} failed at t={current.t:g} ({result.status.value})", current, records
                )
            if dt <= config.dt_min:
                raise SolverAbort(
                    f"time step reached dt_min={config.dt_min:g} at t={current.t:g} ({result.status.value})",
                    current,
                    records,
                )
            dt = max(dt * config.shrink_factor, config.dt_min)
            log.debug("t=%g: %s, shrinking dt to %g", current.t, result.status.value, dt)
            continue

        new = result.state
        if h == end - current.t:
            new.t = end
        rec = StepRecord(
            new.t, h, result.iters, True, float(new.n.min()), float(new.theta.min()), result.residuals[-1]
        )
        records.append(rec)
        current = new
        if keep_states:
            states.append(current)
        if callback is not None:
            callback(rec, current)
        take_snapshots(current)
        if config.adaptive and result.iters == 0:
            dt = min(dt * config.grow_factor, config.dt_max)
    return RunResult(records, snapshots, current, states)
