"""Pointwise functions of the continuous energy-transport model.

The model evolves the particle density ``n`` and the energy density
``w = n * theta``::

    dn/dt = Lap(n theta^(1/2 - beta))
    dw/dt = kappa Lap(n theta^(3/2 - beta)) + n (1 - theta) / tau(theta)

with ``kappa = 2/3 (2 - beta)``. Everything here is a pure, vectorised
function of nodal values; the temperature ``theta = w / n`` is always
derived, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "DomainError",
    "Constant",
    "TemperatureDependent",
    "ModelParams",
    "EntropyPair",
    "kappa_of",
    "to_uv",
    "from_uv",
    "flux_pair",
    "flux_pair_jacobian",
    "relaxation_time",
    "relaxation_term",
    "relaxation_term_jacobian",
    "f_b",
    "f_b_grad",
    "f_b_hessian",
    "f_b_hessian_invariants",
    "lambda_min_lower_bound",
    "diffusion_matrix",
    "entropy_variables",
    "log_entropy_density",
]


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


def _power(x, p):
    """``x**p`` for ``x >= 0`` with explicit handling of the origin.

    Negative bases raise instead of returning NaN; ``0**p`` with ``p < 0``
    is singular and raises as well.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("negative or NaN base in fractional power")
    if p == 0:
        return np.ones_like(x)
    if p < 0 and np.any(x == 0):
        raise DomainError(f"zero base with negative exponent {p}")
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(p * np.log(np.where(x > 0, x, 1.0))), 0.0)


def _scalar(out):
    """Unwrap 0-d arrays so scalar inputs give Python floats back."""
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Constant:
    """Constant relaxation time ``tau``."""

    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class TemperatureDependent:
    """Relaxation time ``tau0 + tau1 * theta**(1/2 - beta)``."""

    tau0: float = 1.0
    tau1: float = 1.0

    def __post_init__(self):
        if not (self.tau0 > 0 and self.tau1 > 0):
            raise ValueError(f"tau0 and tau1 must be positive, got {self.tau0}, {self.tau1}")


Relaxation = Union[Constant, TemperatureDependent]


def kappa_of(beta: float) -> float:
    """Energy-flux prefactor ``2/3 (2 - beta)``."""
    return 2.0 * (2.0 - beta) / 3.0


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one model instance.

    ``n_D`` and ``theta_D`` are the (constant) Dirichlet data; they double
    as the reference equilibrium for the entropy and distance diagnostics.
    Exponents ``beta`` outside ``[-1/2, 1/2)`` are rejected unless
    ``allow_extended_beta`` is set.
    """

    beta: float
    relaxation: Relaxation = field(default_factory=Constant)
    n_D: float = 1.0
    theta_D: float = 1.0
    allow_extended_beta: bool = False
    kappa: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kappa", kappa_of(self.beta))
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if not (-0.5 <= self.beta < 0.5) and not self.allow_extended_beta:
            raise ValueError(
                f"beta={self.beta} outside [-1/2, 1/2); set allow_extended_beta to override"
            )
        if not (self.n_D > 0 and self.theta_D > 0):
            raise ValueError("n_D and theta_D must be positive")
        if not isinstance(self.relaxation, (Constant, TemperatureDependent)):
            raise TypeError(f"unknown relaxation model {self.relaxation!r}")

    @property
    def w_D(self) -> float:
        return self.n_D * self.theta_D


@dataclass(frozen=True)
class EntropyPair:
    """Exponent pair ``(b1, b2)`` of the entropy ``S = phi_b1/|b1| + phi_b2/|b2|``."""

    b1: float
    b2: float

    def __post_init__(self):
        if self.b1 == 0 or self.b2 == 0:
            raise ValueError("entropy exponents must be nonzero")
        if self.b1 > self.b2:
            raise ValueError(f"need b1 <= b2, got ({self.b1}, {self.b2})")

    @classmethod
    def default_for(cls, beta: float) -> "EntropyPair":
        """The pair ``(beta - 1/2, 5)`` used for the monotonicity check."""
        return cls(beta - 0.5, 5.0)


# --- variable transforms -------------------------------------------------


def to_uv(n, theta, beta):
    """Map ``(n, theta)`` to ``u = n theta^(1/2-beta)``, ``v = n theta^(3/2-beta)``."""
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(n < 0) or np.any(theta < 0):
        raise DomainError("to_uv needs n >= 0 and theta >= 0")
    u = n * _power(theta, 0.5 - beta)
    v = u * theta
    return _scalar(u), _scalar(v)


def from_uv(u, v, beta):
    """Inverse of :func:`to_uv`: ``n = u^(3/2-beta) v^(beta-1/2)``, ``theta = v/u``.

    Where ``v == 0`` the point is treated as vacuum: ``theta = 0`` and
    ``n = 0``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(u < 0):
        raise DomainError("from_uv needs u >= 0 and v >= 0")
    if np.any((u <= 0) & (v > 0)):
        raise DomainError("from_uv needs u > 0 where v > 0")
    pos = v > 0
    safe_u = np.where(pos, u, 1.0)
    safe_v = np.where(pos, v, 1.0)
    theta = np.where(pos, safe_v / safe_u, 0.0)
    n = np.where(pos, safe_u * _power(np.where(pos, theta, 1.0), beta - 0.5), 0.0)
    return _scalar(n), _scalar(theta)


# --- fluxes and relaxation ------------------------------------------------


def _check_n_positive(n):
    if np.any(~(np.asarray(n) > 0)):
        raise DomainError("density must be strictly positive")


def flux_pair(n, w, beta):
    """Diffused quantities ``g1 = n theta^(1/2-beta)`` and ``g2 = n theta^(3/2-beta)``.

    Written in ``(n, w)`` as ``g1 = n^(1/2+beta) w^(1/2-beta)`` and
    ``g2 = n^(beta-1/2) w^(3/2-beta)``.
    """
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    if np.any(w < 0):
        raise DomainError("energy density must be nonnegative")
    theta = w / n
    g1 = n * _power(theta, 0.5 - beta)
    g2 = g1 * theta
    return _scalar(g1), _scalar(g2)


def flux_pair_jacobian(n, w, beta):
    """Partial derivatives of :func:`flux_pair`, shape ``(..., 2, 2)``.

    Row ``k`` holds ``(d g_k / d n, d g_k / d w)``.
    """
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    if np.any(~(w > 0)):
        raise DomainError("energy density must be strictly positive")
    theta = w / n
    t_half = _power(theta, 0.5 - beta)
    jac = np.empty(np.broadcast(n, w).shape + (2, 2))
    jac[..., 0, 0] = (0.5 + beta) * t_half
    jac[..., 0, 1] = (0.5 - beta) * t_half / theta
    jac[..., 1, 0] = (beta - 0.5) * t_half * theta
    jac[..., 1, 1] = (1.5 - beta) * t_half
    return jac


def relaxation_time(n, w, params: ModelParams):
    """``tau`` or ``tau0 + tau1 theta^(1/2-beta)`` evaluated at ``theta = w/n``."""
    relax = params.relaxation
    if isinstance(relax, Constant):
        return relax.tau
    theta = np.asarray(w, dtype=float) / np.asarray(n, dtype=float)
    return relax.tau0 + relax.tau1 * _power(theta, 0.5 - params.beta)


def relaxation_term(n, w, params: ModelParams):
    """Energy relaxation ``n (1 - theta) / tau(theta) = (n - w) / tau(theta)``."""
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    if np.any(w < 0):
        raise DomainError("energy density must be nonnegative")
    return _scalar((n - w) / relaxation_time(n, w, params))


def relaxation_term_jacobian(n, w, params: ModelParams):
    """``(dR/dn, dR/dw)`` of :func:`relaxation_term`."""
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    relax = params.relaxation
    if isinstance(relax, Constant):
        inv = 1.0 / relax.tau
        return np.full(n.shape, inv), np.full(n.shape, -inv)
    a = 0.5 - params.beta
    theta = w / n
    if a < 1 and np.any(~(w > 0)):
        raise DomainError("energy density must be strictly positive")
    t_a = _power(theta, a)
    tau = relax.tau0 + relax.tau1 * t_a
    # d tau / d theta = tau1 a theta^(a-1); theta_n = -theta/n, theta_w = 1/n
    dtau_dtheta = relax.tau1 * a * _power(theta, a - 1) if a != 0 else np.zeros_like(theta)
    diff = n - w
    d_n = 1.0 / tau + diff * dtau_dtheta * theta / (n * tau**2)
    d_w = -1.0 / tau - diff * dtau_dtheta / (n * tau**2)
    return d_n, d_w


# --- entropy densities ------------------------------------------------------


def f_b(n, w, b):
    """Entropy density ``n^(2-b) w^b = n^2 theta^b``."""
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    return _scalar(_power(n, 2.0 - b) * _power(w, b))


def f_b_grad(n, w, b):
    """Gradient ``((2-b) n theta^b, b n theta^(b-1))`` of :func:`f_b`."""
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    theta = w / n
    d_n = (2.0 - b) * n * _power(theta, b)
    d_w = b * n * _power(theta, b - 1.0)
    return _scalar(d_n), _scalar(d_w)


def f_b_hessian(n, w, b):
    """Full Hessian of :func:`f_b` in ``(n, w)``, shape ``(..., 2, 2)``.

    It is homogeneous of degree zero, so it depends on ``theta`` only.
    """
    n = np.asarray(n, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_n_positive(n)
    theta = w / n
    hess = np.empty(theta.shape + (2, 2))
    hess[..., 0, 0] = (2.0 - b) * (1.0 - b) * _power(theta, b)
    hess[..., 0, 1] = hess[..., 1, 0] = b * (2.0 - b) * _power(theta, b - 1.0)
    hess[..., 1, 1] = b * (b - 1.0) * _power(theta, b - 2.0)
    return hess


def f_b_hessian_invariants(theta, b):
    """Determinant and trace of the Hessian of ``f_b`` at temperature ``theta``.

    ``det = b (b-2) theta^(2b-2)`` and
    ``trace = (b-1) ((b-2) theta^b + b theta^(b-2))``; both are nonnegative
    for ``b <= 0`` or ``b >= 2``.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise DomainError("theta must be positive")
    det = b * (b - 2.0) * _power(theta, 2.0 * b - 2.0)
    trace = (b - 1.0) * ((b - 2.0) * _power(theta, b) + b * _power(theta, b - 2.0))
    return _scalar(det), _scalar(trace)


def lambda_min_lower_bound(theta, b1, b2):
    """Lower bound ``sum det/trace`` for the smallest eigenvalue of ``D2 f_b1 + D2 f_b2``.

    Uses ``lambda_min(A + B) >= lambda_min(A) + lambda_min(B)`` together with
    ``lambda_min(A) >= det(A) / tr(A)`` for symmetric positive semidefinite
    2x2 matrices.
    """
    total = 0.0
    for b in (b1, b2):
        if 0 <= b <= 2:
            raise DomainError(f"exponent {b} is not in the strictly convex range b<0 or b>2")
        det, trace = f_b_hessian_invariants(theta, b)
        if np.any(np.asarray(trace) == 0):
            raise DomainError("zero Hessian trace")
        total = total + np.asarray(det) / np.asarray(trace)
    return _scalar(total)


# --- symmetrised form ---------------------------------------------------------


def diffusion_matrix(n, theta, beta):
    """Symmetric positive semidefinite diffusion matrix in entropy variables.

    ``n theta^(1/2-beta) [[1, (2-beta) theta], [(2-beta) theta, (3-beta)(2-beta) theta^2]]``
    """
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(n < 0) or np.any(theta < 0):
        raise DomainError("diffusion_matrix needs n >= 0 and theta >= 0")
    pref = n * _power(theta, 0.5 - beta)
    off = pref * (2.0 - beta) * theta
    mat = np.empty(np.broadcast(n, theta).shape + (2, 2))
    mat[..., 0, 0] = pref
    mat[..., 0, 1] = off
    mat[..., 1, 0] = off
    mat[..., 1, 1] = pref * (3.0 - beta) * (2.0 - beta) * theta**2
    return mat


def entropy_variables(n, theta):
    """``(log(n / theta^(3/2)), -1/theta)``."""
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(~(n > 0)) or np.any(~(theta > 0)):
        raise DomainError("entropy variables need n > 0 and theta > 0")
    return _scalar(np.log(n) - 1.5 * np.log(theta)), _scalar(-1.0 / theta)


def log_entropy_density(n, theta):
    """``n log(n / theta^(3/2))``; used for monitoring only."""
    w1, _ = entropy_variables(n, theta)
    return _scalar(np.asarray(n, dtype=float) * w1)
