"""Degree distributions and the scalar maps driving density evolution.

A single-layer counter braid with flow degree ``k`` and Poisson counter
degrees of mean ``gamma`` is described, in the large-system limit, by two
maps on ``[0, 1]``:

* ``flow_map(y) = eps * y**(k-1)``   (even-iteration flow node update)
* ``counter_map(x) = 1 - rho(1 - (1 - rho(1 - x))**(k-1))``

where ``rho(z) = exp(-gamma * (1 - z))`` is the edge-perspective counter
degree distribution.  Density evolution iterates ``x <- flow_map(counter_map(x))``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .exceptions import ConsistencyError, DomainError, NumericalError

CLAMP_SLACK = 1e-15
CLAMP_LIMIT = 1e-9


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters of a single-layer counter braid ensemble.

    ``beta`` (counters per flow) is derived from ``k / gamma`` and never
    stored independently.
    """

    k: int
    gamma: float
    eps: float = 0.0
    f_min: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise DomainError(f"flow degree k must be an integer >= 2, got {self.k}")
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise DomainError(f"gamma must be positive and finite, got {self.gamma}")
        if not 0.0 <= self.eps <= 1.0:
            raise DomainError(f"eps must lie in [0, 1], got {self.eps}")
        if int(self.f_min) != self.f_min or self.f_min < 0:
            raise DomainError(f"f_min must be a nonnegative integer, got {self.f_min}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "f_min", int(self.f_min))

    @classmethod
    def from_beta(cls, k, beta, eps=0.0, f_min=1):
        if not beta > 0:
            raise DomainError(f"beta must be positive, got {beta}")
        return cls(k=k, gamma=k / beta, eps=eps, f_min=f_min)

    @property
    def beta(self) -> float:
        return self.k / self.gamma

    def with_eps(self, eps) -> "EnsembleParams":
        return replace(self, eps=eps)


def clamp_probability(value, name="value"):
    """Clamp rounding noise back into [0, 1].

    Values outside the interval by more than ``CLAMP_LIMIT`` indicate a bug
    and raise :class:`ConsistencyError` instead of being silently clipped.
    """
    arr = np.asarray(value, dtype=float)
    if np.any(arr < -CLAMP_LIMIT) or np.any(arr > 1.0 + CLAMP_LIMIT):
        raise ConsistencyError(f"{name} left [0, 1] by more than {CLAMP_LIMIT}: {arr}")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _check_unit(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -CLAMP_SLACK) or np.any(arr > 1.0 + CLAMP_SLACK):
        raise DomainError(f"{name} must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _scalarize(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def poisson_edge_dist(z, gamma):
    """Edge-perspective Poisson counter degree distribution, ``exp(-gamma (1 - z))``."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    z = _check_unit(z, "z")
    return _scalarize(np.exp(-gamma * (1.0 - z)))


def _one_minus_rho_one_minus(x, gamma):
    # 1 - rho(1 - x) without cancellation for small x
    return -np.expm1(-gamma * x)


def flow_map(y, params: EnsembleParams):
    """Flow node update ``eps * y**(k-1)``."""
    y = _check_unit(y, "y")
    return _scalarize(params.eps * y ** (params.k - 1))


def _counter_map_raw(x, k, gamma):
    inner = _one_minus_rho_one_minus(x, gamma)
    return _one_minus_rho_one_minus(inner ** (k - 1), gamma)


def counter_map(x, params: EnsembleParams):
    """Two-hop counter map ``1 - rho(1 - (1 - rho(1 - x))**(k-1))``."""
    x = _check_unit(x, "x")
    return _scalarize(_counter_map_raw(x, params.k, params.gamma))


def counter_map_prime(x, params: EnsembleParams):
    """Derivative of :func:`counter_map` with respect to ``x``."""
    x = _check_unit(x, "x")
    k, gamma = params.k, params.gamma
    e1 = np.exp(-gamma * x)
    inner = -np.expm1(-gamma * x)
    b = inner ** (k - 1)
    db = (k - 1) * inner ** (k - 2) * gamma * e1
    return _scalarize(gamma * np.exp(-gamma * b) * db)


def counter_map_integral(x, params: EnsembleParams, tol=1e-10, lower=0.0):
    """Integral of :func:`counter_map` from ``lower`` to ``x`` (adaptive quadrature).

    Raises :class:`NumericalError` if the quadrature error estimate exceeds ``tol``.
    """
    x = float(_check_unit(x, "x"))
    lower = float(_check_unit(lower, "lower"))
    if x == lower:
        return 0.0
    k, gamma = params.k, params.gamma
    value, abserr, info = integrate.quad(
        _counter_map_raw, lower, x, args=(k, gamma),
        epsabs=min(tol, 1e-14), epsrel=1e-12, limit=200, full_output=True,
    )[:3]
    if abserr > tol:
        raise NumericalError(
            f"quadrature of counter_map on [{lower}, {x}] reached error {abserr:.3g} > tol {tol:.3g} "
            f"after {info['neval']} evaluations (k={k}, gamma={gamma})"
        )
    return value


def potential(x, params: EnsembleParams, tol=1e-10):
    """Uncoupled potential ``x g(x) - int_0^x g - (eps/k) g(x)**k``."""
    x = float(_check_unit(x, "x"))
    if x == 0.0:
        return 0.0
    gx = _counter_map_raw(x, params.k, params.gamma)
    return x * gx - counter_map_integral(x, params, tol) - params.eps / params.k * gx ** params.k


def potential_slope(x, params: EnsembleParams):
    """Closed-form derivative of :func:`potential`: ``g'(x) (x - f(g(x)))``."""
    x = _check_unit(x, "x")
    gx = _counter_map_raw(x, params.k, params.gamma)
    return _scalarize(counter_map_prime(x, params) * (x - params.eps * gx ** (params.k - 1)))
