"""Scalar density evolution for single-layer counter braids.

Covers the fixed-point recursion, BP thresholds in ``eps`` and ``beta``,
the extended BP (EBP) EXIT curve, the area and potential thresholds, and
the EXIT curve of the residual graph left when the peeling decoder stops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .degree_model import EnsembleParams, _counter_map_raw, clamp_probability
from .exceptions import BracketError, DomainError, NumericalError

ZERO_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass
class FixedPointResult:
    x_inf: float
    iterations: int
    converged: bool
    trajectory: np.ndarray | None = None

    @property
    def success(self) -> bool:
        """True when decoding succeeds, i.e. the fixed point is zero."""
        return self.x_inf < ZERO_TOL


@dataclass
class ExitCurve:
    """Sampled parametric EXIT curve ``(param, eps(param), h(param))``."""

    param: np.ndarray
    eps: np.ndarray
    h: np.ndarray
    area: float = 0.0
    k: int | None = None
    gamma: float | None = None
    channel_eps: float | None = None
    markers: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.param)

    @property
    def is_empty(self) -> bool:
        return len(self.param) == 0


def _g_scalar(x, k, gamma):
    inner = -math.expm1(-gamma * x)
    return -math.expm1(-gamma * inner ** (k - 1))


def de_fixed_point(params: EnsembleParams, x0=1.0, max_iter=DEFAULT_MAX_ITER, tol=1e-14,
                   record=False) -> FixedPointResult:
    """Iterate ``x <- eps * g(x)**(k-1)`` from ``x0`` until the step drops below ``tol``.

    From ``x0 = 1`` the iterates decrease monotonically and land on the
    largest fixed point.
    """
    if not 0.0 <= x0 <= 1.0:
        raise DomainError(f"x0 must lie in [0, 1], got {x0}")
    k, gamma, eps = params.k, params.gamma, params.eps
    x = float(x0)
    traj = [x] if record else None
    for it in range(1, max_iter + 1):
        x_new = eps * _g_scalar(x, k, gamma) ** (k - 1)
        if record:
            traj.append(x_new)
        step = abs(x - x_new)
        x = x_new
        if step < tol or x == 0.0:
            return FixedPointResult(x, it, True, np.array(traj) if record else None)
    return FixedPointResult(x, max_iter, False, np.array(traj) if record else None)


def de_two_step(params: EnsembleParams, x0=1.0, n_iter=100):
    """Run the half-iteration recursion (odd: ``x = y**(k-1)``, even: ``x = eps y**(k-1)``).

    Returns arrays ``x`` and ``y`` of length ``n_iter + 1``; index ``l`` holds
    the value after iteration ``l`` (``y[0]`` is unused and set to 0).
    """
    k, gamma, eps = params.k, params.gamma, params.eps
    xs = np.empty(n_iter + 1)
    ys = np.zeros(n_iter + 1)
    xs[0] = x0
    for ell in range(1, n_iter + 1):
        y = -math.expm1(-gamma * xs[ell - 1])
        ys[ell] = y
        xs[ell] = y ** (k - 1) if ell % 2 == 1 else eps * y ** (k - 1)
    return xs, ys


def _succeeds(k, gamma, eps, max_iter):
    return de_fixed_point(EnsembleParams(k, gamma, eps), 1.0, max_iter).success


def bp_threshold_eps(k, gamma, tol_eps=1e-6, max_iter=DEFAULT_MAX_ITER):
    """Largest ``eps`` for which density evolution started at 1 reaches zero."""
    if not tol_eps > 0:
        raise DomainError("tol_eps must be positive")
    EnsembleParams(k, gamma)
    if _succeeds(k, gamma, 1.0, max_iter):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol_eps:
        mid = 0.5 * (lo + hi)
        if _succeeds(k, gamma, mid, max_iter):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bp_threshold_beta(k, eps, tol_beta=1e-6, beta_max=4.0, max_iter=DEFAULT_MAX_ITER):
    """Smallest counters-per-flow ratio ``beta`` for which decoding succeeds at ``eps``."""
    if not tol_beta > 0:
        raise DomainError("tol_beta must be positive")
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps must lie in [0, 1], got {eps}")
    if not _succeeds(k, k / beta_max, eps, max_iter):
        raise BracketError(f"decoding fails at beta={beta_max}; no threshold in (0, {beta_max}]")
    lo, hi = 0.0, beta_max
    while hi - lo > tol_beta:
        mid = 0.5 * (lo + hi)
        if _succeeds(k, k / mid, eps, max_iter):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _ebp_coordinates(x, k, gamma):
    x = np.asarray(x, dtype=float)
    gx = _counter_map_raw(x, k, gamma)
    with np.errstate(divide="ignore"):
        log_eps = np.log(x) - (k - 1) * np.log(gx)
    return np.exp(log_eps), gx ** k


def ebp_eps_at_zero(k, gamma):
    """Limit of the EBP curve's ``eps(x)`` as ``x -> 0+`` (infinite for ``k >= 3``)."""
    return gamma ** -2 if k == 2 else math.inf


def cosine_grid(n, include_zero=False):
    """``n`` points on [0, 1] clustered at both ends (Chebyshev-Lobatto spacing)."""
    t = 0.5 * (1.0 - np.cos(np.pi * np.arange(n) / (n - 1)))
    t[0], t[-1] = 0.0, 1.0
    return t if include_zero else t[1:]


def _stieltjes_cumtrapz(h, eps):
    out = np.zeros_like(h)
    out[1:] = np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(eps))
    return out


def ebp_exit_curve(k, gamma, grid=None) -> ExitCurve:
    """EBP EXIT curve: every fixed point ``(eps(x), g(x)**k)`` of the DE recursion.

    ``grid`` must lie in (0, 1]; the default is 4000 cosine-spaced points.
    The ``area`` field is the trapezoid value of ``int h d eps`` over the grid.
    """
    EnsembleParams(k, gamma)
    x = cosine_grid(4000) if grid is None else np.asarray(grid, dtype=float)
    if np.any(x <= 0) or np.any(x > 1) or np.any(np.diff(x) <= 0):
        raise DomainError("EBP grid must be strictly increasing inside (0, 1]")
    eps, h = _ebp_coordinates(x, k, gamma)
    area = float(_stieltjes_cumtrapz(h, eps)[-1]) if np.all(np.isfinite(eps)) else math.nan
    i_min = int(np.argmin(eps))
    return ExitCurve(x, eps, clamp_probability(h, "h"), area, k, gamma,
                     markers={"eps_min": float(eps[i_min]), "x_at_eps_min": float(x[i_min])})


def area_threshold(k, gamma, tol=1e-10, n_grid=4000, full_output=False):
    """Area threshold: ``eps(x*)`` where ``int_0^{x*} h d eps`` vanishes.

    The cumulative Stieltjes integral along the EBP curve is accumulated by
    the trapezoid rule on a cosine-spaced grid of ``n_grid`` points and on
    its bisection, combined by one Richardson step; the largest sign change that
    also satisfies the no-revisit condition is polished with Brent's method.
    Values above 1 are clipped to 1.  With ``full_output`` a dict with
    ``x_star``, ``monotone`` and ``clipped`` flags is returned as well.
    """
    EnsembleParams(k, gamma)
    x_fine = cosine_grid(2 * n_grid - 1, include_zero=True)[1:]
    eps_fine, h_fine = _ebp_coordinates(x_fine, k, gamma)
    keep = np.isfinite(eps_fine)
    start = int(np.argmax(keep))
    start += start % 2  # coarse grid is every other fine point
    x_fine, eps_fine, h_fine = x_fine[start:], eps_fine[start:], h_fine[start:]
    fine = _stieltjes_cumtrapz(h_fine, eps_fine)[::2]
    x, eps, h = x_fine[::2], eps_fine[::2], h_fine[::2]
    coarse = _stieltjes_cumtrapz(h, eps)
    # one Richardson step removes the O(step**2) trapezoid error
    cum = (4.0 * fine - coarse) / 3.0
    info = {"x_star": None, "monotone": False, "clipped": False}

    def local_cum(j, xv):
        xs = np.linspace(x[j], xv, 65)
        e, hh = _ebp_coordinates(xs, k, gamma)
        return cum[j] + _stieltjes_cumtrapz(hh, e)[-1]

    crossings = np.nonzero((cum[:-1] < 0) & (cum[1:] >= 0))[0]
    value = None
    for j in crossings[::-1]:
        x_star = optimize.brentq(lambda xv: local_cum(j, xv), x[j], x[j + 1], xtol=tol, rtol=4 * np.finfo(float).eps)
        e_star = float(_ebp_coordinates(x_star, k, gamma)[0])
        beyond = eps[x > x_star]
        if np.all(beyond > e_star - 1e-9):
            info["x_star"] = float(x_star)
            value = e_star
            break
    if value is None:
        if np.all(cum >= 0) and np.all(np.diff(eps) >= -1e-9):
            # EBP curve never turns back; balance holds trivially at x* = 0
            info["monotone"] = True
            info["x_star"] = 0.0
            value = ebp_eps_at_zero(k, gamma)
        elif cum[-1] < 0:
            # balance point lies beyond x = 1 where eps(x) > 1
            value = math.inf
        else:
            raise BracketError(
                f"area threshold root not bracketed for k={k}, gamma={gamma}: "
                f"cumulative area range [{cum.min():.3g}, {cum.max():.3g}], eps range [{eps.min():.3g}, {eps.max():.3g}]"
            )
    if value > 1.0:
        info["clipped"] = True
        value = 1.0
    return (value, info) if full_output else value


class PotentialLandscape:
    """The potential ``U(x; eps)`` on a fixed grid for one ``(k, gamma)``.

    ``U`` is affine in ``eps``: ``U = P(x) - eps * Q(x)`` with
    ``P = x g - int_0^x g`` and ``Q = g**k / k``, so the grid parts are
    precomputed once and reused for every ``eps``.
    """

    def __init__(self, k, gamma, n_grid=2000, quad_tol=1e-10):
        EnsembleParams(k, gamma)
        self.k, self.gamma, self.quad_tol = k, gamma, quad_tol
        self.x = np.linspace(0.0, 1.0, n_grid)
        self.g = _counter_map_raw(self.x, k, gamma)
        pieces = np.zeros(n_grid)
        for j in range(1, n_grid):
            val, err = integrate.quad(_counter_map_raw, self.x[j - 1], self.x[j], args=(k, gamma),
                                      epsabs=1e-16, epsrel=1e-12)
            if err > quad_tol / n_grid:
                raise NumericalError(f"quadrature on [{self.x[j-1]}, {self.x[j]}] error {err:.3g}")
            pieces[j] = val
        self.G = np.cumsum(pieces)
        self.P = self.x * self.g - self.G
        self.Q = self.g ** k / k

    def integral(self, xv):
        j = min(int(np.searchsorted(self.x, xv, side="right")) - 1, len(self.x) - 1)
        if xv == self.x[j]:
            return self.G[j]
        val, err = integrate.quad(_counter_map_raw, self.x[j], xv, args=(self.k, self.gamma),
                                  epsabs=1e-16, epsrel=1e-12)
        return self.G[j] + val

    def __call__(self, xv, eps):
        gx = _g_scalar(xv, self.k, self.gamma)
        return xv * gx - self.integral(xv) - eps * gx ** self.k / self.k

    def values(self, eps):
        return self.P - eps * self.Q

    def nonzero_minimum(self, eps):
        """Minimum of ``U`` over ``x > 0`` and its location (grid search + bounded Brent polish)."""
        vals = self.values(eps)[1:]
        j = int(np.argmin(vals)) + 1
        best_x, best_u = self.x[j], vals[j - 1]
        if 1 < j < len(self.x) - 1:
            res = optimize.minimize_scalar(lambda t: self(t, eps), bounds=(self.x[j - 1], self.x[j + 1]),
                                           method="bounded", options={"xatol": 1e-12})
            if res.fun < best_u:
                best_x, best_u = float(res.x), float(res.fun)
        return best_x, best_u

    def largest_minimizer(self, eps):
        """Largest global minimizer of ``U(.; eps)`` over [0, 1]."""
        xm, um = self.nonzero_minimum(eps)
        return xm if um < 0.0 else 0.0


def potential_threshold(k, gamma, tol=1e-10, n_grid=2000, quad_tol=1e-10):
    """Largest ``eps`` for which ``x = 0`` is the only global minimizer of the potential."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    land = PotentialLandscape(k, gamma, n_grid, quad_tol)
    if land.largest_minimizer(1.0) == 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if land.largest_minimizer(mid) == 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def residual_exit_curve(k, gamma, eps, grid=None, max_iter=DEFAULT_MAX_ITER) -> ExitCurve:
    """EBP EXIT curve of the expected residual graph when peeling stops at ``eps``.

    ``x`` is the largest DE fixed point (reached by iterating from 1). The
    residual counter distribution is ``1 - g(x - z x) / g(x)``.  If ``x`` is
    zero the graph is fully peeled and an empty curve with area 0 is returned.
    """
    params = EnsembleParams(k, gamma, eps)
    fp = de_fixed_point(params, 1.0, max_iter)
    if fp.success:
        empty = np.empty(0)
        return ExitCurve(empty, empty, empty, 0.0, k, gamma, eps, markers={"x_fixed": 0.0})
    x = fp.x_inf
    z = cosine_grid(4000) if grid is None else np.asarray(grid, dtype=float)
    if np.any(z <= 0) or np.any(z > 1) or np.any(np.diff(z) <= 0):
        raise DomainError("residual grid must be strictly increasing inside (0, 1]")
    gx = _g_scalar(x, k, gamma)
    # 1 - rho_tilde(1 - z; x) = g(z x) / g(x)
    ratio = _counter_map_raw(z * x, k, gamma) / gx
    with np.errstate(divide="ignore"):
        eps_t = np.exp(np.log(z) - (k - 1) * np.log(ratio))
    h_t = ratio ** k
    finite = np.isfinite(eps_t)
    area = float(_stieltjes_cumtrapz(h_t[finite], eps_t[finite])[-1]) if finite.sum() > 1 else 0.0
    return ExitCurve(z, eps_t, clamp_probability(h_t, "h"), area, k, gamma, eps,
                     markers={"x_fixed": x})


def residual_rho(z, x, params: EnsembleParams):
    """Residual counter edge distribution ``1 - g(x - z x) / g(x)``."""
    return 1.0 - _counter_map_raw(x - np.asarray(z) * x, params.k, params.gamma) / _g_scalar(x, params.k, params.gamma)
