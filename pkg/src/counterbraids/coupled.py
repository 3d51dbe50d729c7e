"""Density evolution for spatially-coupled counter braids.

Two coupled recursions are provided:

* the standard one obtained by coupling the braid graph, in which the
  band-averaging matrix ``A`` (``A[p, q] = 1/w`` for ``0 <= q - p < w``)
  appears in all four half-steps of a two-iteration round, and
* a modified two-step recursion in which positions are averaged only in the
  counter update of odd iterations and the flow update of even iterations.

All step functions accept arrays of shape ``(..., M)`` so that many values
of ``eps`` can be run side by side (``eps`` then has shape ``(..., 1)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degree_model import EnsembleParams
from .exceptions import DomainError
from .uncoupled import ZERO_TOL

DEFAULT_MAX_SWEEPS = 20_000
STALL_TOL = 1e-12
NEAR_THRESHOLD_FACTOR = 10


@dataclass(frozen=True)
class CouplingMatrix:
    """Band matrix of shape ``(N, M)`` with ``M = N + w - 1``, stored implicitly."""

    N: int
    w: int

    def __post_init__(self):
        if self.N < 1 or self.w < 1 or self.w > self.N + 1:
            raise DomainError(f"need N >= 1 and 1 <= w <= N + 1, got N={self.N}, w={self.w}")

    @property
    def M(self) -> int:
        return self.N + self.w - 1

    def dense(self) -> np.ndarray:
        A = np.zeros((self.N, self.M))
        for p in range(self.N):
            A[p, p:p + self.w] = 1.0 / self.w
        return A

    def forward(self, v):
        """``(A v)_p = (1/w) sum_{q=p}^{p+w-1} v_q`` for a length-``M`` vector; returns length ``N``."""
        out = v[..., 0:self.N].copy()
        for j in range(1, self.w):
            out += v[..., j:j + self.N]
        return out / self.w

    def backward(self, u):
        """``(A^T u)_q = (1/w) sum_{p=q-w+1}^{q} u_p`` for a length-``N`` vector; returns length ``M``."""
        pad = np.zeros(u.shape[:-1] + (self.M + self.w - 1,))
        pad[..., self.w - 1:self.w - 1 + self.N] = u
        out = pad[..., 0:self.M].copy()
        for j in range(1, self.w):
            out += pad[..., j:j + self.M]
        return out / self.w


@dataclass
class CoupledState:
    """DE state over coupling positions.

    ``x`` has length ``M``; ``y`` is only used by the modified recursion.
    ``iteration`` counts half-iterations for the modified recursion and
    full rounds for the standard one.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    iteration: int = 0

    @classmethod
    def initial(cls, N, w, batch_shape=()):
        """Interior positions start at 1, the ``w - 1`` trailing positions at 0."""
        M = N + w - 1
        x = np.zeros(tuple(batch_shape) + (M,))
        x[..., :N] = 1.0
        return cls(x, np.zeros_like(x), 0)


def _one_minus_rho_one_minus(x, gamma):
    return -np.expm1(-gamma * x)


def _standard_round(x, k, gamma, eps, A: CouplingMatrix):
    inner = A.forward(_one_minus_rho_one_minus(x, gamma))
    t = _one_minus_rho_one_minus(A.backward(inner ** (k - 1)), gamma)
    s = A.forward(t)
    return eps * A.backward(s ** (k - 1))


def coupled_de_step(x, params: EnsembleParams, N, w, eps=None):
    """One round of the standard coupled recursion, applied to every position.

    ``eps`` overrides ``params.eps`` and may be an array broadcasting against
    ``x[..., :1]``.
    """
    A = CouplingMatrix(N, w)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != A.M:
        raise DomainError(f"state length {x.shape[-1]} does not match M={A.M}")
    return _standard_round(x, params.k, params.gamma, params.eps if eps is None else eps, A)


def coupled_de_step_naive(x, params: EnsembleParams, N, w):
    """Direct quadruple-sum transcription of the coupled recursion (test oracle)."""
    A = CouplingMatrix(N, w).dense()
    M = N + w - 1
    k, gamma, eps = params.k, params.gamma, params.eps
    rho = lambda z: math.exp(-gamma * (1.0 - z))
    out = np.zeros(M)
    for i in range(M):
        total_g = 0.0
        for g in range(N):
            if A[g, i] == 0.0:
                continue
            total_h = 0.0
            for h in range(M):
                if A[g, h] == 0.0:
                    continue
                total_p = 0.0
                for p in range(N):
                    if A[p, h] == 0.0:
                        continue
                    total_q = 0.0
                    for q in range(M):
                        total_q += A[p, q] * (1.0 - rho(1.0 - x[q]))
                    total_p += A[p, h] * total_q ** (k - 1)
                total_h += A[g, h] * (1.0 - rho(1.0 - total_p))
            total_g += A[g, i] * total_h ** (k - 1)
        out[i] = eps * total_g
    return out


def _window_back(x, w):
    # (1/w) sum_{j=0}^{min(i, w-1)} x_{i-j}  (0-based i)
    out = x.copy()
    for j in range(1, w):
        out[..., j:] += x[..., :-j]
    return out / w


def _window_forward(y, w):
    # (1/w) sum_{j=0}^{min(M-1-i, w-1)} y_{i+j}  (0-based i)
    out = y.copy()
    for j in range(1, w):
        out[..., :-j] += y[..., j:]
    return out / w


def modified_coupled_de_step(state: CoupledState, params: EnsembleParams, N, w, eps=None) -> CoupledState:
    """Advance the modified recursion by one half-iteration (parity from ``state.iteration + 1``)."""
    M = N + w - 1
    x = np.asarray(state.x, dtype=float)
    if x.shape[-1] != M:
        raise DomainError(f"state length {x.shape[-1]} does not match M={M}")
    k, gamma = params.k, params.gamma
    eps = params.eps if eps is None else eps
    ell = state.iteration + 1
    if ell % 2 == 1:
        y = _one_minus_rho_one_minus(_window_back(x, w), gamma)
        x_new = y ** (k - 1)
    else:
        y = _one_minus_rho_one_minus(x, gamma)
        x_new = eps * _window_forward(y, w) ** (k - 1)
    return CoupledState(x_new, y, ell)


def modified_coupled_de_step_naive(state: CoupledState, params: EnsembleParams, N, w) -> CoupledState:
    """Straight transcription of the modified half-step with 1-based loops (test oracle)."""
    M = N + w - 1
    k, gamma, eps = params.k, params.gamma, params.eps
    rho = lambda z: math.exp(-gamma * (1.0 - z))
    x_old = [None] + list(state.x)
    ell = state.iteration + 1
    x_new, y_new = np.zeros(M), np.zeros(M)
    y = [None] * (M + 1)
    for i in range(1, M + 1):
        if ell % 2 == 1:
            avg = sum(x_old[i - j] for j in range(0, min(i - 1, w - 1) + 1)) / w
            y[i] = 1.0 - rho(1.0 - avg)
        else:
            y[i] = 1.0 - rho(1.0 - x_old[i])
    for i in range(1, M + 1):
        if ell % 2 == 1:
            x_new[i - 1] = y[i] ** (k - 1)
        else:
            avg = sum(y[i + j] for j in range(0, min(M - i, w - 1) + 1)) / w
            x_new[i - 1] = eps * avg ** (k - 1)
        y_new[i - 1] = y[i]
    return CoupledState(x_new, y_new, ell)


def _modified_round(x, k, gamma, eps, w):
    y = _one_minus_rho_one_minus(_window_back(x, w), gamma)
    x = y ** (k - 1)
    y = _one_minus_rho_one_minus(x, gamma)
    return eps * _window_forward(y, w) ** (k - 1)


def run_coupled(params: EnsembleParams, N, w, eps=None, max_sweeps=DEFAULT_MAX_SWEEPS,
                modified=False, stall_tol=STALL_TOL, extension=NEAR_THRESHOLD_FACTOR):
    """Run coupled DE from the worst-case start for one or many ``eps``.

    Returns ``(success, x_final, sweeps)`` where ``success`` is a boolean
    array (``max_i x_i < 1e-10``) with one entry per ``eps``.  A sweep is
    one full round (two half-iterations).  Members stop being updated once
    they succeed or their sup-norm change falls below ``stall_tol``.
    Members still moving after ``max_sweeps`` are near threshold and may
    continue up to ``extension * max_sweeps`` sweeps; whatever is left
    undecided then counts as a failure.
    """
    eps = np.atleast_1d(np.asarray(params.eps if eps is None else eps, dtype=float)).ravel()
    if np.any(eps < 0) or np.any(eps > 1):
        raise DomainError("eps must lie in [0, 1]")
    A = CouplingMatrix(N, w)
    k, gamma = params.k, params.gamma
    x_final = CoupledState.initial(N, w, eps.shape).x
    success = np.zeros(eps.shape, dtype=bool)
    idx = np.arange(len(eps))
    x, e = x_final.copy(), eps[:, None]
    sweeps = 0
    for sweeps in range(1, max_sweeps * extension + 1):
        new = _modified_round(x, k, gamma, e, w) if modified else _standard_round(x, k, gamma, e, A)
        done = new.max(axis=-1) < ZERO_TOL
        stalled = np.abs(new - x).max(axis=-1) < stall_tol
        x = new
        finished = done | stalled
        if finished.any():
            x_final[idx[finished]] = x[finished]
            success[idx[done]] = True
            keep = ~finished
            idx, x, e = idx[keep], x[keep], e[keep]
            if len(idx) == 0:
                break
    x_final[idx] = x
    return success, x_final, sweeps


def _threshold_search(params, N, w, tol_eps, max_sweeps, modified, points=15):
    # multisection: each round evaluates `points` interior eps values in one batch
    lo, hi = 0.0, 1.0
    ok, _, _ = run_coupled(params, N, w, 1.0, max_sweeps, modified)
    if ok[0]:
        return 1.0
    while hi - lo > tol_eps:
        n = int(min(points, max(1, math.ceil((hi - lo) / tol_eps) - 1)))
        grid = lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)
        ok, _, _ = run_coupled(params, N, w, grid, max_sweeps, modified)
        # success is monotone in eps; trust the first failure
        fails = np.nonzero(~ok)[0]
        first_fail = fails[0] if len(fails) else n
        new_lo = grid[first_fail - 1] if first_fail > 0 else lo
        new_hi = grid[first_fail] if first_fail < n else hi
        lo, hi = new_lo, new_hi
    return 0.5 * (lo + hi)


def coupled_threshold(k, gamma, N, w, tol_eps=1e-4, max_sweeps=DEFAULT_MAX_SWEEPS):
    """BP threshold of the coupled ensemble: largest ``eps`` whose coupled DE reaches zero."""
    if not tol_eps > 0:
        raise DomainError("tol_eps must be positive")
    return _threshold_search(EnsembleParams(k, gamma), N, w, tol_eps, max_sweeps, modified=False)


def modified_threshold(k, gamma, N, w, tol_eps=1e-4, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Threshold of the modified two-step coupled recursion."""
    if not tol_eps > 0:
        raise DomainError("tol_eps must be positive")
    return _threshold_search(EnsembleParams(k, gamma), N, w, tol_eps, max_sweeps, modified=True)
