"""Threshold sweeps over ``(k, beta)`` grids: the gap between BP and area thresholds."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .coupled import DEFAULT_MAX_SWEEPS, coupled_threshold, modified_threshold
from .uncoupled import area_threshold, bp_threshold_eps, potential_threshold

log = logging.getLogger(__name__)

FULL_BETAS = tuple(round(0.05 * i, 2) for i in range(1, 20))
FULL_KS = (3, 4, 5)
FULL_LAYOUTS = ((1, 1), (128, 5))
SMOKE_BETAS = (0.25, 0.5, 0.75)
SMOKE_KS = (3,)
SMOKE_LAYOUTS = ((1, 1), (32, 3))

REPORT_COLUMNS = ("k", "beta", "N", "w", "eps_bp", "eps_bp_coupled", "eps_area", "eps_potential",
                  "eps_modified", "gap_uncoupled", "gap_coupled")


@dataclass
class Tolerances:
    bp: float = 1e-6
    coupled: float = 1e-4
    area: float = 1e-10
    potential: float = 1e-10
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    @classmethod
    def smoke(cls):
        return cls(bp=1e-5, coupled=1e-3, area=1e-8, potential=1e-8, max_sweeps=2_000)


@dataclass
class ThresholdReport:
    k: int
    beta: float
    N: int
    w: int
    eps_bp: float = float("nan")
    eps_bp_coupled: float = float("nan")
    eps_area: float = float("nan")
    eps_potential: float = float("nan")
    eps_modified: float = float("nan")
    error: str | None = None
    area_info: dict = field(default_factory=dict)

    @property
    def gap_uncoupled(self) -> float:
        return self.eps_area - self.eps_bp

    @property
    def gap_coupled(self) -> float:
        return self.eps_area - self.eps_bp_coupled

    def as_row(self) -> dict:
        row = {c: getattr(self, c) for c in REPORT_COLUMNS}
        row["error"] = self.error or ""
        return row

    def as_json(self) -> dict:
        d = asdict(self)
        d["gamma"] = self.k / self.beta
        d["gap_uncoupled"] = self.gap_uncoupled
        d["gap_coupled"] = self.gap_coupled
        return d


def threshold_cell(k, beta, N, w, tol: Tolerances | None = None, which=None) -> ThresholdReport:
    """Compute the requested thresholds for one ``(k, beta, N, w)`` cell.

    ``which`` is a subset of ``{"bp", "area", "potential", "coupled", "modified"}``
    (default: all).  Failures are recorded in ``error`` instead of raised.
    """
    tol = tol or Tolerances()
    which = set(which or ("bp", "area", "potential", "coupled", "modified"))
    gamma = k / beta
    rep = ThresholdReport(k, beta, N, w)
    try:
        if "bp" in which or (N, w) == (1, 1):
            rep.eps_bp = bp_threshold_eps(k, gamma, tol.bp)
        if "area" in which:
            rep.eps_area, rep.area_info = area_threshold(k, gamma, tol.area, full_output=True)
        if "potential" in which:
            rep.eps_potential = potential_threshold(k, gamma, tol.potential)
        if (N, w) == (1, 1):
            # one position, no coupling: both coupled recursions are the scalar one
            if "coupled" in which:
                rep.eps_bp_coupled = rep.eps_bp
            if "modified" in which:
                rep.eps_modified = rep.eps_bp
        else:
            if "coupled" in which:
                rep.eps_bp_coupled = coupled_threshold(k, gamma, N, w, tol.coupled, tol.max_sweeps)
            if "modified" in which:
                rep.eps_modified = modified_threshold(k, gamma, N, w, tol.coupled, tol.max_sweeps)
    except Exception as exc:  # noqa: BLE001 - sweep keeps going, failure lands in the row
        log.warning("cell k=%s beta=%s N=%s w=%s failed: %s", k, beta, N, w, exc)
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


def _cell_args(args):
    return threshold_cell(*args)


def default_workers():
    return int(os.environ.get("CB_WORKERS", "1"))


def gap_study(ks=FULL_KS, betas=FULL_BETAS, N=128, w=5, tol: Tolerances | None = None, workers=None):
    """Run :func:`threshold_cell` over the grid; rows come back in grid order."""
    tol = tol or Tolerances()
    betas = [float(b) for b in betas]
    if any(not 0 < b < 1 for b in betas):
        raise ValueError("beta grid must lie inside (0, 1)")
    cells = [(int(k), b, int(N), int(w), tol) for k in ks for b in betas]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell_args, cells))
    out = []
    for cell in cells:
        out.append(threshold_cell(*cell))
        log.info("k=%d beta=%.2f N=%d w=%d done", *cell[:4])
    return out


def check_gap_rows(rows, tol=1e-4):
    """Violations of ``0 <= gap_coupled <= gap_uncoupled`` (each within ``tol``)."""
    bad = []
    for r in rows:
        if r.error:
            continue
        if not (r.gap_coupled >= -tol and r.gap_coupled <= r.gap_uncoupled + tol and r.gap_uncoupled >= -tol):
            bad.append(r)
    return bad
