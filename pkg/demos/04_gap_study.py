"""A small version of the threshold-gap sweep.

For each (k, beta) the gap between the area threshold and the BP threshold
is computed for the uncoupled and a coupled ensemble.  The full sweep is
``counterbraids fig2``; this runs a coarse grid in about a minute.

    python demos/04_gap_study.py
"""
from counterbraids.study import Tolerances, gap_study

tol = Tolerances(coupled=1e-3)
ks, betas = (3, 4), (0.2, 0.4, 0.6, 0.8)
rows = gap_study(ks, betas, N=64, w=4, tol=tol)

print(" k  beta  eps_bp   eps_bp_c  eps_area  modified  gap_unc  gap_cpl")
for r in rows:
    print(f" {r.k}  {r.beta:.1f}   {r.eps_bp:.5f}  {r.eps_bp_coupled:.5f}  {r.eps_area:.5f}  {r.eps_modified:.5f}  "
          f"{r.gap_uncoupled:.5f}  {r.gap_coupled:.5f}")

worst = max(r.gap_coupled - r.gap_uncoupled for r in rows)
print(f"\ncoupled gap never exceeds uncoupled gap: {worst <= 1e-4} (largest excess {worst:+.2e})")
