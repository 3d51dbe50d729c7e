"""Spatially coupled density evolution.

Coupling N positions with window w improves the BP threshold, but for counter
braids the standard coupled recursion stops short of the area threshold.  A
modified two-step recursion, averaging only where it keeps the potential
structure, does reach it.

    python demos/03_spatial_coupling.py
"""
import numpy as np

from counterbraids import (CoupledState, EnsembleParams, area_threshold, bp_threshold_eps, coupled_de_step,
                           coupled_threshold, modified_threshold, run_coupled)

k, beta = 3, 0.5
gamma = k / beta
N, w = 64, 4
params = EnsembleParams(k, gamma)

eps_bp, eps_area = bp_threshold_eps(k, gamma), area_threshold(k, gamma)
print(f"uncoupled: eps_bp={eps_bp:.5f}, area threshold={eps_area:.5f}")

# a decoding wave: the boundary is pinned at zero and the zero region eats inward
x = CoupledState.initial(N, w).x
for sweep in range(1, 121):
    x = coupled_de_step(x, params, N, w, eps=0.22)
    if sweep in (10, 40, 80, 120):
        print(f"sweep {sweep:4d}: positions below 1e-6: {np.count_nonzero(x < 1e-6):3d} of {x.size}")

ok, _, sweeps = run_coupled(params, N, w, eps=[0.20, 0.22, 0.24])
print(f"eps 0.20/0.22/0.24 decode: {ok.tolist()} (longest run {sweeps} sweeps)")

for NN, ww in ((32, 2), (64, 4), (128, 5)):
    c = coupled_threshold(k, gamma, NN, ww)
    m = modified_threshold(k, gamma, NN, ww)
    print(f"N={NN:3d} w={ww}: coupled {c:.5f} (gap {eps_area - c:.5f}), modified {m:.5f} (gap {eps_area - m:+.5f})")
