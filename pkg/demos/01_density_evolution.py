"""Density evolution for a single-layer counter braid.

Walks through the scalar recursion, the BP threshold, the EBP EXIT curve and
the two independent routes to the area threshold (area under the EBP curve
and the potential function).

    python demos/01_density_evolution.py
"""
import numpy as np

from counterbraids import (EnsembleParams, area_threshold, bp_threshold_beta, bp_threshold_eps, de_fixed_point,
                           ebp_exit_curve, potential_threshold, residual_exit_curve)

k, beta = 3, 0.5
gamma = k / beta
print(f"ensemble: k={k}, beta={beta} counters per flow, mean counter degree gamma={gamma}")

# x is the fraction of flow-to-counter messages still above f_min
for eps in (0.15, 0.25):
    r = de_fixed_point(EnsembleParams(k, gamma, eps), record=True)
    head = r.trajectory[1:6].round(5)
    print(f"eps={eps}: first iterates {head}, limit {r.x_inf:.3g} after {r.iterations} iterations "
          f"({'decodes' if r.success else 'stuck'})")

eps_bp = bp_threshold_eps(k, gamma)
print(f"\nBP threshold eps_bp = {eps_bp:.6f}")
print(f"inverse view: at eps=0.2 BP needs beta >= {bp_threshold_beta(k, 0.2):.4f}")

# the EBP curve traces every fixed point; its leftmost point is the BP threshold
curve = ebp_exit_curve(k, gamma)
print(f"EBP curve: {len(curve)} samples, min eps = {curve.markers['eps_min']:.6f} at x = "
      f"{curve.markers['x_at_eps_min']:.4f}")

eps_area, info = area_threshold(k, gamma, full_output=True)
eps_pot = potential_threshold(k, gamma)
print(f"\narea threshold       = {eps_area:.10f}  (jump at x* = {info['x_star']:.4f})")
print(f"potential threshold  = {eps_pot:.10f}")
print(f"difference           = {abs(eps_area - eps_pot):.1e}")

# the residual graph left by peeling has a zero-area EXIT curve exactly at the area threshold
for eps in (eps_area, eps_area + 0.05):
    print(f"residual EXIT area at eps={eps:.4f}: {residual_exit_curve(k, gamma, eps).area:+.2e}")

print("\n k   beta   eps_bp    eps_area  gap")
for kk in (3, 4, 5):
    for b in np.arange(0.2, 1.0, 0.2):
        g = kk / b
        e_bp, e_a = bp_threshold_eps(kk, g), area_threshold(kk, g)
        print(f" {kk}   {b:.1f}   {e_bp:.5f}   {e_a:.5f}   {e_a - e_bp:.5f}")
