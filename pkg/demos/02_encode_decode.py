"""Finite-length counter braids: build, encode, decode.

Shows a single-layer braid decoded by message passing and by peeling (they
recover exactly the same flows), the waterfall around the BP threshold, and
a two-layer braid whose first-layer overflows are recovered from layer two.

    python demos/02_encode_decode.py
"""
import numpy as np

from counterbraids import (EnsembleParams, bp_decode, bp_threshold_eps, build_single_layer, build_two_layer, encode,
                           layered_decode, peel_decode, sample_flows)

k, beta, m0 = 3, 0.5, 5000
m1 = int(beta * m0)
gamma = m0 * k / m1
eps_bp = bp_threshold_eps(k, gamma)

graph = build_single_layer(m0, m1, k, seed=1)
params = EnsembleParams(k, gamma, eps=0.25, f_min=1)
flows = sample_flows(m0, params, model="geometric", p=0.3, seed=2)
state = encode(graph, flows)
print(f"{m0} flows, {m1} counters, {np.mean(flows > 1):.3f} of flows above f_min, largest flow {flows.max()}")

bp = bp_decode(graph.first, state.values[0])
peel = peel_decode(graph.first, state.values[0])
print(f"BP:      {bp.converged.sum()} flows converged after {bp.iterations} iterations")
print(f"peeling: {peel.peeled.sum()} flows peeled; same set as BP: {np.array_equal(bp.converged, peel.peeled)}")
print(f"every converged estimate is exact: {np.array_equal(bp.estimates[bp.converged], flows[bp.converged])}")
print(f"residual graph: {len(peel.residual_edges)} edges; unpeeled flows by iteration "
      f"{peel.residual_history[:8]} ...")

print(f"\nwaterfall around eps_bp = {eps_bp:.4f} (20 trials each):")
for eps in np.round(eps_bp + np.array([-0.06, -0.03, 0.0, 0.03, 0.06]), 4):
    ok = 0
    for t in range(20):
        g = build_single_layer(m0, m1, k, seed=[7, t])
        f = sample_flows(m0, params.with_eps(eps), seed=[8, t])
        ok += bp_decode(g.first, encode(g, f).values[0]).all_converged
    print(f"  eps={eps:.4f}: full recovery {ok}/20")

# two layers: 4-bit counters in layer one, overflow counts go to layer two
braid = build_two_layer(2000, 1600, 1400, 3, 3, d1=4, seed=3)
flows = sample_flows(2000, EnsembleParams(3, 3.75, 0.2), model="geometric", p=0.05, seed=4)
state = encode(braid, flows)
res = layered_decode(braid, state)
print(f"\ntwo-layer braid: {len(state.overflow_log)} overflowing layer-1 counters, "
      f"largest flow {flows.max()}, recovered all: {np.array_equal(res.estimates, flows)}")
