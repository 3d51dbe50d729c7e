"""Message-passing and peeling decoders for counter braids.

The BP decoder alternates a counter update

    psi(c -> f) = max(phi(c) - sum_{f' != f} mu(f' -> c), f_min)

with a flow update that takes the minimum (odd iterations) or maximum
(even iterations) of the incoming ``psi`` over the other neighbours.  Odd
iterations produce upper bounds on every flow, even ones lower bounds; a
flow has converged when both coincide.

The decoder halts once the flow-to-counter messages repeat with period two,
after which every estimate is periodic as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConsistencyError, DomainError
from .graph import BraidGraph, CounterState, LayerGraph

DEFAULT_MAX_ITER = 200


@dataclass
class DecodeResult:
    """Outcome of decoding one layer.

    ``estimates`` holds the final-iteration estimate of every flow;
    ``converged`` flags flows whose estimates at the last two iterations
    agree (upper bound equals lower bound).  For the peeling decoder
    ``peeled`` marks removed flows and ``residual_edges`` / ``residual_counters``
    describe the graph left when no rule fires any more.
    """

    estimates: np.ndarray
    converged: np.ndarray
    iterations: int
    upper: np.ndarray | None = None
    lower: np.ndarray | None = None
    peeled: np.ndarray | None = None
    residual_edges: np.ndarray | None = None
    residual_counters: np.ndarray | None = None
    residual_history: list = field(default_factory=list)
    layer_results: list = field(default_factory=list)

    @property
    def oscillating(self) -> np.ndarray:
        return ~self.converged

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())


def _extrinsic(psi, k, use_min):
    """For each edge, min (or max) of ``psi`` over the other edges of the same flow."""
    rows = psi.reshape(-1, k)
    if k == 1:
        # a degree-one flow has no other neighbours; pass the message through
        return psi.copy(), rows[:, 0].copy()
    if not use_min:
        rows = -rows
    order = np.argsort(rows, axis=1, kind="stable")[:, :2]
    r = np.arange(rows.shape[0])
    best = rows[r, order[:, 0]]
    second = rows[r, order[:, 1]]
    out = np.repeat(best[:, None], k, axis=1)
    out[r, order[:, 0]] = second
    if not use_min:
        out, best = -out, -best
    return out.ravel(), best


def _as_message_array(values, f_min):
    values = np.asarray(values)
    if np.issubdtype(values.dtype, np.integer) and float(f_min).is_integer():
        return values.astype(np.int64), int(f_min)
    return values.astype(float), float(f_min)


def _counter_sums(ec, mu, n_counters):
    if mu.dtype.kind == "i":
        out = np.zeros(n_counters, dtype=np.int64)
        np.add.at(out, ec, mu)
        return out
    return np.bincount(ec, weights=mu, minlength=n_counters)


def bp_decode(graph: LayerGraph, counters, f_min=1, max_iter=DEFAULT_MAX_ITER) -> DecodeResult:
    """Decode one layer with the min/max message-passing rules."""
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    phi, f_min = _as_message_array(counters, f_min)
    if phi.shape != (graph.n_counters,):
        raise DomainError(f"expected {graph.n_counters} counter values, got {phi.shape}")
    ec, k = graph.edge_counter, graph.k
    mu = np.full(graph.n_edges, f_min, dtype=phi.dtype)
    mu_hist = [None, mu]  # messages from iterations l-2 and l-1
    est_prev = est = None
    upper = lower = None
    ell = 0
    for ell in range(1, max_iter + 1):
        sums = _counter_sums(ec, mu, graph.n_counters)
        psi = np.maximum(phi[ec] - (sums[ec] - mu), f_min)
        odd = ell % 2 == 1
        mu, est_new = _extrinsic(psi, k, use_min=odd)
        est_prev, est = est, est_new
        if odd:
            upper = est
        else:
            lower = est
        if mu_hist[0] is not None and np.array_equal(mu, mu_hist[0]):
            break
        mu_hist = [mu_hist[1], mu]
    converged = np.zeros(graph.n_flows, dtype=bool) if est_prev is None else est == est_prev
    return DecodeResult(est, converged, ell, upper, lower)


def peel_decode(graph: LayerGraph, counters, f_min=1, max_iter=DEFAULT_MAX_ITER) -> DecodeResult:
    """BP decoding with flows removed from the graph as soon as they are determined.

    Rule 1: a counter with exactly one remaining edge (parallel edges counted)
    fixes its flow to the counter value.  Rule 2 (odd iterations only): a
    counter-to-flow message equal to ``f_min`` fixes that flow to ``f_min``.
    Removed flows are subtracted from all their counters.  Rule 1 is run to a
    fixpoint before each BP iteration.
    """
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    phi, f_min = _as_message_array(counters, f_min)
    phi = phi.copy()
    if phi.shape != (graph.n_counters,):
        raise DomainError(f"expected {graph.n_counters} counter values, got {phi.shape}")
    ec, k, m0 = graph.edge_counter, graph.k, graph.n_flows
    alive = np.ones(m0, dtype=bool)
    value = np.zeros(m0, dtype=phi.dtype)
    mu = np.full(graph.n_edges, f_min, dtype=phi.dtype)
    est = np.full(m0, f_min, dtype=phi.dtype)
    upper, lower = est.copy(), est.copy()
    history = [int(alive.sum())]

    def remove(flows, sizes):
        alive[flows] = False
        value[flows] = sizes
        edges = (flows[:, None] * k + np.arange(k)).ravel()
        np.subtract.at(phi, ec[edges], np.repeat(sizes, k))
        if (phi < 0).any():
            raise ConsistencyError("a counter went negative while peeling; counters are inconsistent with the graph")

    mu_hist = [None, mu]  # messages from iterations l-2 and l-1
    last_change = 0
    ell = 0
    for ell in range(1, max_iter + 1):
        while True:
            edge_alive = np.repeat(alive, k)
            deg = np.bincount(ec[edge_alive], minlength=graph.n_counters)
            e_idx = np.nonzero(edge_alive & (deg[ec] == 1))[0]
            if len(e_idx) == 0:
                break
            flows, first = np.unique(e_idx // k, return_index=True)
            remove(flows, phi[ec[e_idx[first]]])
            last_change = ell
        edge_alive = np.repeat(alive, k)
        mu_live = np.where(edge_alive, mu, 0)
        sums = _counter_sums(ec, mu_live, graph.n_counters)
        psi = np.maximum(phi[ec] - (sums[ec] - mu_live), f_min)
        odd = ell % 2 == 1
        if odd:
            flows = np.unique(np.nonzero((psi == f_min) & edge_alive)[0] // k)
            if len(flows):
                remove(flows, np.full(len(flows), f_min, dtype=phi.dtype))
                last_change = ell
        mu_new, est_new = _extrinsic(psi, k, use_min=odd)
        mu = np.where(np.repeat(alive, k), mu_new, f_min)
        est = np.where(alive, est_new, value)
        if odd:
            upper = est
        else:
            lower = est
        history.append(int(alive.sum()))
        if not alive.any():
            break
        # nothing removed for two iterations and messages periodic: state repeats forever
        if last_change < ell - 1 and mu_hist[0] is not None and np.array_equal(mu, mu_hist[0]):
            break
        mu_hist = [mu_hist[1], mu]
    peeled = ~alive
    residual_edges = np.nonzero(np.repeat(alive, k))[0]
    return DecodeResult(np.where(peeled, value, est), peeled, ell, upper, lower, peeled,
                        residual_edges, phi, history)


def layered_decode(braid: BraidGraph, state: CounterState, f_min=1, max_iter=DEFAULT_MAX_ITER) -> DecodeResult:
    """Decode from the top layer down, shifting each decoded overflow count into the layer below.

    Flows above the first layer count overflows, so their minimum size is 0.
    Returns the first-layer result; per-layer results (top layer first) are
    kept in ``layer_results``.
    """
    L = braid.n_layers
    values = [np.array(v, dtype=np.int64) for v in state.values]
    if len(values) != L:
        raise DomainError(f"expected counter values for {L} layers, got {len(values)}")
    results = []
    for l in range(L - 1, 0, -1):
        res = bp_decode(braid.layers[l], values[l], 0, max_iter)
        results.append(res)
        xi = braid.mappings[l - 1]
        values[l - 1][xi] = res.estimates * (np.int64(1) << braid.depths[l - 1]) + values[l - 1][xi]
    res = bp_decode(braid.layers[0], values[0], f_min, max_iter)
    res.layer_results = results + [res]
    return res
