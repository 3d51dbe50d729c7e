"""Finite counter braid graphs, synthetic flows and encoding.

Graphs follow the configuration model: every flow node owns ``k`` edge
sockets and each socket is attached to a counter drawn uniformly at random,
so counter degrees are multinomial (Poisson in the limit) and parallel
edges between a flow and a counter are allowed.  All randomness comes from
``numpy.random.default_rng(seed)`` (PCG64), which is reproducible across
platforms for a fixed numpy version.

Positions of coupled layouts are 1-based, as in the DE recursions: flow
positions ``1..N`` and counter positions ``1..N+w-1``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .degree_model import EnsembleParams
from .exceptions import CapacityError, DomainError

DEFAULT_DEPTH = 32


@dataclass(frozen=True)
class LayerGraph:
    """One bipartite layer.  Edges are stored flow-major: edge ``f*k + j`` is socket ``j`` of flow ``f``."""

    n_flows: int
    n_counters: int
    k: int
    edge_counter: np.ndarray

    def __post_init__(self):
        ec = np.asarray(self.edge_counter, dtype=np.int64)
        if self.n_flows < 1 or self.n_counters < 1 or self.k < 1:
            raise DomainError("a layer needs at least one flow, one counter and degree >= 1")
        if ec.shape != (self.n_flows * self.k,):
            raise DomainError(f"expected {self.n_flows * self.k} edges, got {ec.shape}")
        if ec.size and (ec.min() < 0 or ec.max() >= self.n_counters):
            raise DomainError("edge counter index out of range")
        ec.setflags(write=False)
        object.__setattr__(self, "edge_counter", ec)

    @classmethod
    def from_neighbors(cls, neighbors, n_counters):
        """Build from a per-flow list of counter indices (all lists of equal length)."""
        k = len(neighbors[0])
        if any(len(nb) != k for nb in neighbors):
            raise DomainError("all flows must have the same degree")
        return cls(len(neighbors), n_counters, k, np.array(neighbors, dtype=np.int64).ravel())

    @property
    def n_edges(self) -> int:
        return self.n_flows * self.k

    @property
    def edge_flow(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_flows), self.k)

    def counter_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_counter, minlength=self.n_counters)

    def flow_neighbors(self, f) -> np.ndarray:
        return self.edge_counter[f * self.k:(f + 1) * self.k]

    def counter_neighbors(self, c) -> np.ndarray:
        """Flows adjacent to counter ``c``, repeated once per parallel edge."""
        return np.nonzero(self.edge_counter == c)[0] // self.k

    @property
    def gamma(self) -> float:
        return self.n_edges / self.n_counters


@dataclass(frozen=True)
class CoupledLayout:
    N: int
    w: int
    kappa: int
    counters_per_position: int

    @property
    def M(self) -> int:
        return self.N + self.w - 1

    def flow_position(self, flows) -> np.ndarray:
        return np.asarray(flows) // self.kappa + 1

    def counter_position(self, counters) -> np.ndarray:
        return np.asarray(counters) // self.counters_per_position + 1


@dataclass(frozen=True)
class BraidGraph:
    """A (possibly multi-layer, possibly coupled) counter braid.

    ``mappings[l - 2]`` sends flow ``f`` of layer ``l`` to counter
    ``mappings[l - 2][f]`` of layer ``l - 1`` and must be a bijection.
    """

    layers: tuple
    depths: tuple
    mappings: tuple = ()
    layout: CoupledLayout | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        maps = tuple(np.asarray(m, dtype=np.int64) for m in self.mappings)
        object.__setattr__(self, "mappings", maps)
        L = len(self.layers)
        if L < 1 or len(self.depths) != L or len(maps) != L - 1:
            raise DomainError("need one depth per layer and one mapping per layer above the first")
        if any(d < 1 for d in self.depths):
            raise DomainError("counter depths must be at least one bit")
        for l in range(1, L):
            lower, upper, xi = self.layers[l - 1], self.layers[l], maps[l - 1]
            if upper.n_flows != lower.n_counters:
                raise DomainError(f"layer {l + 1} must have one flow per counter of layer {l}")
            if xi.shape != (upper.n_flows,) or not np.array_equal(np.sort(xi), np.arange(lower.n_counters)):
                raise DomainError(f"mapping into layer {l} is not a bijection")
            xi.setflags(write=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def first(self) -> LayerGraph:
        return self.layers[0]


@dataclass
class CounterState:
    """Counter values per layer plus the log of overflow events ``(layer, counter, count)``."""

    values: list
    overflow_log: list = field(default_factory=list)


def _rng(seed):
    return np.random.default_rng(seed)


def build_single_layer(m0, m1, k, seed=None, depth=DEFAULT_DEPTH) -> BraidGraph:
    """Random left-regular layer with ``m0`` flows of degree ``k`` and ``m1`` counters."""
    if m0 < 1 or m1 < 1:
        raise DomainError("m0 and m1 must be positive")
    if k < 1:
        raise DomainError("k must be positive")
    counters = _rng(seed).integers(0, m1, size=m0 * k)
    return BraidGraph((LayerGraph(m0, m1, k, counters),), (depth,))


def build_two_layer(m0, m1, m2, k1, k2, d1, d2=DEFAULT_DEPTH, seed=None) -> BraidGraph:
    """Two-layer braid; layer-2 flows are the layer-1 counters under a random bijection."""
    if min(m0, m1, m2) < 1:
        raise DomainError("layer sizes must be positive")
    rng = _rng(seed)
    layer1 = LayerGraph(m0, m1, k1, rng.integers(0, m1, size=m0 * k1))
    layer2 = LayerGraph(m1, m2, k2, rng.integers(0, m2, size=m1 * k2))
    return BraidGraph((layer1, layer2), (d1, d2), (rng.permutation(m1),))


def build_coupled(kappa, params: EnsembleParams, N, w, seed=None, depth=DEFAULT_DEPTH) -> BraidGraph:
    """Spatially coupled braid with ``N`` flow positions of ``kappa`` flows each.

    The ``kappa * k`` sockets at each flow position are split by a uniform
    random permutation into ``w`` equal subgroups; subgroup ``i`` at flow
    position ``n`` is wired to counters at position ``n + i``.  Each of the
    ``M = N + w - 1`` counter positions holds ``kappa * k / gamma`` counters.
    Counter sockets that no flow socket reaches are simply absent.
    """
    k, gamma = params.k, params.gamma
    if kappa < 1 or N < 1:
        raise DomainError("kappa and N must be positive")
    if not 1 <= w <= N + 1:
        raise DomainError(f"need 1 <= w <= N + 1, got w={w}")
    if (kappa * k) % w:
        raise DomainError(f"kappa*k = {kappa * k} is not divisible by w = {w}")
    per_pos = kappa * k / gamma
    if abs(per_pos - round(per_pos)) > 1e-9 or round(per_pos) < 1:
        raise DomainError(f"counters per position kappa*k/gamma = {per_pos} is not a positive integer")
    per_pos = int(round(per_pos))
    rng = _rng(seed)
    sockets = kappa * k
    sub = sockets // w
    M = N + w - 1
    edge_counter = np.empty(N * sockets, dtype=np.int64)
    for n in range(N):
        subgroup = np.empty(sockets, dtype=np.int64)
        subgroup[rng.permutation(sockets)] = np.arange(sockets) // sub
        cpos = n + subgroup  # 0-based counter position
        edge_counter[n * sockets:(n + 1) * sockets] = cpos * per_pos + rng.integers(0, per_pos, size=sockets)
    layer = LayerGraph(N * kappa, M * per_pos, k, edge_counter)
    return BraidGraph((layer,), (depth,), layout=CoupledLayout(N, w, kappa, per_pos))


def sample_flows(m0, params: EnsembleParams, model="two-point", p=0.5, seed=None) -> np.ndarray:
    """Draw ``m0`` flow sizes; each exceeds ``f_min`` with probability ``eps``.

    ``two-point``: exceeding flows have size ``f_min + 1``.
    ``geometric``: exceeding flows have size ``f_min + G`` with ``G ~ Geometric(p)`` on ``{1, 2, ...}``.
    """
    if m0 < 0:
        raise DomainError("m0 must be nonnegative")
    rng = _rng(seed)
    exceed = rng.random(m0) < params.eps
    if model == "two-point":
        extra = np.ones(m0, dtype=np.int64)
    elif model == "geometric":
        if not 0 < p <= 1:
            raise DomainError(f"geometric tail needs 0 < p <= 1, got {p}")
        extra = rng.geometric(p, size=m0).astype(np.int64)
    else:
        raise DomainError(f"unknown flow-size model {model!r}")
    return params.f_min + np.where(exceed, extra, 0)


def encode(graph: BraidGraph, flows) -> CounterState:
    """Count every flow into the braid, cascading overflows to upper layers.

    Each counter of layer ``l`` keeps its total modulo ``2**d_l``; the number
    of wrap-arounds becomes the size of the mapped flow of layer ``l + 1``.
    """
    sizes = np.asarray(flows, dtype=np.int64)
    if sizes.shape != (graph.first.n_flows,):
        raise DomainError(f"expected {graph.first.n_flows} flow sizes, got {sizes.shape}")
    if np.any(sizes < 0):
        raise DomainError("flow sizes must be nonnegative")
    values, log = [], []
    for l, (layer, depth) in enumerate(zip(graph.layers, graph.depths)):
        totals = np.zeros(layer.n_counters, dtype=np.int64)
        np.add.at(totals, layer.edge_counter, np.repeat(sizes, layer.k))
        wraps, residue = np.divmod(totals, np.int64(1) << depth)
        values.append(residue)
        for c in np.nonzero(wraps)[0]:
            log.append((l + 1, int(c), int(wraps[c])))
        if l + 1 < graph.n_layers:
            sizes = wraps[graph.mappings[l]]
        elif wraps.any():
            raise CapacityError(f"{int(np.count_nonzero(wraps))} counters overflowed in the last layer")
    return CounterState(values, log)


def write_graph(graph: BraidGraph, dest):
    """Serialize ``graph`` to the line-oriented text format (path or text stream)."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w") as fh:
            return write_graph(graph, fh)
    first = graph.first
    dest.write(f"cb {graph.n_layers} {first.k} {first.n_flows} {first.n_counters} "
               + " ".join(str(d) for d in graph.depths) + "\n")
    for l, layer in enumerate(graph.layers[1:], start=2):
        dest.write(f"layer {l} {layer.k} {layer.n_counters}\n")
    if graph.layout is not None:
        lo = graph.layout
        dest.write(f"layout {lo.N} {lo.w} {lo.kappa} {lo.counters_per_position}\n")
    for l, layer in enumerate(graph.layers, start=1):
        for e, c in enumerate(layer.edge_counter):
            dest.write(f"e {l} {e // layer.k} {c}\n")
    for l, xi in enumerate(graph.mappings, start=2):
        for f, c in enumerate(xi):
            dest.write(f"map {l} {f} {c}\n")


def read_graph(src) -> BraidGraph:
    """Parse the text format written by :func:`write_graph`."""
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            return read_graph(fh)
    header = None
    layer_meta, layout, edges, maps = {}, None, {}, {}
    for lineno, line in enumerate(src, start=1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "cb":
                L, k, m0, m1 = map(int, tok[1:5])
                depths = [int(t) for t in tok[5:]]
                header = (L, depths)
                layer_meta[1] = (k, m0, m1)
            elif tok[0] == "layer":
                l, k, m = map(int, tok[1:4])
                layer_meta[l] = (k, None, m)
            elif tok[0] == "layout":
                layout = CoupledLayout(*map(int, tok[1:5]))
            elif tok[0] == "e":
                l, f, c = map(int, tok[1:4])
                edges.setdefault(l, []).append((f, c))
            elif tok[0] == "map":
                l, f, c = map(int, tok[1:4])
                maps.setdefault(l, []).append((f, c))
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (ValueError, TypeError) as exc:
            raise DomainError(f"line {lineno}: {exc}") from None
    if header is None:
        raise DomainError("missing 'cb' header line")
    L, depths = header
    layers, n_flows = [], layer_meta[1][1]
    for l in range(1, L + 1):
        if l not in layer_meta:
            raise DomainError(f"missing 'layer {l}' line")
        k, _, m = layer_meta[l]
        pairs = sorted(edges.get(l, []), key=lambda fc: fc[0])
        ec = np.array([c for _, c in pairs], dtype=np.int64)
        layers.append(LayerGraph(n_flows, m, k, ec))
        n_flows = m
    mappings = []
    for l in range(2, L + 1):
        pairs = sorted(maps.get(l, []))
        mappings.append(np.array([c for _, c in pairs], dtype=np.int64))
    return BraidGraph(tuple(layers), tuple(depths), tuple(mappings), layout)


def graphs_equal(a: BraidGraph, b: BraidGraph) -> bool:
    if a.depths != b.depths or a.layout != b.layout or a.n_layers != b.n_layers:
        return False
    for la, lb in zip(a.layers, b.layers):
        if (la.n_flows, la.n_counters, la.k) != (lb.n_flows, lb.n_counters, lb.k):
            return False
        if not np.array_equal(la.edge_counter, lb.edge_counter):
            return False
    return all(np.array_equal(x, y) for x, y in zip(a.mappings, b.mappings))
