"""Minimum-weight perfect matching decoder over a detector error model.

Edges carry weight ``-ln(p / (1 - p))``. Fired detectors are paired either
with each other or with the boundary by exact blossom matching (networkx) on
the complete graph of shortest-path distances.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from sklearn.base import BaseEstimator

from .model import DetectorModel

log = logging.getLogger(__name__)

WEIGHT_CONVENTION = "-ln(p/(1-p))"
_MIN_WEIGHT = 1e-9


def edge_weight(p: float) -> float:
    """``-ln(p/(1-p))``, floored at a tiny positive value for p >= 1/2."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"edge probability must lie in (0, 1), got {p}")
    return max(-math.log(p / (1.0 - p)), _MIN_WEIGHT)


def _xor_prob(p: float, q: float) -> float:
    return p * (1 - q) + q * (1 - p)


@dataclass(frozen=True)
class MatchingGraph:
    """Detectors ``0..n-1`` plus boundary node ``n``.

    ``edges`` maps ``(u, v)`` with ``u < v`` to ``(probability, observable
    mask)``; ``dropped`` lists faults that could not be written as graph edges.
    """

    num_detectors: int
    num_observables: int
    edges: Mapping[tuple[int, int], tuple[float, int]]
    dropped: tuple[int, ...] = ()

    @property
    def boundary(self) -> int:
        return self.num_detectors

    def weight(self, u: int, v: int) -> float:
        return edge_weight(self.edges[(min(u, v), max(u, v))][0])


def _mask(obs) -> int:
    m = 0
    for k in obs:
        m |= 1 << int(k)
    return m


def _decompose(dets: Sequence[int], mask: int, edges, boundary: int) -> list[tuple[int, int]] | None:
    """Split ``dets`` into existing edges (pairs or boundary singles) whose
    observable masks XOR to ``mask``."""
    dets = list(dets)
    if not dets:
        return [] if mask == 0 else None
    first, rest = dets[0], dets[1:]
    options = [(first, boundary, rest)]
    for k, other in enumerate(rest):
        options.append((first, other, rest[:k] + rest[k + 1 :]))
    for a, b, remaining in options:
        key = (min(a, b), max(a, b))
        if key not in edges:
            continue
        sub = _decompose(remaining, mask ^ edges[key][1], edges, boundary)
        if sub is not None:
            return [key] + sub
    return None


def build_matching_graph(model: DetectorModel) -> MatchingGraph:
    """Merge graphlike faults into edges, then decompose the rest."""
    n = model.num_detectors
    edges: dict[tuple[int, int], tuple[float, int]] = {}
    hyper: list[int] = []
    for idx, f in enumerate(model.faults):
        dets = sorted(f.detectors)
        if not dets or f.probability <= 0:
            continue
        if len(dets) > 2:
            hyper.append(idx)
            continue
        key = (dets[0], n) if len(dets) == 1 else (dets[0], dets[1])
        mask = _mask(f.observables)
        if key in edges:
            p0, m0 = edges[key]
            if m0 == mask:
                edges[key] = (_xor_prob(p0, f.probability), mask)
            elif f.probability > p0:
                # parallel edges with different logical effect: keep the likelier
                edges[key] = (f.probability, mask)
        else:
            edges[key] = (f.probability, mask)
    dropped = []
    extra: dict[tuple[int, int], float] = {}
    for idx in hyper:
        f = model.faults[idx]
        parts = _decompose(sorted(f.detectors), _mask(f.observables), edges, n)
        if parts is None:
            dropped.append(idx)
            log.info("fault %d (site %d, %s) has no graphlike decomposition; dropped", idx, f.site, f.term)
            continue
        for key in parts:
            extra[key] = _xor_prob(extra.get(key, 0.0), f.probability)
    for key, p in extra.items():
        p0, m0 = edges[key]
        edges[key] = (_xor_prob(p0, p), m0)
    return MatchingGraph(n, len(model.observables), edges, tuple(dropped))


class _Distances:
    """All-pairs shortest paths with the observable mask along each path."""

    def __init__(self, graph: MatchingGraph):
        n = graph.num_detectors + 1
        rows, cols, w = [], [], []
        for (u, v), (p, _m) in graph.edges.items():
            wt = edge_weight(p)
            rows += [u, v]
            cols += [v, u]
            w += [wt, wt]
        mat = csr_matrix((w, (rows, cols)), shape=(n, n))
        self.dist, pred = dijkstra(mat, directed=True, return_predecessors=True)
        self.mask = np.zeros((n, n), np.int64)
        emask = {}
        for (u, v), (_p, m) in graph.edges.items():
            emask[(u, v)] = emask[(v, u)] = m
        for s in range(n):
            order = np.argsort(self.dist[s])
            for v in order:
                if v == s or not np.isfinite(self.dist[s, v]):
                    continue
                u = pred[s, v]
                self.mask[s, v] = self.mask[s, u] ^ emask[(int(u), int(v))]


class MatchingDecoder(BaseEstimator):
    """Decode detection events into predicted observable flips.

    ``fit`` takes a :class:`DetectorModel`; ``predict`` takes detection
    events (n_shots, n_detectors) and returns flips (n_shots, n_observables).
    """

    def __init__(self, cache_size: int = 1 << 16):
        self.cache_size = cache_size

    def fit(self, model: DetectorModel, y=None):
        self.graph_ = build_matching_graph(model)
        self.paths_ = _Distances(self.graph_)
        self.weight_convention_ = WEIGHT_CONVENTION
        self._solve = lru_cache(maxsize=self.cache_size)(self._match)
        return self

    def _match(self, fired: tuple[int, ...]) -> tuple[int, float]:
        mask, weight, _ = match_syndrome(self.graph_, self.paths_, fired)
        return mask, weight

    def decode(self, fired: Sequence[int]) -> np.ndarray:
        mask, _ = self._solve(tuple(sorted(int(f) for f in fired)))
        return np.array([(mask >> k) & 1 for k in range(self.graph_.num_observables)], np.uint8)

    def matching_weight(self, fired: Sequence[int]) -> float:
        return self._solve(tuple(sorted(int(f) for f in fired)))[1]

    def predict(self, detection_events: np.ndarray) -> np.ndarray:
        events = np.atleast_2d(np.asarray(detection_events, np.uint8))
        out = np.zeros((events.shape[0], self.graph_.num_observables), np.uint8)
        rows = np.flatnonzero(events.any(axis=1))
        for r in rows:
            out[r] = self.decode(np.flatnonzero(events[r]))
        return out


def match_syndrome(graph: MatchingGraph, paths: _Distances, fired: Sequence[int]):
    """Return ``(observable mask, total weight, pairs)`` for the fired set."""
    fired = list(fired)
    if not fired:
        return 0, 0.0, []
    b = graph.boundary
    g = nx.Graph()
    dist = paths.dist
    finite = [dist[u, v] for u, v in itertools.combinations(fired + [b], 2) if np.isfinite(dist[u, v])]
    big = 1.0 + 2.0 * (sum(finite) if finite else 0.0)
    for i, j in itertools.combinations(range(len(fired)), 2):
        d = dist[fired[i], fired[j]]
        if np.isfinite(d):
            g.add_edge(("d", i), ("d", j), weight=big - d)
    for i, u in enumerate(fired):
        d = dist[u, b]
        if np.isfinite(d):
            g.add_edge(("d", i), ("b", i), weight=big - d)
    for i, j in itertools.combinations(range(len(fired)), 2):
        g.add_edge(("b", i), ("b", j), weight=big)
    matching = nx.max_weight_matching(g, maxcardinality=True)
    matched = set()
    for u, v in matching:
        matched.update((u, v))
    if any(("d", i) not in matched for i in range(len(fired))):
        raise ValueError("syndrome cannot be matched: an odd cluster of detection events has no path to the boundary")
    mask = 0
    weight = 0.0
    pairs = []
    for u, v in matching:
        if u[0] == "b" and v[0] == "b":
            continue
        if u[0] == "b":
            u, v = v, u
        a = fired[u[1]]
        c = b if v[0] == "b" else fired[v[1]]
        mask ^= int(paths.mask[a, c])
        weight += float(dist[a, c])
        pairs.append((a, c))
    return mask, weight, pairs


def brute_force_matching(graph: MatchingGraph, fired: Sequence[int]) -> float:
    """Minimum total weight over all pairings, by exhaustive search."""
    paths = _Distances(graph)
    b = graph.boundary

    @lru_cache(maxsize=None)
    def best(rest: tuple[int, ...]) -> float:
        if not rest:
            return 0.0
        a, others = rest[0], rest[1:]
        out = paths.dist[a, b] + best(others)
        for k, c in enumerate(others):
            out = min(out, paths.dist[a, c] + best(others[:k] + others[k + 1 :]))
        return out

    return float(best(tuple(sorted(fired))))


def decode(graph: MatchingGraph, fired: Sequence[int]) -> np.ndarray:
    """One-shot decode of a fired-detector list into observable flips."""
    mask, _, _ = match_syndrome(graph, _Distances(graph), sorted(int(f) for f in fired))
    return np.array([(mask >> k) & 1 for k in range(graph.num_observables)], np.uint8)
