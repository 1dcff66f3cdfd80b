"""Upper bounds for the Kobayashi distance via shortest paths in a proximity graph.

Any admissible curve joining two points has Kobayashi–Royden length at least
``k(z, w)``, so the length of the final polyline, measured with the metric
provider, is an upper bound (up to quadrature and provider slack). Graph
weights only steer the search: with an exact provider they are segment
lengths; otherwise a cheap boundary-distance surrogate is used and the
provider is applied once, to the final polyline.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import simpson
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .config import GraphConfig
from .errors import CenterOutside, Disconnected
from .geometry import DomainSpec, contains, real_gradient
from .metric import MetricProvider, SampledCurve, curve_kappa_length, kobayashi_distance_lower
from .polynomial import to_complex, to_real


def surrogate_metric(domain: DomainSpec):
    """``|v| / d`` with ``d = -rho / |grad rho|``, a first-order boundary distance."""

    def metric(z, v):
        val, g = domain.rho.value_and_grad(z)
        gn = np.linalg.norm(real_gradient(g), axis=-1)
        d = np.maximum(-val / np.maximum(gn, 1e-300), 1e-12)
        return np.linalg.norm(v, axis=-1) / d

    return metric


def _segment_lengths(metric, a: np.ndarray, b: np.ndarray, nodes: int) -> np.ndarray:
    """Simpson length of straight segments a[i] -> b[i] under a vectorised metric."""
    t = np.linspace(0.0, 1.0, nodes)
    d = b - a
    pts = a[:, None, :] + t[None, :, None] * d[:, None, :]
    vals = metric(pts, np.broadcast_to(d[:, None, :], pts.shape))
    return simpson(vals, x=t, axis=-1)


def _segments_inside(domain: DomainSpec, a: np.ndarray, b: np.ndarray, checks: int) -> np.ndarray:
    t = (np.arange(checks) + 0.5) / checks
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    return np.all(contains(domain, pts), axis=-1)


class ProximityGraph:
    """k-nearest-neighbour graph on quasi-random interior samples."""

    def __init__(self, domain: DomainSpec, provider: MetricProvider, config: GraphConfig = GraphConfig()):
        self.domain = domain
        self.provider = provider
        self.config = config
        self.weight_metric = provider.eval_fn if provider.is_exact else surrogate_metric(domain)
        self.points = self._sample()
        self.tree = cKDTree(to_real(self.points))
        self.adjacency = self._edges()

    def _sample(self) -> np.ndarray:
        dom, cfg = self.domain, self.config
        sampler = qmc.Halton(d=dom.bbox_min.size, scramble=True, seed=cfg.seed)
        out, have = [], 0
        while have < cfg.samples:
            x = qmc.scale(sampler.random(2 * cfg.samples), dom.bbox_min, dom.bbox_max)
            z = to_complex(x)
            z = z[contains(dom, z)]
            out.append(z)
            have += len(z)
        return np.concatenate(out)[: cfg.samples]

    def _weights(self, a, b):
        return _segment_lengths(self.weight_metric, a, b, self.config.edge_nodes)

    def _edges(self):
        cfg = self.config
        k = min(cfg.neighbors, len(self.points) - 1)
        _, nbr = self.tree.query(to_real(self.points), k=k + 1)
        src = np.repeat(np.arange(len(self.points)), k)
        dst = nbr[:, 1:].ravel()
        keep = src < dst
        src, dst = src[keep], dst[keep]
        ok = _segments_inside(self.domain, self.points[src], self.points[dst], cfg.edge_checks)
        src, dst = src[ok], dst[ok]
        w = self._weights(self.points[src], self.points[dst])
        N = len(self.points)
        A = coo_matrix((w, (src, dst)), shape=(N, N))
        return (A + A.T).tocsr()

    def _attach(self, z: np.ndarray):
        k = min(self.config.neighbors, len(self.points))
        _, nbr = self.tree.query(to_real(z), k=k)
        nbr = np.atleast_1d(nbr)
        a = np.tile(z, (len(nbr), 1))
        ok = _segments_inside(self.domain, a, self.points[nbr], self.config.edge_checks)
        nbr = nbr[ok]
        return nbr, self._weights(a[: len(nbr)], self.points[nbr])

    def shortest_polyline(self, z, w) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        for p in (z, w):
            if not contains(self.domain, p):
                raise CenterOutside(f"{p} is not in {self.domain.name}")
        if _segments_inside(self.domain, z[None], w[None], 4 * self.config.edge_checks)[0]:
            direct = self._weights(z[None], w[None])[0]
        else:
            direct = np.inf
        N = len(self.points)
        nz, wz = self._attach(z)
        nw, ww = self._attach(w)
        rows = np.concatenate([np.full(len(nz), N), np.full(len(nw), N + 1)])
        cols = np.concatenate([nz, nw])
        vals = np.concatenate([wz, ww])
        if np.isfinite(direct):
            rows, cols, vals = np.append(rows, N), np.append(cols, N + 1), np.append(vals, direct)
        A = self.adjacency.tocoo()
        r = np.concatenate([A.row, rows, cols])
        c = np.concatenate([A.col, cols, rows])
        v = np.concatenate([A.data, vals, vals])
        G = coo_matrix((v, (r, c)), shape=(N + 2, N + 2)).tocsr()
        dist, pred = dijkstra(G, indices=N, return_predecessors=True)
        if not np.isfinite(dist[N + 1]):
            raise Disconnected(f"no admissible path in the graph of {self.domain.name}; increase samples")
        path = [N + 1]
        while path[-1] != N:
            path.append(pred[path[-1]])
        allpts = np.concatenate([self.points, z[None], w[None]])
        return allpts[path[::-1]]


def densify(poly: np.ndarray, count: int) -> np.ndarray:
    """Resample a polyline at ``count`` points equally spaced in Euclidean arclength."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=-1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return poly[:1]
    target = np.linspace(0.0, s[-1], count)
    x = to_real(poly)
    out = np.stack([np.interp(target, s, x[:, j]) for j in range(x.shape[1])], axis=1)
    return to_complex(out)


def smooth_polyline(domain: DomainSpec, metric, poly: np.ndarray, sweeps: int, nodes: int = 5) -> np.ndarray:
    """Local node perturbation: move interior vertices toward their neighbours' midpoint when that shortens."""
    poly = poly.copy()
    if len(poly) < 3:
        return poly

    def local(i, p):
        a = np.stack([poly[i - 1], p])
        b = np.stack([p, poly[i + 1]])
        if not np.all(_segments_inside(domain, a, b, 8)):
            return np.inf
        return float(np.sum(_segment_lengths(metric, a, b, nodes)))

    for _ in range(sweeps):
        moved = False
        for i in range(1, len(poly) - 1):
            cur = local(i, poly[i])
            mid = 0.5 * (poly[i - 1] + poly[i + 1])
            for frac in (1.0, 0.5, 0.25):
                cand = poly[i] + frac * (mid - poly[i])
                val = local(i, cand)
                if val < cur * (1 - 1e-12):
                    poly[i] = cand
                    moved = True
                    break
        if not moved:
            break
    return poly


def polyline_kappa_length(provider: MetricProvider, poly: np.ndarray, nodes: int = 3) -> float:
    total = 0.0
    for a, b in zip(poly[:-1], poly[1:]):
        if np.array_equal(a, b):
            continue
        total += curve_kappa_length(provider, SampledCurve.segment(a, b, nodes))
    return total


def kobayashi_distance_upper(provider: MetricProvider, domain: DomainSpec, z, w,
                             config: GraphConfig = GraphConfig(), graph: ProximityGraph | None = None,
                             return_path: bool = False):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.array_equal(z, w):
        return (0.0, np.stack([z])) if return_path else 0.0
    graph = graph or ProximityGraph(domain, provider, config)
    poly = graph.shortest_polyline(z, w)
    poly = densify(poly, max(config.path_nodes, len(poly)))
    poly = smooth_polyline(domain, graph.weight_metric, poly, config.smoothing_sweeps)
    nodes = 5 if provider.is_exact else 3
    length = polyline_kappa_length(provider, poly, nodes)
    return (length, poly) if return_path else length


__all__ = [
    "ProximityGraph",
    "kobayashi_distance_upper",
    "kobayashi_distance_lower",
    "densify",
    "smooth_polyline",
    "surrogate_metric",
]
