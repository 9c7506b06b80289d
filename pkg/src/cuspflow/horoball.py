"""Combinatorial horoballs over Z- and Z^2-segments and small explicit graphs.

A horoball over a base graph Y has vertices Y x {1..depth}, vertical edges
(v,n)-(v,n+1), and horizontal edges (v,n)-(w,n) exactly when the base
distance satisfies d_Y(v,w) <= 2^(n-1).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage


class TruncationError(ValueError):
    def __init__(self, required_depth, depth):
        self.required_depth = required_depth
        super().__init__(
            f"truncation depth {depth} insufficient; need depth >= {required_depth}")


def required_depth(base_distance: int) -> int:
    """Depth below which truncation could shorten a path between the endpoints."""
    if base_distance <= 1:
        return 2
    return 2 + math.ceil(math.log2(base_distance))


def normal_form_distance(u, v, base_distance: int, depth: int) -> int:
    """Length of the best (ascend, <=3 horizontal, descend) path.

    u, v are (base_label, level) with levels >= 1; base_distance is the base
    graph distance between their base labels. Minimized exhaustively over the
    top level; at level L one horizontal edge spans base distance <= 2^(L-1).
    """
    nu, nv = u[1], v[1]
    d = base_distance
    if d == 0:
        return abs(nu - nv)
    req = required_depth(d)
    if depth < req:
        raise TruncationError(req, depth)
    best = None
    for top in range(max(nu, nv), depth + 1):
        hops = -(-d // (1 << (top - 1)))  # ceil division
        total = (top - nu) + (top - nv) + hops
        if best is None or total < best:
            best = total
    return best


def _l1_distance_to_mask(mask: np.ndarray) -> np.ndarray:
    """Exact integer L1 distance to the nearest True cell (large where empty)."""
    if not mask.any():
        return np.full(mask.shape, np.iinfo(np.int32).max // 2, dtype=np.int64)
    if mask.ndim == 1:
        n = mask.shape[0]
        idx = np.where(mask, np.arange(n), -n * 2)
        fwd = np.maximum.accumulate(idx)
        left = np.arange(n) - fwd
        idx = np.where(mask, np.arange(n), n * 4)
        bwd = np.minimum.accumulate(idx[::-1])[::-1]
        right = bwd - np.arange(n)
        return np.minimum(left, right).astype(np.int64)
    # scipy's chamfer transform with the taxicab metric is exact for L1
    return ndimage.distance_transform_cdt(~mask, metric="taxicab").astype(np.int64)


class GridHoroball:
    """Horoball over a Z-segment [0..n] or a Z^2-box, with vectorized BFS.

    Base distance is the L1 metric; this is the graph metric of the segment
    (resp. of the grid with unit steps), so horizontal adjacency at level n
    joins base points at L1 distance <= 2^(n-1).
    """

    def __init__(self, shape, depth: int):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.shape = tuple(int(s) for s in ((shape,) if isinstance(shape, int) else shape))
        self.depth = depth

    def bfs_distances(self, source) -> np.ndarray:
        """Exact BFS distances from source=(base..., level) to every vertex.

        Returns an array of shape (depth, *base_shape); unreachable = -1.
        Layer expansion per level uses an exact L1 distance transform, so a
        frontier cell reaches every same-level cell within 2^(n-1) in one step.
        """
        base_shape = tuple(s + 1 for s in self.shape)
        dist = np.full((self.depth,) + base_shape, -1, dtype=np.int64)
        *base, level = source
        dist[(level - 1,) + tuple(base)] = 0
        frontier = np.zeros_like(dist, dtype=bool)
        frontier[(level - 1,) + tuple(base)] = True
        d = 0
        while frontier.any():
            reach = np.zeros_like(frontier)
            for li in range(self.depth):
                f = frontier[li]
                if not f.any():
                    continue
                radius = 1 << li  # level = li + 1, horizontal span 2^(level-1)
                dt = _l1_distance_to_mask(f)
                reach[li] |= dt <= radius
                if li > 0:
                    reach[li - 1] |= f
                if li + 1 < self.depth:
                    reach[li + 1] |= f
            new = reach & (dist < 0)
            d += 1
            dist[new] = d
            frontier = new
        return dist

    def bfs_distance(self, u, v) -> int:
        *ubase, ulevel = u
        *vbase, vlevel = v
        d_base = int(sum(abs(a - b) for a, b in zip(ubase, vbase)))
        req = required_depth(d_base)
        if self.depth < req:
            raise TruncationError(req, self.depth)
        dist = self.bfs_distances(u)
        return int(dist[(vlevel - 1,) + tuple(vbase)])


class ExplicitHoroball:
    """Horoball over an arbitrary finite base graph given by an edge list.

    Stores the full edge set; meant for small bases (unit tests, per-coset
    horoballs inside a cusped graph use the lazy machinery instead).
    """

    def __init__(self, n_base: int, base_edges, depth: int):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.n_base = n_base
        self.depth = depth
        self.base_dist = self._base_distances(n_base, base_edges)
        self.edges = self._build_edges()

    @staticmethod
    def _base_distances(n, edges) -> np.ndarray:
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        dist = np.full((n, n), -1, dtype=np.int64)
        for s in range(n):
            dist[s, s] = 0
            frontier = [s]
            d = 0
            while frontier:
                d += 1
                nxt = []
                for u in frontier:
                    for w in adj[u]:
                        if dist[s, w] < 0:
                            dist[s, w] = d
                            nxt.append(w)
                frontier = nxt
        return dist

    def vertex_id(self, v, n) -> int:
        return (n - 1) * self.n_base + v

    def _build_edges(self):
        edges = []
        for n in range(1, self.depth + 1):
            span = 1 << (n - 1)
            for v in range(self.n_base):
                if n < self.depth:
                    edges.append((self.vertex_id(v, n), self.vertex_id(v, n + 1)))
                for w in range(v + 1, self.n_base):
                    if 0 <= self.base_dist[v, w] <= span:
                        edges.append((self.vertex_id(v, n), self.vertex_id(w, n)))
        return edges

    def has_edge(self, u, v) -> bool:
        a = self.vertex_id(*u)
        b = self.vertex_id(*v)
        return (a, b) in self.edges or (b, a) in self.edges

    def edge_count(self) -> int:
        return len(self.edges)

    def vertex_count(self) -> int:
        return self.n_base * self.depth

    def bfs_distance(self, u, v) -> int:
        d_base = int(self.base_dist[u[0], v[0]])
        if d_base < 0:
            raise ValueError("base graph not connected between the endpoints")
        req = required_depth(d_base)
        if self.depth < req:
            raise TruncationError(req, self.depth)
        n_total = self.vertex_count()
        adj = [[] for _ in range(n_total)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        src = self.vertex_id(*u)
        tgt = self.vertex_id(*v)
        dist = [-1] * n_total
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for x in frontier:
                for y in adj[x]:
                    if dist[y] < 0:
                        dist[y] = dist[x] + 1
                        nxt.append(y)
            frontier = nxt
        return dist[tgt]


def build_horoball(n_base: int, base_edges, depth: int) -> ExplicitHoroball:
    """Explicit truncated horoball over a connected base graph."""
    hb = ExplicitHoroball(n_base, base_edges, depth)
    if (hb.base_dist < 0).any():
        raise ValueError("base graph must be connected")
    return hb
