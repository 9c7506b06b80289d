"""Truncated cusped Cayley graphs: Cayley ball plus per-coset horoballs.

Vertices are either Cayley vertices (level 1, identified with group
elements) or horoball vertices (coset, base element, level >= 2).
Horizontal edges at level n join base elements at peripheral word distance
<= 2^(n-1); the level-1 horizontal edges coincide with the peripheral
Cayley edges already present in the ball.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import exact
from .groups import Group, GroupElement, MembershipUnsupportedError
from .words import free_reduce, invert_word, word_key


class VertexOutsideBallError(ValueError):
    def __init__(self, required_radius):
        self.required_radius = required_radius
        super().__init__(f"element outside the built ball; need radius >= {required_radius}")


def _coset_depth(global_depth: int, diameter: int) -> int:
    # ascending above the sufficiency bound never shortens a path
    if diameter <= 0:
        return min(global_depth, 2)
    return min(global_depth, 3 + math.ceil(math.log2(diameter)))


@dataclass
class Coset:
    peripheral_id: str
    key: tuple                 # canonical coset representative word
    base_elements: list        # element indices
    coords: list               # peripheral coordinate per base element
    depth: int = 0

    def diameter(self, pdist) -> int:
        if len(self.coords) < 2:
            return 0
        return max(pdist(a, b) for i, a in enumerate(self.coords)
                   for b in self.coords[i + 1:])


@dataclass
class GeodesicPath:
    vids: tuple
    length: int

    def __len__(self):
        return len(self.vids)


class CuspedGraph:
    def __init__(self, group: Group, radius: int, depth: int, reach: int | None = None,
                 max_elements: int | None = None):
        if radius < 0 or depth < 1:
            raise ValueError("radius >= 0 and depth >= 1 required")
        self.group = group
        self.radius = radius
        self.depth = depth
        self.reach = (1 << radius) if reach is None else reach
        self.partial = False
        self._build(max_elements)
        self._dist_from_base = None

    # -- construction -------------------------------------------------------

    def _build(self, max_elements):
        group = self.group
        ball = group.enumerate_ball(self.radius, max_elements=max_elements)
        elements = {g.matrix: g for g in ball}
        self._ball_size = len(ball)

        # deep reach on basepoint cosets of single-generator peripherals
        for p in group.peripherals:
            if p.membership != "free_subgroup" or len(p.marked) != 1:
                continue
            sym = group.gens.names.index(p.marked[0]) + 1
            for j in range(-self.reach, self.reach + 1):
                word = (sym,) * j if j >= 0 else (-sym,) * (-j)
                m = group.word_matrix(word)
                if m not in elements:
                    elements[m] = GroupElement(word, m)

        self.elements = sorted(elements.values(), key=lambda e: word_key(e.word))
        self.element_index = {g.matrix: i for i, g in enumerate(self.elements)}

        # coset decomposition per peripheral
        self.cosets: list[Coset] = []
        coset_of = {}
        for p in group.peripherals:
            if p.membership != "free_subgroup":
                raise MembershipUnsupportedError(
                    f"cusped graph needs free_subgroup peripherals, got {p.membership!r}")
            by_key = {}
            for ei, g in enumerate(self.elements):
                key, coord = group.coset_decomposition(g, p)
                by_key.setdefault(key, []).append((ei, coord))
            for key in sorted(by_key, key=word_key):
                rows = sorted(by_key[key], key=lambda r: word_key(r[1]))
                c = Coset(peripheral_id=p.id, key=key,
                          base_elements=[r[0] for r in rows],
                          coords=[r[1] for r in rows])
                c.depth = _coset_depth(self.depth, c.diameter(self._pdist))
                coset_of.update({ei: len(self.cosets) for ei in c.base_elements})
                self.cosets.append(c)
        self._coset_of_element = coset_of

        self._build_vertices()
        self._build_edges()

    @staticmethod
    def _pdist(p1, p2) -> int:
        return len(free_reduce(invert_word(p1) + p2))

    def _build_vertices(self):
        self.vertices = [("cay", ei) for ei in range(len(self.elements))]
        for ci, c in enumerate(self.cosets):
            for level in range(2, c.depth + 1):
                for bi in range(len(c.base_elements)):
                    self.vertices.append(("horo", ci, bi, level))
        self.vertex_index = {v: i for i, v in enumerate(self.vertices)}

    def _build_edges(self):
        edges = []
        index = self.element_index
        # Cayley edges
        for ei, g in enumerate(self.elements):
            for s in self.group.gens.symbols():
                m = exact.mat_mul(g.matrix, self.group.generator_matrix(s))
                ej = index.get(m)
                if ej is not None and ei < ej:
                    edges.append((ei, ej))
        # vertical and horizontal horoball edges
        for ci, c in enumerate(self.cosets):
            nb = len(c.base_elements)
            for bi in range(nb):
                below = self.vertex_index[("cay", c.base_elements[bi])]
                for level in range(2, c.depth + 1):
                    here = self.vertex_index[("horo", ci, bi, level)]
                    edges.append((below, here))
                    below = here
            for level in range(2, c.depth + 1):
                span = 1 << (level - 1)
                for bi in range(nb):
                    vi = self.vertex_index[("horo", ci, bi, level)]
                    for bj in range(bi + 1, nb):
                        if self._pdist(c.coords[bi], c.coords[bj]) <= span:
                            edges.append((vi, self.vertex_index[("horo", ci, bj, level)]))
        self.edge_count = len(edges)
        n = len(self.vertices)
        if edges:
            arr = np.array(edges, dtype=np.int64)
            both = np.concatenate([arr, arr[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            counts = np.bincount(both[:, 0], minlength=n)
        else:
            both = np.zeros((0, 2), dtype=np.int64)
            counts = np.zeros(n, dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.indices = both[:, 1].astype(np.int64)

    # -- vertex accessors ----------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def basepoint(self) -> int:
        return self.vertex_index[("cay", self.element_index[self.group.identity.matrix])]

    def vertex_level(self, vid: int) -> int:
        v = self.vertices[vid]
        return 1 if v[0] == "cay" else v[3]

    def vertex_element(self, vid: int) -> int:
        """Nearest group element (index): the base element for horoball vertices."""
        v = self.vertices[vid]
        if v[0] == "cay":
            return v[1]
        return self.cosets[v[1]].base_elements[v[2]]

    def vertex_coset(self, vid: int):
        v = self.vertices[vid]
        return v[1] if v[0] == "horo" else None

    def element_vertex(self, g: GroupElement) -> int:
        ei = self.element_index.get(g.matrix)
        if ei is None:
            raise VertexOutsideBallError(len(g.word))
        return self.vertex_index[("cay", ei)]

    # -- BFS -----------------------------------------------------------------

    def bfs(self, sources) -> np.ndarray:
        """Vectorized multi-source BFS; returns int64 distances, -1 unreachable."""
        if isinstance(sources, (int, np.integer)):
            sources = [sources]
        dist = np.full(self.vertex_count, -1, dtype=np.int64)
        frontier = np.unique(np.asarray(sources, dtype=np.int64))
        dist[frontier] = 0
        d = 0
        while frontier.size:
            d += 1
            starts = self.indptr[frontier]
            counts = self.indptr[frontier + 1] - starts
            total = int(counts.sum())
            if total == 0:
                break
            base = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
            neigh = self.indices[base + np.arange(total)]
            neigh = neigh[dist[neigh] < 0]
            if neigh.size == 0:
                break
            frontier = np.unique(neigh)
            dist[frontier] = d
        return dist

    def bfs_parents(self, source: int):
        dist = np.full(self.vertex_count, -1, dtype=np.int64)
        parent = np.full(self.vertex_count, -1, dtype=np.int64)
        dist[source] = 0
        frontier = np.array([source], dtype=np.int64)
        d = 0
        while frontier.size:
            d += 1
            starts = self.indptr[frontier]
            counts = self.indptr[frontier + 1] - starts
            total = int(counts.sum())
            if total == 0:
                break
            base = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
            neigh = self.indices[base + np.arange(total)]
            pars = np.repeat(frontier, counts)
            mask = dist[neigh] < 0
            neigh, pars = neigh[mask], pars[mask]
            if neigh.size == 0:
                break
            uniq, first = np.unique(neigh, return_index=True)
            dist[uniq] = d
            parent[uniq] = pars[first]
            frontier = uniq
        return dist, parent

    def shortest_path(self, u: int, v: int) -> GeodesicPath:
        dist, parent = self.bfs_parents(u)
        if dist[v] < 0:
            raise ValueError("no path between the requested vertices")
        path = [v]
        while path[-1] != u:
            path.append(int(parent[path[-1]]))
        path.reverse()
        return GeodesicPath(vids=tuple(path), length=int(dist[v]))

    # -- spec operations ------------------------------------------------------

    def distances_from_basepoint(self) -> np.ndarray:
        if self._dist_from_base is None:
            self._dist_from_base = self.bfs(self.basepoint)
        return self._dist_from_base

    def cusp_distance(self, g: GroupElement) -> int:
        vid = self.element_vertex(g)
        return int(self.distances_from_basepoint()[vid])

    def sample_geodesics(self, count: int, min_length: int, seed: int = 0,
                         endpoints: str = "any"):
        """Seeded far-pair shortest paths; may return fewer (flagged) paths.

        endpoints="cayley" restricts both ends to Cayley vertices (useful for
        flow pipelines that want anchored excursions).
        """
        rng = np.random.default_rng(seed)
        n_cay = len(self.elements)
        paths, flagged = [], False
        attempts = 0
        while len(paths) < count and attempts < 20 * max(count, 1):
            attempts += 1
            u = int(rng.integers(0, n_cay))
            dist = self.bfs(u)
            far = np.where(dist >= min_length)[0]
            if endpoints == "cayley":
                far = far[far < n_cay]
            if far.size == 0:
                flagged = True
                break
            v = int(far[rng.integers(0, far.size)])
            paths.append(self.shortest_path(u, v))
        return paths, flagged

    def estimate_delta(self, samples: int, seed: int = 0):
        """Max slimness defect over sampled geodesic triangles (lower bound for delta)."""
        rng = np.random.default_rng(seed)
        n = self.vertex_count
        best = 0
        for _ in range(samples):
            a, b, c = (int(rng.integers(0, n)) for _ in range(3))
            sides = [self.shortest_path(a, b), self.shortest_path(b, c),
                     self.shortest_path(c, a)]
            for i in range(3):
                others = list(sides[(i + 1) % 3].vids) + list(sides[(i + 2) % 3].vids)
                dist = self.bfs(others)
                defect = int(dist[np.array(sides[i].vids)].max())
                best = max(best, defect)
        return best

    # -- export ---------------------------------------------------------------

    def counts(self) -> dict:
        return {
            "vertices": self.vertex_count,
            "edges": self.edge_count,
            "cayley_vertices": len(self.elements),
            "cayley_ball": self._ball_size,
            "cosets": len(self.cosets),
            "radius": self.radius,
            "depth": self.depth,
            "reach": self.reach,
        }

    def export_adjacency(self, path):
        with open(path, "w") as fh:
            seen = set()
            for u in range(self.vertex_count):
                for v in self.indices[self.indptr[u]:self.indptr[u + 1]]:
                    if (min(u, v), max(u, v)) not in seen:
                        seen.add((min(u, v), max(u, v)))
                        fh.write(f"{u} {v}\n")

    def export_manifest(self, path):
        manifest = {}
        for vid, v in enumerate(self.vertices):
            g = self.elements[self.vertex_element(vid)]
            manifest[str(vid)] = {
                "word": self.group.gens.format_word(g.word),
                "depth": self.vertex_level(vid),
            }
        with open(path, "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=0)


def build_cusped_graph(group: Group, radius: int, depth: int, reach=None,
                       max_elements=None) -> CuspedGraph:
    return CuspedGraph(group, radius, depth, reach=reach, max_elements=max_elements)
