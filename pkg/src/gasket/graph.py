"""Level graphs of the compact Sierpinski gasket.

The gasket is the attractor of F1(x) = x/2, F2(x) = (x + (1,0))/2 and
F3(x) = (x + (1/2, sqrt(3)/2))/2 acting on the triangle with corners
q0 = (0,0), q1 = (1,0), q2 = (1/2, sqrt(3)/2).  A length-m word over the
alphabet {1,2,3} addresses the cell F_w1 ... F_wm(S); the level-m vertex
set V_m consists of all cell corners.

Vertices carry exact lattice coordinates: the integer pair (a, b) encodes
the point ((a + b/2) / 2^m, b * sqrt(3)/2 / 2^m).  Corner merging is
therefore exact and the vertex numbering is reproducible: ids follow first
appearance in the cell-major, corner-minor scan with cells in
lexicographic word order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ComputationError, ResourceLimitError, UsageError

#: Hard cap on the level accepted by the builders.  Level 12 means 531441
#: cells and 797163 vertices, the largest size the exact cell arithmetic
#: is expected to handle in interactive time.
MAX_LEVEL = 12

_SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Constants:
    """Scaling exponents of the standard gasket calculus.

    Attributes:
        d_s: spectral dimension, 2 log 3 / log 5.
        d_w: walk dimension, log 5 / log 2.
        d_f: Hausdorff dimension in the Euclidean metric, log 3 / log 2.
            Reported for context only; no computation in this package
            consumes it.
        delta_s: spectral exponent log 3 / log(5/3).  Satisfies
            1/delta_s = 2/d_s - 1.
    """

    d_s: float = 2.0 * math.log(3.0) / math.log(5.0)
    d_w: float = math.log(5.0) / math.log(2.0)
    d_f: float = math.log(3.0) / math.log(2.0)
    delta_s: float = math.log(3.0) / math.log(5.0 / 3.0)


CONSTANTS = Constants()


@dataclass(frozen=True)
class Vertex:
    """A level-m vertex with exact lattice coordinates.

    ``lattice`` is the integer pair (a, b); the Euclidean position is
    ((a + b/2)/2^m, b*sqrt(3)/2/2^m) for the level m of the owning graph.
    """

    index: int
    lattice: tuple[int, int]
    xy: tuple[float, float]
    on_boundary: bool


def check_word(word: str) -> str:
    """Validate a cell address over the alphabet {1,2,3} and return it."""
    if not isinstance(word, str):
        raise UsageError(f"cell address must be a string, got {type(word).__name__}")
    if any(c not in "123" for c in word):
        raise UsageError(f"cell address may only contain 1,2,3: {word!r}")
    return word


def word_index(word: str) -> int:
    """Lexicographic rank of a word among all words of its length."""
    check_word(word)
    idx = 0
    for c in word:
        idx = 3 * idx + (ord(c) - ord("1"))
    return idx


def index_word(idx: int, m: int) -> str:
    """Inverse of :func:`word_index` for length-m words."""
    if not 0 <= idx < 3**m:
        raise UsageError(f"word rank {idx} out of range for level {m}")
    digits = []
    for _ in range(m):
        idx, r = divmod(idx, 3)
        digits.append(chr(ord("1") + r))
    return "".join(reversed(digits))


def refine_word(word: str) -> tuple[str, str, str]:
    """The three child cells of a cell, in lexicographic order."""
    check_word(word)
    return (word + "1", word + "2", word + "3")


def enumerate_words(m: int) -> Iterator[str]:
    """All level-m cell addresses in lexicographic order."""
    for idx in range(3**m):
        yield index_word(idx, m)


def _check_level(m: int, max_level: int = MAX_LEVEL) -> int:
    if not isinstance(m, (int, np.integer)):
        raise UsageError(f"level must be an integer, got {m!r}")
    m = int(m)
    if m < 0:
        raise UsageError(f"level must be nonnegative, got {m}")
    if m > max_level:
        raise ResourceLimitError(
            f"level {m} exceeds the supported maximum {max_level}"
        )
    return m


def _cell_corner_lattice(m: int) -> np.ndarray:
    """Lattice coordinates of all cell corners at level m.

    Returns an int64 array of shape (3^m, 3, 2): cells in lexicographic
    word order, corners in the order (F_w(q0), F_w(q1), F_w(q2)).
    """
    # Level 0: the outer triangle at lattice scale 2^0.
    cells = np.array([[[0, 0], [1, 0], [0, 1]]], dtype=np.int64)
    for _ in range(m):
        p0, p1, p2 = cells[:, 0], cells[:, 1], cells[:, 2]
        # Children at the doubled lattice scale.  Child k keeps corner k
        # of the parent and takes the two adjacent edge midpoints.
        m01 = p0 + p1
        m02 = p0 + p2
        m12 = p1 + p2
        c1 = np.stack([2 * p0, m01, m02], axis=1)
        c2 = np.stack([m01, 2 * p1, m12], axis=1)
        c3 = np.stack([m02, m12, 2 * p2], axis=1)
        # Interleave so that cell order stays lexicographic in the word.
        cells = np.stack([c1, c2, c3], axis=1).reshape(-1, 3, 2)
    return cells


@dataclass(frozen=True)
class LevelGraph:
    """The level-m approximation graph of the gasket.

    Attributes:
        level: the approximation level m.
        lattice: (n, 2) int64, exact lattice coordinates per vertex.
        xy: (n, 2) float64, Euclidean positions.
        cells: (3^m, 3) int64, vertex ids per cell, corner order
            (F_w(q0), F_w(q1), F_w(q2)), cells in lexicographic word order.
        edges: (3^{m+1}, 2) int64, each edge once with the smaller id
            first; every edge belongs to exactly one cell and the rows
            follow the cell order.
        corners: ids of q0, q1, q2.
        boundary_mask: (n,) bool, True on V_0.
        interior_index: (n,) int64, position of each vertex in the
            interior enumeration, -1 on the boundary.
    """

    level: int
    lattice: np.ndarray
    xy: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    corners: tuple[int, int, int]
    boundary_mask: np.ndarray
    interior_index: np.ndarray
    _lookup: dict = field(repr=False, default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.lattice.shape[0]

    @property
    def n_interior(self) -> int:
        return self.n_vertices - 3

    @property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def vertex(self, i: int) -> Vertex:
        """Materialize vertex i."""
        a, b = self.lattice[i]
        return Vertex(
            index=int(i),
            lattice=(int(a), int(b)),
            xy=(float(self.xy[i, 0]), float(self.xy[i, 1])),
            on_boundary=bool(self.boundary_mask[i]),
        )

    def vertex_id(self, lattice_pair: tuple[int, int]) -> int:
        """Id of the vertex with the given lattice coordinates."""
        key = self._lookup.get(tuple(int(v) for v in lattice_pair))
        if key is None:
            raise UsageError(f"no vertex at lattice {lattice_pair} on level {self.level}")
        return key

    def cell_ids(self, word: str) -> np.ndarray:
        """Vertex ids of the corners of cell ``word`` (length == level)."""
        check_word(word)
        if len(word) != self.level:
            raise UsageError(
                f"cell address {word!r} has length {len(word)}, expected {self.level}"
            )
        return self.cells[word_index(word)]

    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency as a padded table.

        Returns (nbrs, degree): nbrs is (n, 4) int64 with the neighbor ids
        of each vertex in increasing order, padded with -1; degree is (n,)
        int64.  Interior vertices always have degree 4 and corners degree 2.
        """
        n = self.n_vertices
        degree = np.zeros(n, dtype=np.int64)
        nbrs = np.full((n, 4), -1, dtype=np.int64)
        for u, v in self.edges:
            nbrs[u, degree[u]] = v
            degree[u] += 1
            nbrs[v, degree[v]] = u
            degree[v] += 1
        # Sort each row for reproducibility (padding -1 moved to the end).
        for i in range(n):
            d = degree[i]
            nbrs[i, :d] = np.sort(nbrs[i, :d])
        return nbrs, degree


def build_level_graph(m: int, max_level: int = MAX_LEVEL) -> LevelGraph:
    """Construct the level-m gasket graph.

    Raises ResourceLimitError when m exceeds ``max_level`` (default 12).
    """
    m = _check_level(m, max_level)
    corners_lat = _cell_corner_lattice(m)
    flat = corners_lat.reshape(-1, 2)
    side = (1 << m) + 1
    key = flat[:, 0] * side + flat[:, 1]
    uniq, first_idx, inverse = np.unique(key, return_index=True, return_inverse=True)
    # Renumber unique vertices by first appearance in the scan.
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    ids = rank[inverse]
    cells = ids.reshape(-1, 3)
    lattice = flat[np.sort(first_idx)]
    n = lattice.shape[0]
    expected = (3 ** (m + 1) + 3) // 2
    if n != expected:
        raise ComputationError(f"vertex count {n} != {expected} at level {m}")

    scale = float(1 << m)
    xy = np.empty((n, 2), dtype=np.float64)
    xy[:, 0] = (lattice[:, 0] + 0.5 * lattice[:, 1]) / scale
    xy[:, 1] = lattice[:, 1] * (_SQRT3_2 / scale)

    edges = np.empty((3 * 3**m, 2), dtype=np.int64)
    edges[0::3] = cells[:, (0, 1)]
    edges[1::3] = cells[:, (0, 2)]
    edges[2::3] = cells[:, (1, 2)]
    edges = np.sort(edges, axis=1)

    two_m = 1 << m
    lookup: dict[tuple[int, int], int] = {
        (int(a), int(b)): i for i, (a, b) in enumerate(lattice)
    }
    corners = (lookup[(0, 0)], lookup[(two_m, 0)], lookup[(0, two_m)])
    boundary_mask = np.zeros(n, dtype=bool)
    boundary_mask[list(corners)] = True

    interior_index = np.full(n, -1, dtype=np.int64)
    interior_index[~boundary_mask] = np.arange(n - 3)

    xy.setflags(write=False)
    lattice.setflags(write=False)
    cells.setflags(write=False)
    edges.setflags(write=False)
    boundary_mask.setflags(write=False)
    interior_index.setflags(write=False)
    return LevelGraph(
        level=m,
        lattice=lattice,
        xy=xy,
        cells=cells,
        edges=edges,
        corners=corners,
        boundary_mask=boundary_mask,
        interior_index=interior_index,
        _lookup=lookup,
    )


_GRAPH_CACHE: dict[int, LevelGraph] = {}


def level_graph(m: int) -> LevelGraph:
    """Memoized :func:`build_level_graph`."""
    g = _GRAPH_CACHE.get(m)
    if g is None:
        g = build_level_graph(m)
        _GRAPH_CACHE[m] = g
    return g


def cell_vertices(graph: LevelGraph, word: str) -> tuple[Vertex, Vertex, Vertex]:
    """The three corner vertices of a cell, in (F_w(q0), F_w(q1), F_w(q2)) order."""
    i0, i1, i2 = (int(i) for i in graph.cell_ids(word))
    return (graph.vertex(i0), graph.vertex(i1), graph.vertex(i2))


def map_vertices(coarse: LevelGraph, fine: LevelGraph) -> np.ndarray:
    """Ids in ``fine`` of the vertices of ``coarse`` (V_m is nested in V_{m'})."""
    if fine.level < coarse.level:
        raise UsageError("fine level must be at least the coarse level")
    shift = fine.level - coarse.level
    out = np.empty(coarse.n_vertices, dtype=np.int64)
    for i, (a, b) in enumerate(coarse.lattice):
        out[i] = fine.vertex_id((int(a) << shift, int(b) << shift))
    return out
