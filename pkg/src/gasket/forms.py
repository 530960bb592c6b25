"""Dirichlet energy, harmonic extension, energy measures, cell gradients.

The level-m energy is E(u) = (5/3)^m sum over level-m edges of
(u(x) - u(y))^2.  Harmonic extension leaves it invariant, so the values
agree across levels for piecewise harmonic functions.  Gradients are
cell fields obtained by projecting onto the reference harmonic function
h with h(q0) = 0, h(q1) = h(q2) = 1, whose energy measure dominates the
cell measure from :mod:`gasket.kusuoka`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ComputationError, UsageError
from .graph import LevelGraph, Vertex, level_graph
from .harmonic import A_EXACT, A_STACK, P_EXACT, P_MATRIX, Y_STACK, extend_values
from .kusuoka import KusuokaWeights, kusuoka_weights  # noqa: F401  (re-export)


def _n_vertices(level: int) -> int:
    return (3 ** (level + 1) + 3) // 2


@dataclass(frozen=True)
class DiscreteFunction:
    """Vertex values on V_m, indexed like the level-m graph."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] != _n_vertices(self.level):
            raise UsageError(
                f"expected {_n_vertices(self.level)} values at level "
                f"{self.level}, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise UsageError("function values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class CellField:
    """One real value per level-m cell, in lexicographic word order."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] != 3**self.level:
            raise UsageError(
                f"expected {3 ** self.level} cell values at level "
                f"{self.level}, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise UsageError("cell values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class EnergyForm:
    """The level-m quadratic form with edge conductance (5/3)^m."""

    level: int

    @property
    def edge_conductance(self) -> float:
        return (5.0 / 3.0) ** self.level

    def __call__(self, u: DiscreteFunction) -> float:
        return energy(u)


@dataclass(frozen=True)
class HarmonicMatrices:
    """The extension matrices, centering projection, and centered maps."""

    A1: tuple
    A2: tuple
    A3: tuple
    P: tuple
    A: np.ndarray
    P_float: np.ndarray
    Y: np.ndarray


def harmonic_matrices() -> HarmonicMatrices:
    """Exact and float views of the extension calculus."""
    return HarmonicMatrices(
        A1=A_EXACT[0],
        A2=A_EXACT[1],
        A3=A_EXACT[2],
        P=P_EXACT,
        A=A_STACK,
        P_float=P_MATRIX,
        Y=Y_STACK,
    )


def _edge_diffs(g: LevelGraph, values: np.ndarray) -> np.ndarray:
    return values[g.edges[:, 0]] - values[g.edges[:, 1]]


def energy(u: DiscreteFunction) -> float:
    """Level-m Dirichlet energy (5/3)^m sum of squared edge differences."""
    g = level_graph(u.level)
    d = _edge_diffs(g, u.values)
    return (5.0 / 3.0) ** u.level * float(d @ d)


def energy_bilinear(u: DiscreteFunction, v: DiscreteFunction) -> float:
    """The symmetric bilinear form polarizing :func:`energy`."""
    if u.level != v.level:
        raise UsageError(f"level mismatch: {u.level} vs {v.level}")
    g = level_graph(u.level)
    du = _edge_diffs(g, u.values)
    dv = _edge_diffs(g, v.values)
    return (5.0 / 3.0) ** u.level * float(du @ dv)


def harmonic_extend(u: DiscreteFunction, target: int) -> DiscreteFunction:
    """Energy-preserving extension of u to a finer level.

    Each refinement evaluates child-cell corners with the 1/5-2/5
    extension matrices; values on the coarse vertices are unchanged and
    the result minimizes the target-level energy among all extensions.
    """
    if target < u.level:
        raise UsageError("target level must be at least u.level")
    graphs = tuple(level_graph(k) for k in range(u.level, target + 1))
    return DiscreteFunction(target, extend_values(u.values, u.level, target, graphs))


def reference_harmonic(level: int) -> DiscreteFunction:
    """The harmonic function with boundary values (0, 1, 1) at ``level``."""
    g0 = level_graph(0)
    vals = np.zeros(3)
    vals[[g0.corners[1], g0.corners[2]]] = 1.0
    return harmonic_extend(DiscreteFunction(0, vals), level)


def energy_measure_cells(u: DiscreteFunction, m: int | None = None) -> CellField:
    """Per-cell graph energies; they partition the total energy exactly.

    Every level-m edge lies in exactly one cell, so value(w) sums the
    conductance-weighted squared differences over the three edges of w.
    """
    if m is not None and m != u.level:
        raise UsageError(f"cell level {m} must equal u.level {u.level}")
    g = level_graph(u.level)
    d2 = _edge_diffs(g, u.values) ** 2
    per_cell = (5.0 / 3.0) ** u.level * d2.reshape(-1, 3).sum(axis=1)
    return CellField(u.level, per_cell)


def energy_measure_cells_bilinear(
    u: DiscreteFunction, v: DiscreteFunction
) -> CellField:
    """Cell-resolved bilinear energy measure of the pair (u, v)."""
    if u.level != v.level:
        raise UsageError(f"level mismatch: {u.level} vs {v.level}")
    g = level_graph(u.level)
    prod = _edge_diffs(g, u.values) * _edge_diffs(g, v.values)
    per_cell = (5.0 / 3.0) ** u.level * prod.reshape(-1, 3).sum(axis=1)
    return CellField(u.level, per_cell)


def gradient_cells(u: DiscreteFunction, m: int | None = None) -> CellField:
    """Cell gradient of u relative to the dominant-measure calculus.

    With h the reference harmonic function (0, 1, 1) and mu the exact cell
    measure, the cell value is

        grad(w) = E_w(u, h) / sqrt(E_w(h) * mu(w)),

    the unique value consistent with grad(u) * grad(h) * mu = E_(u,h) and
    grad(h) = sqrt(dE_(h)/dmu) > 0.  Cells where mu or E_w(h) vanish would
    get gradient 0; that never happens for this h up to level 12 and is
    reported as an error if encountered.
    """
    if m is not None and m != u.level:
        raise UsageError(f"cell level {m} must equal u.level {u.level}")
    lvl = u.level
    h = reference_harmonic(lvl)
    e_uh = energy_measure_cells_bilinear(u, h).values
    e_h = energy_measure_cells(h).values
    mu = kusuoka_weights(lvl).values
    bad = (mu <= 0.0) | (e_h <= 0.0)
    if bad.any():
        raise ComputationError(
            f"{int(bad.sum())} cells with vanishing reference measure at level {lvl}"
        )
    return CellField(lvl, e_uh / np.sqrt(e_h * mu))


def cell_means(u: DiscreteFunction) -> CellField:
    """Mean of the three corner values on each cell of u's level."""
    g = level_graph(u.level)
    return CellField(u.level, u.values[g.cells].mean(axis=1))


def _graph_laplacian(g: LevelGraph) -> sp.csr_matrix:
    n = g.n_vertices
    c = (5.0 / 3.0) ** g.level
    i = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    j = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    off = sp.coo_matrix((-c * np.ones(i.size), (i, j)), shape=(n, n)).tocsr()
    deg = -np.asarray(off.sum(axis=1)).ravel()
    return off + sp.diags(deg)


def effective_resistance(g: LevelGraph, x: Vertex | int, y: Vertex | int) -> float:
    """Two-point effective resistance on the level-m network.

    Computed as 1 / min{E(u) : u(x) = 0, u(y) = 1} by solving the interior
    linear system of the constrained minimization.  Corner pairs reproduce
    the level-0 value 2/3 at every level (electrical fixed point).
    """
    xi = x.index if isinstance(x, Vertex) else int(x)
    yi = y.index if isinstance(y, Vertex) else int(y)
    if not (0 <= xi < g.n_vertices and 0 <= yi < g.n_vertices):
        raise UsageError("vertex id out of range")
    if xi == yi:
        return 0.0
    lap = _graph_laplacian(g)
    free = np.ones(g.n_vertices, dtype=bool)
    free[[xi, yi]] = False
    u = np.zeros(g.n_vertices)
    u[yi] = 1.0
    rhs = -lap[:, yi].toarray().ravel()[free]
    sol = spla.spsolve(lap[free][:, free].tocsc(), rhs)
    u[free] = sol
    d = u[g.edges[:, 0]] - u[g.edges[:, 1]]
    e_min = (5.0 / 3.0) ** g.level * float(d @ d)
    if e_min <= 0.0:
        raise ComputationError("degenerate resistance minimization")
    return 1.0 / e_min


def resistance_table(g: LevelGraph, pairs: np.ndarray) -> np.ndarray:
    """Effective resistances for many vertex pairs with one factorization.

    Grounds the network at corner q0 and solves one system per pair;
    agrees with :func:`effective_resistance` to solver precision.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    lap = _graph_laplacian(g).tocsc()
    ground = g.corners[0]
    keep = np.ones(g.n_vertices, dtype=bool)
    keep[ground] = False
    reduced = lap[keep][:, keep].tocsc()
    solve = spla.factorized(reduced)
    pos = np.cumsum(keep) - 1  # grounded index of each vertex
    out = np.empty(pairs.shape[0])
    for r, (x, y) in enumerate(pairs):
        if x == y:
            out[r] = 0.0
            continue
        rhs = np.zeros(g.n_vertices - 1)
        if x != ground:
            rhs[pos[x]] += 1.0
        if y != ground:
            rhs[pos[y]] -= 1.0
        w = solve(rhs)
        out[r] = float(rhs @ w)
    return out


def exact_identity_check() -> bool:
    """Verify (5/3) * sum_i A_i^T P A_i = P in rational arithmetic."""
    acc = [[Fraction(0) for _ in range(3)] for _ in range(3)]
    for idx in range(3):
        a = A_EXACT[idx]
        for r in range(3):
            for c in range(3):
                s = Fraction(0)
                for k in range(3):
                    for l in range(3):
                        s += a[k][r] * P_EXACT[k][l] * a[l][c]
                acc[r][c] += s
    for r in range(3):
        for c in range(3):
            if Fraction(5, 3) * acc[r][c] != P_EXACT[r][c]:
                return False
    return True
