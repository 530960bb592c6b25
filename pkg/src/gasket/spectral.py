"""Stiffness/mass assembly, eigendecomposition, heat semigroup, dual norm.

The level-m operators discretize the Dirichlet form against the uniform
self-similar measure nu (cell mass 3^-m), lumped onto vertices: an
interior vertex touches two cells and carries mass 2*3^-m/3, a corner
touches one and carries 3^-m/3.  With the Dirichlet boundary the basis is
the interior vertex set; the Neumann pair keeps all vertices and has the
constants in its kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ComputationError, ResourceLimitError, UsageError
from .forms import DiscreteFunction, CellField
from .graph import LevelGraph, level_graph
from .kusuoka import KusuokaWeights

#: Dense eigendecomposition cap; |V_7| = 3282 keeps the solve interactive.
MAX_EIGEN_LEVEL = 7


@dataclass
class OperatorPair:
    """Stiffness K and lumped mass M for one level and boundary condition.

    ``basis_ids`` are the graph vertex ids carried by the matrix rows:
    interior vertices for the Dirichlet pair, all vertices for Neumann.
    """

    level: int
    boundary: str
    K: sp.csr_matrix
    M_diag: np.ndarray
    basis_ids: np.ndarray
    _solver: object = field(default=None, repr=False)

    @property
    def n_basis(self) -> int:
        return self.M_diag.shape[0]

    def fnorm_solver(self):
        """Cached factorization of (M + K), the discrete F-norm operator."""
        if self._solver is None:
            a = (self.K + sp.diags(self.M_diag)).tocsc()
            self._solver = spla.factorized(a)
        return self._solver


@dataclass(frozen=True)
class SpectralDecomposition:
    """Generalized eigensystem K phi = lambda M phi, M-orthonormal."""

    level: int
    boundary: str
    eigenvalues: np.ndarray
    phi: np.ndarray  # (n_basis, n_modes), columns M-orthonormal
    M_diag: np.ndarray
    basis_ids: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class HeatKernelSample:
    """Heat kernel values p(t, x, y) on requested vertex pairs."""

    t: float
    pairs: tuple
    values: np.ndarray


def assemble(m: int, boundary: str = "dirichlet",
             max_level: int = MAX_EIGEN_LEVEL) -> OperatorPair:
    """Build the level-m operator pair.

    Raises ResourceLimitError above ``max_level`` (default 7), where dense
    eigendecomposition stops being practical.
    """
    if boundary not in ("dirichlet", "neumann"):
        raise UsageError(f"boundary must be dirichlet or neumann, got {boundary!r}")
    if m > max_level:
        raise ResourceLimitError(
            f"level {m} exceeds the operator-assembly maximum {max_level}"
        )
    g = level_graph(m)
    n = g.n_vertices
    c = (5.0 / 3.0) ** m
    i = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    j = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    off = sp.coo_matrix((-c * np.ones(i.size), (i, j)), shape=(n, n)).tocsr()
    deg = -np.asarray(off.sum(axis=1)).ravel()
    lap = (off + sp.diags(deg)).tocsr()

    mass = np.full(n, 2.0 / 3.0 ** (m + 1))
    mass[list(g.corners)] = 1.0 / 3.0 ** (m + 1)

    if boundary == "dirichlet":
        ids = g.interior_ids
        K = lap[ids][:, ids].tocsr()
        M_diag = mass[ids]
    else:
        ids = np.arange(n)
        K = lap
        M_diag = mass
    return OperatorPair(level=m, boundary=boundary, K=K, M_diag=M_diag,
                        basis_ids=ids)


def eigendecompose(op: OperatorPair) -> SpectralDecomposition:
    """Full generalized eigensystem of (K, M) with a deterministic gauge.

    Solved as the symmetric standard problem D^-1/2 K D^-1/2 with
    D = diag(M); eigenvectors come back M-orthonormal and each is scaled
    so its entry of largest magnitude is positive.
    """
    d = np.sqrt(op.M_diag)
    a = (op.K.multiply(1.0 / d[:, None]).multiply(1.0 / d[None, :])).toarray()
    a = 0.5 * (a + a.T)
    lam, psi = scipy.linalg.eigh(a)
    phi = psi / d[:, None]
    # Deterministic sign: make the largest-magnitude entry positive.
    pick = np.abs(phi).argmax(axis=0)
    signs = np.sign(phi[pick, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    phi = phi * signs[None, :]
    lam = np.maximum(lam, 0.0) if op.boundary == "neumann" else lam

    lam_max = float(lam[-1])
    resid = op.K @ phi - (op.M_diag[:, None] * phi) * lam[None, :]
    worst = float(np.linalg.norm(resid, axis=0).max())
    if worst > 1e-9 * lam_max:
        raise ComputationError(
            f"eigen residual {worst:.3e} exceeds 1e-9 * lambda_max {lam_max:.3e}"
        )
    return SpectralDecomposition(
        level=op.level,
        boundary=op.boundary,
        eigenvalues=lam,
        phi=phi,
        M_diag=op.M_diag.copy(),
        basis_ids=op.basis_ids.copy(),
    )


_DECOMP_CACHE: dict[tuple[int, str], SpectralDecomposition] = {}
_OP_CACHE: dict[tuple[int, str], OperatorPair] = {}


def operator_pair(m: int, boundary: str = "dirichlet") -> OperatorPair:
    """Memoized :func:`assemble`."""
    key = (m, boundary)
    op = _OP_CACHE.get(key)
    if op is None:
        op = assemble(m, boundary)
        _OP_CACHE[key] = op
    return op


def decomposition(m: int, boundary: str = "dirichlet") -> SpectralDecomposition:
    """Memoized eigendecomposition of :func:`operator_pair`."""
    key = (m, boundary)
    sd = _DECOMP_CACHE.get(key)
    if sd is None:
        sd = eigendecompose(operator_pair(m, boundary))
        _DECOMP_CACHE[key] = sd
    return sd


def restrict(sd: SpectralDecomposition, u: DiscreteFunction) -> np.ndarray:
    """Basis-vector view of a vertex function (drops boundary for Dirichlet)."""
    if u.level != sd.level:
        raise UsageError(f"level mismatch: {u.level} vs {sd.level}")
    return u.values[sd.basis_ids]


def prolong(sd: SpectralDecomposition, vec: np.ndarray) -> DiscreteFunction:
    """Vertex function from a basis vector, zero on the Dirichlet boundary."""
    g = level_graph(sd.level)
    out = np.zeros(g.n_vertices)
    out[sd.basis_ids] = vec
    return DiscreteFunction(sd.level, out)


def project_coefficients(sd: SpectralDecomposition, u: DiscreteFunction) -> np.ndarray:
    """Eigenbasis coefficients c_k = phi_k^T M u."""
    vec = restrict(sd, u)
    return sd.phi.T @ (sd.M_diag * vec)


def heat_apply(sd: SpectralDecomposition, t: float,
               psi: DiscreteFunction) -> DiscreteFunction:
    """P_t psi through the eigenbasis; contraction in L2(nu) and sup norm.

    psi is projected to zero boundary values first (the semigroup acts on
    the Dirichlet space).
    """
    if t < 0:
        raise UsageError(f"time must be nonnegative, got {t}")
    if t == 0:
        vals = psi.values.copy()
        g = level_graph(sd.level)
        vals[list(g.corners)] = 0.0
        return DiscreteFunction(sd.level, vals)
    c = project_coefficients(sd, psi)
    vec = sd.phi @ (np.exp(-sd.eigenvalues * t) * c)
    return prolong(sd, vec)


def _phi_at(sd: SpectralDecomposition, x: int) -> np.ndarray:
    g = level_graph(sd.level)
    if not 0 <= x < g.n_vertices:
        raise UsageError(f"vertex id {x} out of range at level {sd.level}")
    pos = np.flatnonzero(sd.basis_ids == x)
    if pos.size == 0:
        return np.zeros(sd.n_modes)
    return sd.phi[pos[0]]


def heat_kernel(sd: SpectralDecomposition, t: float, x: int, y: int) -> float:
    """Pointwise kernel p(t,x,y) = sum_k e^{-lambda_k t} phi_k(x) phi_k(y).

    The discrete kernel is a density with respect to the lumped vertex
    masses, mirroring the continuum kernel against nu.
    """
    if t <= 0:
        raise UsageError(f"time must be positive, got {t}")
    px = _phi_at(sd, x)
    py = px if y == x else _phi_at(sd, y)
    return float(np.exp(-sd.eigenvalues * t) @ (px * py))


def heat_kernel_diagonal(sd: SpectralDecomposition, x: int,
                         times: np.ndarray) -> np.ndarray:
    """p(t, x, x) over many times at once."""
    px2 = _phi_at(sd, x) ** 2
    times = np.asarray(times, dtype=np.float64)
    if np.any(times <= 0):
        raise UsageError("times must be positive")
    return np.exp(-np.outer(times, sd.eigenvalues)) @ px2


def heat_kernel_samples(sd: SpectralDecomposition, t: float,
                        pairs) -> HeatKernelSample:
    """Kernel values on explicit vertex pairs, with a positivity flag."""
    vals = np.array([heat_kernel(sd, t, int(x), int(y)) for x, y in pairs])
    return HeatKernelSample(t=float(t), pairs=tuple(map(tuple, pairs)), values=vals)


def cell_mean_matrix(g: LevelGraph, sd: SpectralDecomposition) -> np.ndarray:
    """Means over cell corners of every eigenvector, shape (3^m, n_modes)."""
    full = np.zeros((g.n_vertices, sd.n_modes))
    full[sd.basis_ids] = sd.phi
    return full[g.cells].mean(axis=1)


def measure_coefficients(sd: SpectralDecomposition, g_cells: CellField,
                         kw: KusuokaWeights) -> np.ndarray:
    """Pairing <g, phi_k>_mu with cell-averaged eigenvectors."""
    if g_cells.level != sd.level or kw.level != sd.level:
        raise UsageError("cell field, weights, and decomposition must share a level")
    g = level_graph(sd.level)
    phis = cell_mean_matrix(g, sd)
    return phis.T @ (kw.values * g_cells.values)


def heat_apply_measure(sd: SpectralDecomposition, t: float, g_cells: CellField,
                       kw: KusuokaWeights) -> DiscreteFunction:
    """P_t applied to the measure g d(mu): smooth for every t > 0.

    Coefficients pair g against cell means of the eigenvectors with the
    exact cell masses; the t -> 0 limit is a measure rather than a
    function, so t must stay positive.
    """
    if t <= 0:
        raise UsageError(f"time must be positive for measure smoothing, got {t}")
    c = measure_coefficients(sd, g_cells, kw)
    vec = sd.phi @ (np.exp(-sd.eigenvalues * t) * c)
    return prolong(sd, vec)


def resolvent_kernel(sd: SpectralDecomposition, alpha: float, x: int, y: int) -> float:
    """rho_alpha(x,y) = sum_k phi_k(x) phi_k(y) / (alpha + lambda_k)."""
    if alpha <= 0:
        raise UsageError(f"alpha must be positive, got {alpha}")
    px = _phi_at(sd, x)
    py = px if y == x else _phi_at(sd, y)
    return float((px * py / (alpha + sd.eigenvalues)).sum())


def dual_norm(op: OperatorPair, v: DiscreteFunction) -> float:
    """Discrete dual norm sqrt(v^T M (M+K)^-1 M v) of the F-norm.

    This is the exact finite-dimensional version of the norm dual to
    ||u||^2 = ||u||_{L2(nu)}^2 + E(u) on the Dirichlet space.
    """
    if op.boundary != "dirichlet":
        raise UsageError("dual norm is defined against the Dirichlet pair")
    if v.level != op.level:
        raise UsageError(f"level mismatch: {v.level} vs {op.level}")
    mv = op.M_diag * v.values[op.basis_ids]
    w = op.fnorm_solver()(mv)
    val = float(mv @ w)
    if val < -1e-12:
        raise ComputationError("dual norm produced a negative square")
    return float(np.sqrt(max(val, 0.0)))
