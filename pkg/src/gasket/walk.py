"""Killed continuous-time random walk and Feynman-Kac estimators.

The level-m chain has generator M^-1 K: every vertex departs at rate
6 * 5^m (the (5/3)^m conductances over the 3^-m masses) and jumps to a
uniformly random neighbor.  With the Dirichlet form the walk is killed on
arrival at a corner; with the Neumann form it reflects through the
corner's two neighbors.  Occupation integrals against the Kusuoka
measure use the lumped density rho = mu_lumped / nu_lumped, which is
exact for the fixed-level chain.

All randomness comes from per-path splitmix64 streams seeded as
mix(master_seed + (index + 1) * GOLDEN), so any path is reproducible in
isolation and estimates do not depend on worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, UsageError
from .graph import level_graph
from .kusuoka import kusuoka_weights, worker_count

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_U = np.uint64
_INV53 = 2.0**-53


def _mix64_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def _seed_states(master_seed: int, i0: int, i1: int) -> np.ndarray:
    idx = np.arange(i0 + 1, i1 + 1, dtype=np.uint64)
    return _mix64(_U(master_seed & _MASK64) + idx * _U(_GOLDEN))


@dataclass(frozen=True)
class WalkConfig:
    """Path count, seed and level for one family of walks."""

    level: int
    n_paths: int = 10_000
    master_seed: int = 2024
    workers: int | None = None

    def __post_init__(self):
        if self.n_paths <= 0:
            raise UsageError("n_paths must be positive")
        if not 0 <= self.level <= 12:
            raise UsageError("level out of range")


@dataclass(frozen=True)
class PCAFWeights:
    """Lumped Kusuoka density rho = mu_lumped / nu_lumped per vertex.

    ``mu_numerators`` holds the integer cell-weight sums per vertex with
    denominator 3 * 2 * 135^m, so the total-mass identity
    sum_x rho(x) nu_lumped(x) = 1 is exact in integer arithmetic.
    """

    level: int
    rho: np.ndarray
    nu_lumped: np.ndarray
    mu_lumped: np.ndarray
    mu_numerators: tuple
    denominator: int


def pcaf_weights(m: int) -> PCAFWeights:
    """Per-vertex occupation density of the Kusuoka measure at level m."""
    g = level_graph(m)
    kw = kusuoka_weights(m)
    n = g.n_vertices
    num = np.zeros(n, dtype=object)
    cell_nums = kw.numerators
    for w_idx in range(g.cells.shape[0]):
        for v in g.cells[w_idx]:
            num[v] += cell_nums[w_idx]
    denom = 3 * kw.denominator
    mu_lumped = np.array([float(x) / denom for x in num])
    nu_lumped = np.full(n, 2.0 / 3 ** (m + 1))
    nu_lumped[list(g.corners)] = 1.0 / 3 ** (m + 1)
    rho = mu_lumped / nu_lumped
    return PCAFWeights(m, rho, nu_lumped, mu_lumped,
                       tuple(int(x) for x in num), denom)


def jump_rate(m: int) -> float:
    """Departure rate K_xx / M_xx, identical at every vertex."""
    return 6.0 * 5.0**m


@dataclass(frozen=True)
class WalkPath:
    """One trajectory: states visited, jump times, and the killing time."""

    level: int
    states: tuple
    jump_times: tuple
    killing_time: float
    killed: bool


def simulate_killed_path(cfg: WalkConfig, x0: int, T: float,
                         path_index: int = 0,
                         boundary: str = "dirichlet") -> WalkPath:
    """Reference single-path simulator (pure Python, integer-exact RNG).

    Draw order per step: holding time first, then the jump direction only
    if the jump happens before T.  The vectorized estimators consume the
    same stream, so path ``path_index`` here reproduces their draws.
    """
    g = level_graph(cfg.level)
    if boundary not in ("dirichlet", "neumann"):
        raise UsageError(f"unknown boundary {boundary!r}")
    if boundary == "dirichlet" and g.boundary_mask[x0]:
        raise UsageError("killed walk cannot start on the boundary")
    nbrs, degree = g.neighbor_table()
    rate = jump_rate(cfg.level)
    state = _mix64_py((cfg.master_seed + (path_index + 1) * _GOLDEN) & _MASK64)
    t = 0.0
    pos = x0
    states = [x0]
    times = [0.0]
    while True:
        state = (state + _GOLDEN) & _MASK64
        u = (_mix64_py(state) >> 11) * _INV53
        t_new = t + (-math.log1p(-u) / rate)
        if t_new > T:
            return WalkPath(cfg.level, tuple(states), tuple(times), T, False)
        state = (state + _GOLDEN) & _MASK64
        z = _mix64_py(state)
        k = ((z >> 32) * int(degree[pos])) >> 32
        pos = int(nbrs[pos, k])
        t = t_new
        states.append(pos)
        times.append(t)
        if boundary == "dirichlet" and g.boundary_mask[pos]:
            return WalkPath(cfg.level, tuple(states), tuple(times), t, True)


def _interp_rows(times: np.ndarray, rows: np.ndarray, t: np.ndarray,
                 pos: np.ndarray) -> np.ndarray:
    """Linear time interpolation of per-vertex rows at (t, pos) pairs."""
    j = np.clip(np.searchsorted(times, t, side="right") - 1, 0,
                times.shape[0] - 2)
    w = (t - times[j]) / (times[j + 1] - times[j])
    lo = rows[j, pos]
    hi = rows[j + 1, pos]
    return lo + w * (hi - lo)


def _walk_chunk(args: tuple) -> np.ndarray:
    """Per-path functionals for a contiguous index range of walks.

    mode 'heat': psi(X_T) on survival, 0 on killing.
    mode 'pcaf': integral of G(T - s, X_s) rho(X_s) ds up to killing or T
    (G evaluated at the sojourn's midpoint time; exact for static G).
    """
    (level, boundary, x0, T, master_seed, i0, i1, mode,
     psi_vals, rho, g_times, g_rows) = args
    g = level_graph(level)
    nbrs_, degree_ = g.neighbor_table()
    nbrs = nbrs_.astype(np.intp)
    deg_u = degree_.astype(np.uint64)
    bmask = g.boundary_mask
    rate = jump_rate(level)
    n = i1 - i0
    states = _seed_states(master_seed, i0, i1)
    pos = np.full(n, x0, dtype=np.intp)
    t = np.zeros(n)
    out = np.zeros(n)
    idx = np.arange(n)
    static_g = g_times is None
    while idx.size:
        states += _U(_GOLDEN)
        u = (_mix64(states) >> _U(11)).astype(np.float64) * _INV53
        t_new = t + (-np.log1p(-u) / rate)
        over = t_new > T
        if mode == "pcaf":
            seg_end = np.minimum(t_new, T)
            seg = (seg_end - t) * rho[pos]
            if not static_g:
                mid = T - 0.5 * (t + seg_end)
                seg = seg * _interp_rows(g_times, g_rows, mid, pos)
            elif g_rows is not None:
                seg = seg * g_rows[pos]
            out[idx] += seg
        if over.any():
            if mode == "heat":
                done = idx[over]
                out[done] = psi_vals[pos[over]]
            keep = ~over
            idx = idx[keep]
            states = states[keep]
            pos = pos[keep]
            t_new = t_new[keep]
        if not idx.size:
            break
        states += _U(_GOLDEN)
        z = _mix64(states)
        k = ((z >> _U(32)) * deg_u[pos]) >> _U(32)
        pos = nbrs[pos, k.astype(np.intp)]
        t = t_new
        if boundary == "dirichlet":
            dead = bmask[pos]
            if dead.any():
                keep = ~dead
                idx = idx[keep]
                states = states[keep]
                pos = pos[keep]
                t = t[keep]
    return out


def _run_paths(cfg: WalkConfig, boundary: str, x0: int, T: float, mode: str,
               psi_vals=None, rho=None, g_times=None, g_rows=None) -> np.ndarray:
    """Per-path functional values for all cfg.n_paths walks.

    Work is split into contiguous chunks merged in index order, so the
    result is independent of the worker count.
    """
    workers = cfg.workers if cfg.workers is not None else worker_count()
    n = cfg.n_paths
    base = (cfg.level, boundary, x0, T, cfg.master_seed)
    tail = (mode, psi_vals, rho, g_times, g_rows)
    if workers <= 1 or n < 4096:
        return _walk_chunk(base + (0, n) + tail)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    tasks = [base + (int(a), int(b)) + tail
             for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_walk_chunk, tasks))
    return np.concatenate(parts)


def _mean_stderr(vals: np.ndarray) -> tuple[float, float]:
    mean = float(vals.mean())
    if vals.size < 2:
        return mean, float("nan")
    return mean, float(vals.std(ddof=1) / math.sqrt(vals.size))


def fk_heat(cfg: WalkConfig, x0: int, T: float, psi) -> dict:
    """MC estimate of E[psi(X_T); T < sigma] for the killed walk.

    The chain is exact for the level-m generator, so the estimator is
    unbiased for the spectral heat flow at the same level.
    """
    g = level_graph(cfg.level)
    psi_vals = np.asarray(psi.values if hasattr(psi, "values") else psi,
                          dtype=np.float64)
    if psi_vals.shape != (g.n_vertices,):
        raise UsageError("psi has the wrong length for this level")
    if np.abs(psi_vals[list(g.corners)]).max() > 1e-12:
        raise UsageError("psi must vanish on the boundary")
    if g.boundary_mask[x0]:
        raise UsageError("x0 must be interior")
    if T < 0:
        raise UsageError("T must be nonnegative")
    if T == 0:
        return {"estimate": float(psi_vals[x0]), "stderr": 0.0,
                "n_paths": cfg.n_paths, "mode": "heat"}
    vals = _run_paths(cfg, "dirichlet", x0, T, "heat", psi_vals=psi_vals)
    est, se = _mean_stderr(vals)
    return {"estimate": est, "stderr": se, "n_paths": cfg.n_paths,
            "mode": "heat"}


def _vertex_density(level: int, g_cells: np.ndarray, pw: PCAFWeights) -> np.ndarray:
    """Cell field -> vertex field G with <G, v>_mu_lumped = <g, v>_mu.

    G(x) is the mu-weighted mean of g over the cells containing x, so
    occupation integrals of G rho reproduce the cell pairing used by the
    singular-measure convolution exactly in expectation.
    """
    g = level_graph(level)
    kw = kusuoka_weights(level)
    acc = np.zeros(g.n_vertices)
    w = kw.values / 3.0
    for c in range(3):
        np.add.at(acc, g.cells[:, c], g_cells * w)
    return acc / pw.mu_lumped


def fk_source(cfg: WalkConfig, x0: int, T: float, g_cells=None,
              grid_times=None, weights: PCAFWeights | None = None) -> dict:
    """MC estimate of the killed-walk occupation integral of a source.

    Estimates E[int_0^{sigma^(T)} g(T - s, X_s) dA_s] with dA = rho ds.
    ``g_cells`` is a per-cell field: None means g = 1, a (3^m,) array a
    static source, and an (n_times, 3^m) array with ``grid_times`` a
    time-dependent one interpolated linearly and sampled at each
    sojourn's midpoint.  In expectation this matches the spectral
    convolution of g d(mu) evaluated at (T, x0).
    """
    g = level_graph(cfg.level)
    if g.boundary_mask[x0]:
        raise UsageError("x0 must be interior")
    if T <= 0:
        raise UsageError("T must be positive")
    pw = weights if weights is not None else pcaf_weights(cfg.level)
    g_times = None
    if g_cells is None:
        g_rows = None
    else:
        arr = np.asarray(g_cells, dtype=np.float64)
        if arr.ndim == 1:
            g_rows = _vertex_density(cfg.level, arr, pw)
        elif arr.ndim == 2:
            if grid_times is None:
                raise UsageError("time-dependent source needs grid_times")
            g_times = np.asarray(grid_times, dtype=np.float64)
            if g_times.shape[0] != arr.shape[0]:
                raise UsageError("grid_times length mismatch")
            g_rows = np.stack([_vertex_density(cfg.level, row, pw)
                               for row in arr])
        else:
            raise UsageError("g_cells must be 1- or 2-dimensional")
    vals = _run_paths(cfg, "dirichlet", x0, T, "pcaf", rho=pw.rho,
                      g_times=g_times, g_rows=g_rows)
    est, se = _mean_stderr(vals)
    return {"estimate": est, "stderr": se, "n_paths": cfg.n_paths,
            "mode": "source"}


def qv_exponential_moment(cfg: WalkConfig, beta: float, T: float,
                          x0: int | None = None) -> dict:
    """MC estimate of E[exp(beta A_T)] for the unkilled (Neumann) walk.

    A_T is the Kusuoka occupation functional; its exponential moments
    stay bounded across levels.  Raises when beta * A_T would overflow,
    reporting the sample quantile at which the guard sits.
    """
    if T < 0:
        raise UsageError("T must be nonnegative")
    if x0 is None:
        x0 = 0
    pw = pcaf_weights(cfg.level)
    a_vals = _run_paths(cfg, "neumann", x0, T, "pcaf", rho=pw.rho)
    arg = beta * a_vals
    top = float(arg.max()) if arg.size else 0.0
    if top > 700.0:
        q = float((arg <= 700.0).mean())
        raise ComputationError(
            f"exponential moment overflows: beta*A_T reaches {top:.1f}; "
            f"guard at the {q:.4f} sample quantile"
        )
    vals = np.exp(arg)
    est, se = _mean_stderr(vals)
    return {"estimate": est, "stderr": se, "n_paths": cfg.n_paths,
            "mode": "expmoment", "beta": beta, "A_mean": float(a_vals.mean())}


def occupation_distance(cfg: WalkConfig, T: float, x0: int = 0) -> float:
    """Chi-square distance of the time-occupation law to nu_lumped.

    Runs cfg.n_paths unkilled walks to horizon T, accumulates the time
    spent at each vertex, and compares the normalized occupation vector
    with the reversing measure.  The distance shrinks as T grows.
    """
    g = level_graph(cfg.level)
    nbrs_, degree_ = g.neighbor_table()
    nbrs = nbrs_.astype(np.intp)
    deg_u = degree_.astype(np.uint64)
    rate = jump_rate(cfg.level)
    occ = np.zeros(g.n_vertices)
    n = cfg.n_paths
    states = _seed_states(cfg.master_seed, 0, n)
    pos = np.full(n, x0, dtype=np.intp)
    t = np.zeros(n)
    idx = np.arange(n)
    while idx.size:
        states += _U(_GOLDEN)
        u = (_mix64(states) >> _U(11)).astype(np.float64) * _INV53
        t_new = t + (-np.log1p(-u) / rate)
        np.add.at(occ, pos, np.minimum(t_new, T) - t)
        over = t_new > T
        if over.any():
            keep = ~over
            idx = idx[keep]
            states = states[keep]
            pos = pos[keep]
            t_new = t_new[keep]
        if not idx.size:
            break
        states += _U(_GOLDEN)
        z = _mix64(states)
        k = ((z >> _U(32)) * deg_u[pos]) >> _U(32)
        pos = nbrs[pos, k.astype(np.intp)]
        t = t_new
    occ /= occ.sum()
    nu = np.full(g.n_vertices, 2.0 / 3 ** (cfg.level + 1))
    nu[list(g.corners)] = 1.0 / 3 ** (cfg.level + 1)
    return float(((occ - nu) ** 2 / nu).sum())
