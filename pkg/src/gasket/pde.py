"""Parabolic solvers driven by measure-valued sources.

The linear problem u' = Lu + g mu with zero boundary values is solved in
the Dirichlet eigenbasis by an exponential integrator: per mode, the
Duhamel convolution integral is evaluated in closed form for source
coefficients interpolated linearly between grid times.  The kernel decay
e^{-lambda t} is treated exactly, so stiffness (lambda_max ~ 5^m) costs
nothing.  Semi-linear problems f(t, x, u, grad u) iterate this solver in
Picard fashion with the nonlinearity sampled at cell resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ComputationError, UsageError
from .forms import CellField, DiscreteFunction, reference_harmonic
from .graph import level_graph
from .kusuoka import KusuokaWeights
from .spectral import (
    SpectralDecomposition,
    cell_mean_matrix,
    operator_pair,
    project_coefficients,
)

DEFAULT_STEPS = 256


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times 0 = t_0 < ... < t_N = T."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.shape[0] < 3:
            raise UsageError("grid needs at least 3 times (N >= 2)")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise UsageError("times must start at 0 and strictly increase")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.times)


def uniform_grid(T: float, n_steps: int | None = None) -> TimeGrid:
    """Uniform grid; N defaults to 256 on horizons up to 1."""
    if T <= 0:
        raise UsageError(f"horizon must be positive, got {T}")
    if n_steps is None:
        n_steps = DEFAULT_STEPS if T <= 1.0 else int(math.ceil(DEFAULT_STEPS * T))
    if n_steps < 2:
        raise UsageError("need at least 2 steps")
    return TimeGrid(np.linspace(0.0, T, n_steps + 1))


class SourceFunction:
    """Nonlinearity f(t, cell, y, z) with a declared Lipschitz constant.

    ``evaluator(t, y, z)`` receives the full cell arrays of means y and
    gradients z (the cell index is the array position) and returns the
    per-cell source values.  ``lipschitz_K`` bounds the joint (y, z)
    Lipschitz constant; it is spot-checked on random probes, not proved.
    """

    def __init__(self, evaluator, lipschitz_K: float, name: str = "custom"):
        if lipschitz_K < 0:
            raise UsageError("Lipschitz constant must be nonnegative")
        self.evaluator = evaluator
        self.lipschitz_K = float(lipschitz_K)
        self.name = name

    def __call__(self, t: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        out = np.asarray(self.evaluator(t, y, z), dtype=np.float64)
        if out.shape != y.shape:
            raise ComputationError(
                f"source {self.name} returned shape {out.shape}, expected {y.shape}"
            )
        return out

    def f0_norm(self, kw: KusuokaWeights, grid: TimeGrid) -> float:
        """||f(.,0,0)|| in L2(0,T; L2(mu)) by trapezoid quadrature."""
        zero = np.zeros(3**kw.level)
        sq = [float((self(t, zero, zero) ** 2) @ kw.values) for t in grid.times]
        return float(math.sqrt(np.trapezoid(sq, grid.times)))

    def check_lipschitz(self, level: int, grid: TimeGrid, seed: int = 11,
                        n_probes: int = 64, slack: float = 1e-9) -> None:
        """Assert the declared constant on random probes."""
        rng = np.random.default_rng(seed)
        n = 3**level
        for _ in range(n_probes):
            t = float(rng.uniform(0.0, grid.T))
            y, yp = rng.standard_normal((2, n))
            z, zp = rng.standard_normal((2, n))
            lhs = np.abs(self(t, y, z) - self(t, yp, zp))
            rhs = self.lipschitz_K * (np.abs(y - yp) + np.abs(z - zp))
            if np.any(lhs > rhs + slack):
                raise UsageError(
                    f"source {self.name} violates its declared Lipschitz "
                    f"constant {self.lipschitz_K}"
                )


def source_zero() -> SourceFunction:
    return SourceFunction(lambda t, y, z: np.zeros_like(y), 0.0, "zero")


def source_sincos(scale: float = 1.0) -> SourceFunction:
    """f(t,y,z) = scale * (sin y + cos z); Lipschitz constant = scale."""
    return SourceFunction(
        lambda t, y, z: scale * (np.sin(y) + np.cos(z)),
        abs(scale),
        f"sincos[{scale}]",
    )


def source_constant(value: float = 1.0) -> SourceFunction:
    return SourceFunction(
        lambda t, y, z: np.full_like(y, value), 0.0, f"const[{value}]"
    )


def center_bump(level: int, scale: float = 1.0) -> DiscreteFunction:
    """Symmetric initial data: 1 at the three V_1 midpoints, 0 on V_0.

    Harmonic extension keeps values in [0, 1]; the sup norm is exactly
    ``scale``.
    """
    from .forms import harmonic_extend  # local: avoid import cycle noise

    g1 = level_graph(1)
    vals = np.full(g1.n_vertices, scale, dtype=np.float64)
    vals[[g1.corners[0], g1.corners[1], g1.corners[2]]] = 0.0
    return harmonic_extend(DiscreteFunction(1, vals), level)


def mirror_permutation(level: int) -> np.ndarray:
    """Vertex permutation of the reflection fixing q0 and swapping q1, q2.

    In lattice coordinates the reflection exchanges the two axes:
    (a, b) -> (b, a).
    """
    g = level_graph(level)
    perm = np.empty(g.n_vertices, dtype=np.int64)
    for i, (a, b) in enumerate(g.lattice):
        perm[i] = g.vertex_id((int(b), int(a)))
    return perm


def antisymmetric_data(level: int, scale: float = 1.0) -> DiscreteFunction:
    """Initial data odd under the q1 <-> q2 reflection, zero on V_0.

    Values +scale and -scale at the two V_1 midpoints adjacent to q0,
    zero at the opposite midpoint and the corners, harmonically extended.
    """
    from .forms import harmonic_extend

    g1 = level_graph(1)
    vals = np.zeros(g1.n_vertices)
    vals[g1.vertex_id((1, 0))] = scale
    vals[g1.vertex_id((0, 1))] = -scale
    return harmonic_extend(DiscreteFunction(1, vals), level)


@dataclass(frozen=True)
class PDESolution:
    """Grid-indexed solution values, gradients, and diagnostics."""

    level: int
    grid: TimeGrid
    u: np.ndarray       # (N+1, n_vertices)
    grad: np.ndarray    # (N+1, 3^level)
    coeffs: np.ndarray  # (N+1, n_modes) eigenbasis coefficients
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        g = level_graph(self.level)
        if self.u.shape != (self.grid.times.shape[0], g.n_vertices):
            raise UsageError(f"solution array has shape {self.u.shape}")
        if np.abs(self.u[:, list(g.corners)]).max() > 1e-12:
            raise ComputationError("solution violates zero boundary values")

    def function_at(self, n: int) -> DiscreteFunction:
        return DiscreteFunction(self.level, self.u[n])

    def grad_at(self, n: int) -> CellField:
        return CellField(self.level, self.grad[n])


def _exp_integrator_weights(lam: np.ndarray, dt: float):
    """e^{-lam dt}, I0 = int e^{-lam s} ds, I1 = int e^{-lam(dt-s)} s ds.

    Series evaluation below lam*dt = 1e-4 avoids cancellation; closed
    forms are exact elsewhere.  Exact for source data linear in time.
    """
    z = lam * dt
    decay = np.exp(-z)
    i0 = np.empty_like(z)
    i1 = np.empty_like(z)
    big = z >= 1e-4
    i0[big] = -np.expm1(-z[big]) / lam[big]
    i1[big] = (dt - i0[big]) / lam[big]
    zs = z[~big]
    i0[~big] = dt * (1.0 - zs / 2.0 + zs**2 / 6.0 - zs**3 / 24.0)
    i1[~big] = dt**2 * (0.5 - zs / 6.0 + zs**2 / 24.0 - zs**3 / 120.0)
    return decay, i0, i1


def duhamel_coefficients(sd: SpectralDecomposition, g_coeffs: np.ndarray,
                         grid: TimeGrid) -> np.ndarray:
    """Convolution coefficients c_k(t_n) for mode sources g_coeffs[n, k].

    Marches c <- e^{-lam dt} c + g_n I0 + (g_{n+1} - g_n)/dt * I1, the
    exact update for per-step linear interpolation of the source.
    """
    n_times = grid.times.shape[0]
    if g_coeffs.shape != (n_times, sd.n_modes):
        raise UsageError(f"source coefficients have shape {g_coeffs.shape}")
    out = np.zeros_like(g_coeffs)
    lam = sd.eigenvalues
    dts = grid.dts
    uniform = np.allclose(dts, dts[0], rtol=1e-12, atol=0.0)
    if uniform:
        decay, i0, i1 = _exp_integrator_weights(lam, float(dts[0]))
    for n in range(n_times - 1):
        dt = float(dts[n])
        if not uniform:
            decay, i0, i1 = _exp_integrator_weights(lam, dt)
        slope = (g_coeffs[n + 1] - g_coeffs[n]) / dt
        out[n + 1] = decay * out[n] + i0 * g_coeffs[n] + i1 * slope
    return out


def _measure_coefficient_matrix(sd: SpectralDecomposition,
                                kw: KusuokaWeights) -> np.ndarray:
    """Matrix taking cell source values to mode pairings <g, phi_k>_mu."""
    g = level_graph(sd.level)
    phis = cell_mean_matrix(g, sd)
    return (phis * kw.values[:, None]).T  # (n_modes, 3^m)


def _as_cell_array(g_cells, level: int, n_times: int) -> np.ndarray:
    if g_cells is None:
        return np.zeros((n_times, 3**level))
    if isinstance(g_cells, np.ndarray):
        arr = np.asarray(g_cells, dtype=np.float64)
    else:
        arr = np.stack([
            cf.values if isinstance(cf, CellField) else np.asarray(cf, float)
            for cf in g_cells
        ])
    if arr.shape != (n_times, 3**level):
        raise UsageError(f"cell sources have shape {arr.shape}")
    return arr


def duhamel(sd: SpectralDecomposition, kw: KusuokaWeights, g_cells,
            grid: TimeGrid) -> list[DiscreteFunction]:
    """Time-indexed convolution of cell sources carried by the measure.

    ``g_cells`` holds one cell array (or CellField) per grid time; entry n
    of the result approximates the integral of P_{t_n - s}(g(s) mu) over
    [0, t_n], starting from zero.
    """
    arr = _as_cell_array(g_cells, sd.level, grid.times.shape[0])
    gk = arr @ _measure_coefficient_matrix(sd, kw).T
    coeffs = duhamel_coefficients(sd, gk, grid)
    g = level_graph(sd.level)
    full = np.zeros((coeffs.shape[0], g.n_vertices))
    full[:, sd.basis_ids] = coeffs @ sd.phi.T
    return [DiscreteFunction(sd.level, row) for row in full]


class _GradStack:
    """Vectorized per-cell gradients for many time slices at once."""

    def __init__(self, level: int, kw: KusuokaWeights):
        g = level_graph(level)
        h = reference_harmonic(level)
        dh = h.values[g.edges[:, 0]] - h.values[g.edges[:, 1]]
        scale = (5.0 / 3.0) ** level
        e_h = scale * (dh**2).reshape(-1, 3).sum(axis=1)
        if np.any(e_h <= 0) or np.any(kw.values <= 0):
            raise ComputationError("reference measure vanishes on a cell")
        self.e0 = g.edges[:, 0]
        self.e1 = g.edges[:, 1]
        self.dh = dh
        self.scale = scale
        self.denom = np.sqrt(e_h * kw.values)
        self.cells = g.cells

    def __call__(self, u_rows: np.ndarray) -> np.ndarray:
        du = u_rows[:, self.e0] - u_rows[:, self.e1]
        e_uh = self.scale * (du * self.dh).reshape(u_rows.shape[0], -1, 3).sum(axis=2)
        return e_uh / self.denom


def _trapezoid(values: np.ndarray, times: np.ndarray) -> float:
    return float(np.trapezoid(values, times))


def _solution_from_coeffs(sd: SpectralDecomposition, kw: KusuokaWeights,
                          grid: TimeGrid, coeffs: np.ndarray,
                          diagnostics: dict) -> PDESolution:
    g = level_graph(sd.level)
    u = np.zeros((coeffs.shape[0], g.n_vertices))
    u[:, sd.basis_ids] = coeffs @ sd.phi.T
    grad = _GradStack(sd.level, kw)(u)
    return PDESolution(level=sd.level, grid=grid, u=u, grad=grad,
                       coeffs=coeffs, diagnostics=diagnostics)


def _norms_from_coeffs(sd: SpectralDecomposition, grid: TimeGrid,
                       coeffs: np.ndarray) -> dict:
    l2 = np.sqrt((coeffs**2).sum(axis=1))
    en = (coeffs**2 * sd.eigenvalues[None, :]).sum(axis=1)
    fsq = l2**2 + en
    dt_c = np.diff(coeffs, axis=0) / grid.dts[:, None]
    dual_sq = (dt_c**2 / (1.0 + sd.eigenvalues)[None, :]).sum(axis=1)
    return {
        "sup_l2": float(l2.max()),
        "l2_energy": _trapezoid(en, grid.times),
        "l2F_sq": _trapezoid(fsq, grid.times),
        "dual_dt_sq": float((dual_sq * grid.dts).sum()),
        "l2_path": l2,
        "energy_path": en,
    }


def solve_linear(sd: SpectralDecomposition, kw: KusuokaWeights,
                 psi: DiscreteFunction, g_cells, grid: TimeGrid) -> PDESolution:
    """Heat flow from psi plus the Duhamel convolution of the source.

    ``g_cells`` may be None (pure heat flow), an (N+1, 3^m) array, or a
    list of CellField entries.  The solution is linear in (psi, g).
    """
    gph = level_graph(sd.level)
    if np.abs(psi.values[list(gph.corners)]).max() > 1e-12:
        raise UsageError("initial data must vanish on the boundary")
    arr = _as_cell_array(g_cells, sd.level, grid.times.shape[0])
    gk = arr @ _measure_coefficient_matrix(sd, kw).T
    conv = duhamel_coefficients(sd, gk, grid)
    c0 = project_coefficients(sd, psi)
    heat = np.exp(-np.outer(grid.times, sd.eigenvalues)) * c0[None, :]
    coeffs = heat + conv
    # Keep the exact initial data at t0 (heat projection loses only the
    # boundary component, which is zero here).
    diagnostics = {"norms": _norms_from_coeffs(sd, grid, coeffs)}
    sol = _solution_from_coeffs(sd, kw, grid, coeffs, diagnostics)
    sol.u[0] = psi.values
    sol.u[0][list(gph.corners)] = 0.0
    return sol


def solve_semilinear(sd: SpectralDecomposition, kw: KusuokaWeights,
                     psi: DiscreteFunction, f: SourceFunction, grid: TimeGrid,
                     tol: float = 1e-8, max_iter: int = 60) -> PDESolution:
    """Picard iteration for u' = Lu + f(t, x, u, grad u) mu.

    Starts from the heat flow, resolves the source at cell resolution
    (cell means for y, cell gradients for z), and iterates the linear
    solver until the distance sup_t ||du||_{L2(nu)} + (int E(du) dt)^(1/2)
    drops below ``tol``.  Raises on non-convergence with the distance log
    attached.
    """
    f.check_lipschitz(sd.level, grid)
    gph = level_graph(sd.level)
    if np.abs(psi.values[list(gph.corners)]).max() > 1e-12:
        raise UsageError("initial data must vanish on the boundary")
    n_times = grid.times.shape[0]
    grad_stack = _GradStack(sd.level, kw)
    meas_mat = _measure_coefficient_matrix(sd, kw)

    c0 = project_coefficients(sd, psi)
    heat = np.exp(-np.outer(grid.times, sd.eigenvalues)) * c0[None, :]
    coeffs = heat.copy()
    u_rows = np.zeros((n_times, gph.n_vertices))
    u_rows[:, sd.basis_ids] = coeffs @ sd.phi.T
    grads = grad_stack(u_rows)
    cells = gph.cells

    distances: list[float] = []
    for it in range(1, max_iter + 1):
        ybar = u_rows[:, cells].mean(axis=2)
        g_arr = np.empty((n_times, 3**sd.level))
        for n, t in enumerate(grid.times):
            g_arr[n] = f(float(t), ybar[n], grads[n])
        gk = g_arr @ meas_mat.T
        new_coeffs = heat + duhamel_coefficients(sd, gk, grid)
        dc = new_coeffs - coeffs
        sup_l2 = float(np.sqrt((dc**2).sum(axis=1)).max())
        den = _trapezoid((dc**2 * sd.eigenvalues[None, :]).sum(axis=1), grid.times)
        dist = sup_l2 + math.sqrt(max(den, 0.0))
        distances.append(dist)
        coeffs = new_coeffs
        u_rows = np.zeros((n_times, gph.n_vertices))
        u_rows[:, sd.basis_ids] = coeffs @ sd.phi.T
        grads = grad_stack(u_rows)
        if dist < tol:
            break
    else:
        raise ComputationError(
            "Picard iteration did not converge within "
            f"{max_iter} iterations; distances: "
            + ", ".join(f"{d:.3e}" for d in distances)
        )

    diagnostics = {
        "picard_distances": distances,
        "iterations": len(distances),
        "f0_norm": f.f0_norm(kw, grid),
        "lipschitz_K": f.lipschitz_K,
        "norms": _norms_from_coeffs(sd, grid, coeffs),
    }
    sol = _solution_from_coeffs(sd, kw, grid, coeffs, diagnostics)
    sol.u[0] = psi.values
    sol.u[0][list(gph.corners)] = 0.0
    sol.grad[0] = grad_stack(sol.u[0][None, :])[0]
    return sol


def energy_report(sol: PDESolution) -> dict:
    """The three norms controlling the solution class.

    sup-L2(nu), the squared L2(0,T;F) norm, and the squared dual norm of
    the forward time differences, all by trapezoid (rectangle for the
    derivative) quadrature in the eigenbasis.
    """
    from .spectral import decomposition  # cached

    sd = decomposition(sol.level, "dirichlet")
    norms = _norms_from_coeffs(sd, sol.grid, sol.coeffs)
    return {
        "sup_l2": norms["sup_l2"],
        "l2F_sq": norms["l2F_sq"],
        "dual_dt_sq": norms["dual_dt_sq"],
        "l2F": math.sqrt(max(norms["l2F_sq"], 0.0)),
        "dual_dt": math.sqrt(max(norms["dual_dt_sq"], 0.0)),
        "energy_path": norms["energy_path"],
        "l2_path": norms["l2_path"],
    }


def holder_report(sol: PDESolution, pairs: np.ndarray,
                  resistances: np.ndarray, theta: float = 0.45,
                  delta_cap: float | None = None) -> dict:
    """Fitted time and space regularity exponents of a solution.

    Time: regress log of D(delta) = max over grid times t in [T/4, T -
    delta] of the sup-norm increment |u(t+delta) - u(t)| against log
    delta over dyadic multiples of the step, keeping delta at or below
    ``delta_cap`` (default T/32; larger increments saturate once delta
    passes the slowest spectral time scale and would flatten the fit).
    Space: at the final time, regress log |u(x) - u(y)| against
    log R(x, y) over the supplied vertex pairs (pairs with increments
    below 1e-13 of the range are dropped as exact symmetries).  The
    Holder quotient max D(delta)/delta^theta runs over the whole window.
    """
    times = sol.grid.times
    T = sol.grid.T
    if delta_cap is None:
        delta_cap = T / 32.0
    n0 = int(np.searchsorted(times, T / 4.0))
    base_dt = float(times[1] - times[0])
    deltas, incs = [], []
    j = 0
    while True:
        step = base_dt * (1 << j)
        if T / 4.0 + step > T or j > 40:
            break
        k = 1 << j
        window = sol.u[n0:]
        if window.shape[0] <= k:
            break
        diff = np.abs(window[k:] - window[:-k]).max()
        deltas.append(step)
        incs.append(float(diff))
        j += 1
    if len(deltas) < 3 or max(incs) == 0.0:
        raise ComputationError("degenerate solution: no usable time increments")
    n_fit = max(3, sum(1 for d in deltas if d <= delta_cap))
    logs_d = np.log(deltas[:n_fit])
    logs_i = np.log(np.maximum(incs[:n_fit], 1e-300))
    time_slope = float(np.polyfit(logs_d, logs_i, 1)[0])
    quotient = float(max(i / d**theta for d, i in zip(deltas, incs)))

    final = sol.u[-1]
    dvals = np.abs(final[pairs[:, 0]] - final[pairs[:, 1]])
    scale = float(np.abs(final).max())
    keep = dvals > 1e-13 * max(scale, 1.0)
    if keep.sum() < 8:
        raise ComputationError("degenerate solution: too few usable vertex pairs")
    space_slope = float(np.polyfit(np.log(resistances[keep]),
                                   np.log(dvals[keep]), 1)[0])
    return {
        "time_exponent": time_slope,
        "space_exponent": space_slope,
        "theta": theta,
        "holder_quotient": quotient,
        "deltas": deltas,
        "increments": incs,
        "n_pairs_used": int(keep.sum()),
    }
