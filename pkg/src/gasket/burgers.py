"""Frozen-coefficient iteration for the gasket Burgers equation.

The equation u' = Lu + u (grad u) mu is solved through outer iterates
u^n obtained from the semilinear solver with drift source
f(t, w, y, z) = ubar^{n-1}(t, w) * z, i.e. the advecting velocity is the
previous iterate's cell mean while the gradient is the current unknown's.
Each inner problem therefore keeps a Lipschitz nonlinearity with constant
bounded by the sup norm of the data, which is what drives the discrete
maximum principle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ComputationError, UsageError
from .forms import DiscreteFunction
from .graph import level_graph
from .kusuoka import KusuokaWeights
from .pde import (
    PDESolution,
    SourceFunction,
    TimeGrid,
    solve_linear,
    solve_semilinear,
    uniform_grid,
)
from .spectral import SpectralDecomposition


@dataclass(frozen=True)
class BurgersConfig:
    """Initial data plus outer/inner iteration controls."""

    psi: DiscreteFunction
    T: float = 0.5
    n_steps: int | None = None
    outer_tol: float = 1e-6
    outer_max_iter: int = 25
    inner_tol: float = 1e-9
    inner_max_iter: int = 60

    def __post_init__(self):
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise UsageError("tolerances must be positive")
        if self.T <= 0:
            raise UsageError("horizon must be positive")
        if self.outer_max_iter < 1 or self.inner_max_iter < 1:
            raise UsageError("iteration caps must be at least 1")

    def grid(self) -> TimeGrid:
        return uniform_grid(self.T, self.n_steps)


class _DriftSource(SourceFunction):
    """f(t, y, z) = drift(t) * z with the drift frozen per grid time."""

    def __init__(self, drift_rows: np.ndarray, times: np.ndarray):
        self._rows = drift_rows
        self._times = times
        k = float(np.abs(drift_rows).max())
        super().__init__(self._eval, k * (1.0 + 1e-12), "frozen-drift")

    def _eval(self, t: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        n = int(np.searchsorted(self._times, t))
        n = min(max(n, 0), self._times.shape[0] - 1)
        for cand in (n, n - 1, n + 1):
            if 0 <= cand < self._times.shape[0] and \
                    abs(self._times[cand] - t) <= 1e-9 * max(self._times[-1], 1.0):
                return self._rows[cand] * z
        raise UsageError(f"drift source evaluated off the grid at t={t}")

    def check_lipschitz(self, level, grid, seed=11, n_probes=64, slack=1e-9):
        # Probes must hit grid times; the drift is only defined there.
        rng = np.random.default_rng(seed)
        n = 3**level
        for _ in range(n_probes):
            t = float(rng.choice(self._times))
            y, yp = rng.standard_normal((2, n))
            z, zp = rng.standard_normal((2, n))
            lhs = np.abs(self(t, y, z) - self(t, yp, zp))
            rhs = self.lipschitz_K * (np.abs(y - yp) + np.abs(z - zp))
            if np.any(lhs > rhs + slack):
                raise UsageError("frozen drift violates its Lipschitz constant")


def solve_burgers(sd: SpectralDecomposition, kw: KusuokaWeights,
                  cfg: BurgersConfig) -> PDESolution:
    """Outer iteration u^n from drift u^{n-1}, started at the heat flow.

    Stops when sup_t of the L2(nu) distance between consecutive outer
    iterates drops below ``cfg.outer_tol``; raises with the distance log
    if the cap is reached.  The outer log and per-iterate sup norms are
    attached to the solution diagnostics.
    """
    g = level_graph(sd.level)
    psi = cfg.psi
    if psi.level != sd.level:
        raise UsageError(f"psi level {psi.level} != decomposition level {sd.level}")
    if np.abs(psi.values[list(g.corners)]).max() > 1e-12:
        raise UsageError("initial data must vanish on the boundary")
    grid = cfg.grid()
    cells = g.cells

    sol = solve_linear(sd, kw, psi, None, grid)
    outer_dist: list[float] = []
    outer_sup: list[float] = [float(np.abs(sol.u).max())]
    for it in range(1, cfg.outer_max_iter + 1):
        drift = sol.u[:, cells].mean(axis=2)
        src = _DriftSource(drift, grid.times)
        new_sol = solve_semilinear(sd, kw, psi, src, grid,
                                   tol=cfg.inner_tol, max_iter=cfg.inner_max_iter)
        dc = new_sol.coeffs - sol.coeffs
        dist = float(np.sqrt((dc**2).sum(axis=1)).max())
        outer_dist.append(dist)
        outer_sup.append(float(np.abs(new_sol.u).max()))
        sol = new_sol
        if dist < cfg.outer_tol:
            break
    else:
        raise ComputationError(
            "outer iteration did not converge; distances: "
            + ", ".join(f"{d:.3e}" for d in outer_dist)
        )
    sol.diagnostics["outer_distances"] = outer_dist
    sol.diagnostics["outer_iterations"] = len(outer_dist)
    sol.diagnostics["outer_sup_norms"] = outer_sup
    sol.diagnostics["psi_sup"] = float(np.abs(psi.values).max())
    return sol


def max_principle_report(sol: PDESolution, psi_sup: float | None = None,
                         slack: float = 0.01) -> dict:
    """Per-time sup norms against the initial bound, with a verdict.

    Passes iff max_x |u(t, x)| <= psi_sup * (1 + slack) at every grid
    time; psi_sup defaults to the sup norm of the initial slice.
    """
    if psi_sup is None:
        psi_sup = float(np.abs(sol.u[0]).max())
    if psi_sup <= 0:
        raise UsageError("initial sup norm must be positive for the report")
    sup_t = np.abs(sol.u).max(axis=1)
    ratio = sup_t / psi_sup
    worst = float(ratio.max())
    return {
        "psi_sup": psi_sup,
        "slack": slack,
        "sup_norms": sup_t,
        "max_ratio": worst,
        "excess": max(worst - 1.0, 0.0),
        "verdict": bool(worst <= 1.0 + slack),
    }


def dissipation_constant(sol: PDESolution) -> float:
    """Smallest C with d/dt ||u||^2 <= -(1/2) E(u) + C ||u||^2 discretely.

    Evaluated at step midpoints with centered differences of the squared
    L2(nu) norm; returns the max over steps of the required constant.
    """
    from .spectral import decomposition

    sd = decomposition(sol.level, "dirichlet")
    c = sol.coeffs
    l2sq = (c**2).sum(axis=1)
    en = (c**2 * sd.eigenvalues[None, :]).sum(axis=1)
    dts = sol.grid.dts
    dnorm = np.diff(l2sq) / dts
    mid_en = 0.5 * (en[1:] + en[:-1])
    mid_l2 = 0.5 * (l2sq[1:] + l2sq[:-1])
    need = (dnorm + 0.5 * mid_en) / np.maximum(mid_l2, 1e-300)
    return float(need.max())


def reflection_check(sd: SpectralDecomposition, kw: KusuokaWeights,
                     cfg: BurgersConfig) -> dict:
    """Equivariance of the discretization under the q1 <-> q2 mirror.

    The drift term u * grad(u) is even under the mirror when u is odd, so
    oddness of the data is not propagated; what the coefficients do
    respect is equivariance: solving the mirrored data gives the mirrored
    solution.  Returns the max deviation of solve(psi o sigma) from
    solve(psi) o sigma over all grid times, plus the symmetry drift of a
    mirror-symmetric reference run.
    """
    from .pde import mirror_permutation

    perm = mirror_permutation(sd.level)
    sol = solve_burgers(sd, kw, cfg)
    psi_m = DiscreteFunction(sd.level, cfg.psi.values[perm])
    cfg_m = BurgersConfig(psi=psi_m, T=cfg.T, n_steps=cfg.n_steps,
                          outer_tol=cfg.outer_tol,
                          outer_max_iter=cfg.outer_max_iter,
                          inner_tol=cfg.inner_tol,
                          inner_max_iter=cfg.inner_max_iter)
    sol_m = solve_burgers(sd, kw, cfg_m)
    dev = float(np.abs(sol_m.u - sol.u[:, perm]).max())
    return {"equivariance_deviation": dev}
