"""Time grids, convolution integrator, linear and Picard solvers."""

import math
from fractions import Fraction

import numpy as np
import pytest

from gasket.errors import ComputationError, UsageError
from gasket.forms import DiscreteFunction, resistance_table
from gasket.graph import level_graph
from gasket.kusuoka import kusuoka_weights
from gasket.pde import (
    PDESolution,
    SourceFunction,
    TimeGrid,
    _exp_integrator_weights,
    _measure_coefficient_matrix,
    antisymmetric_data,
    center_bump,
    duhamel,
    energy_report,
    holder_report,
    mirror_permutation,
    solve_linear,
    solve_semilinear,
    source_constant,
    source_sincos,
    source_zero,
    uniform_grid,
)
from gasket.spectral import decomposition, heat_apply

M = 4


@pytest.fixture(scope="module")
def sd():
    return decomposition(M, "dirichlet")


@pytest.fixture(scope="module")
def kw():
    return kusuoka_weights(M)


def random_psi(m, seed=0):
    g = level_graph(m)
    rng = np.random.default_rng(seed)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    return DiscreteFunction(m, vals)


def test_time_grid_validation():
    with pytest.raises(UsageError):
        TimeGrid(np.array([0.0, 1.0]))
    with pytest.raises(UsageError):
        TimeGrid(np.array([0.1, 0.2, 0.3]))
    with pytest.raises(UsageError):
        TimeGrid(np.array([0.0, 0.2, 0.2]))
    with pytest.raises(UsageError):
        uniform_grid(0.0)
    with pytest.raises(UsageError):
        uniform_grid(1.0, 1)
    grid = uniform_grid(0.5, 10)
    assert grid.T == 0.5
    assert grid.n_steps == 10
    assert np.allclose(grid.dts, 0.05)


def _series_weights(z_frac: Fraction, dt_frac: Fraction, terms: int = 30):
    """Exact Taylor reference for the integrator weights."""
    i0 = Fraction(0)
    i1 = Fraction(0)
    fact = Fraction(1)
    power = Fraction(1)
    for j in range(terms):
        fact_j1 = fact * (j + 1)
        i0 += power / fact_j1
        i1 += power / (fact_j1 * (j + 2))
        power *= -z_frac
        fact = fact_j1
    return float(dt_frac * i0), float(dt_frac * dt_frac * i1)


@pytest.mark.parametrize("k", [40, 27, 17, 13])
def test_integrator_weights_vs_exact_series(k):
    dt = 0.5
    z = 2.0**-k
    lam = np.array([z / dt])
    decay, i0, i1 = _exp_integrator_weights(lam, dt)
    ref0, ref1 = _series_weights(Fraction(1, 2**k), Fraction(1, 2))
    assert decay[0] == pytest.approx(math.exp(-z), rel=1e-15)
    assert i0[0] == pytest.approx(ref0, rel=1e-14)
    assert i1[0] == pytest.approx(ref1, rel=1e-14)


def test_integrator_branch_continuity():
    dt = 1.0
    lo = np.array([1e-4 * (1.0 - 1e-9)])
    hi = np.array([1e-4 * (1.0 + 1e-9)])
    _, i0a, i1a = _exp_integrator_weights(lo, dt)
    _, i0b, i1b = _exp_integrator_weights(hi, dt)
    assert abs(i0a[0] - i0b[0]) <= 1e-12 * i0a[0] + 1e-15
    assert abs(i1a[0] - i1b[0]) <= 1e-12 * i1a[0] + 1e-15


def test_duhamel_exact_for_linear_source(sd, kw):
    # a + b t sources are integrated exactly, step size notwithstanding
    T, n = 0.25, 16
    grid = uniform_grid(T, n)
    rng = np.random.default_rng(5)
    base = rng.uniform(0.5, 1.5, 3**M)
    rows = base[None, :] * (1.0 + grid.times[:, None])
    got = duhamel(sd, kw, rows, grid)[-1].values

    mat = _measure_coefficient_matrix(sd, kw)
    a = mat @ base
    b = a.copy()
    lam = sd.eigenvalues
    conv_a = a * -np.expm1(-lam * T) / lam
    conv_b = b * (T - -np.expm1(-lam * T) / lam) / lam
    ref = np.zeros(level_graph(M).n_vertices)
    ref[sd.basis_ids] = sd.phi @ (conv_a + conv_b)
    rel = np.abs(got - ref).max() / np.abs(ref).max()
    assert rel <= 1e-12


def test_duhamel_zero_source_is_zero(sd, kw):
    grid = uniform_grid(0.2, 8)
    out = duhamel(sd, kw, None, grid)
    assert all(np.abs(u.values).max() == 0.0 for u in out)


def test_duhamel_rejects_bad_shape(sd, kw):
    grid = uniform_grid(0.2, 8)
    with pytest.raises(UsageError):
        duhamel(sd, kw, np.ones(3**M), grid)
    with pytest.raises(UsageError):
        duhamel(sd, kw, np.ones((3, 3**M)), grid)


def test_semilinear_zero_source_is_heat(sd, kw):
    psi = random_psi(M, 1)
    grid = uniform_grid(0.3, 32)
    sol = solve_semilinear(sd, kw, psi, source_zero(), grid)
    assert sol.diagnostics["iterations"] <= 2
    for n in (4, 16, 32):
        ref = heat_apply(sd, float(grid.times[n]), psi)
        assert np.abs(sol.u[n] - ref.values).max() <= 1e-12


def test_linear_solver_superposition(sd, kw):
    grid = uniform_grid(0.2, 24)
    psi1, psi2 = random_psi(M, 2), random_psi(M, 3)
    rng = np.random.default_rng(4)
    g1 = rng.standard_normal((grid.times.shape[0], 3**M))
    g2 = rng.standard_normal((grid.times.shape[0], 3**M))
    a, b = 1.7, -0.6
    combo = DiscreteFunction(M, a * psi1.values + b * psi2.values)
    s12 = solve_linear(sd, kw, combo, a * g1 + b * g2, grid)
    sa = solve_linear(sd, kw, psi1, g1, grid)
    sb = solve_linear(sd, kw, psi2, g2, grid)
    mix = a * sa.coeffs + b * sb.coeffs
    assert np.abs(s12.coeffs - mix).max() <= 1e-11


def test_solver_requires_zero_boundary(sd, kw):
    g = level_graph(M)
    vals = np.zeros(g.n_vertices)
    vals[g.corners[1]] = 1.0
    bad = DiscreteFunction(M, vals)
    grid = uniform_grid(0.1, 8)
    with pytest.raises(UsageError):
        solve_linear(sd, kw, bad, None, grid)
    with pytest.raises(UsageError):
        solve_semilinear(sd, kw, bad, source_zero(), grid)


def test_source_self_convergence(sd, kw):
    psi = center_bump(M)
    errs = []
    ref = solve_semilinear(sd, kw, psi, source_sincos(1.0), uniform_grid(0.3, 256))
    for n in (16, 32, 64):
        sol = solve_semilinear(sd, kw, psi, source_sincos(1.0), uniform_grid(0.3, n))
        errs.append(np.abs(sol.u[-1] - ref.u[-1]).max())
    assert errs[0] > errs[1] > errs[2]
    # better than first order step by step (exactly first would give 2.0)
    assert errs[0] / errs[1] > 2.2
    assert errs[1] / errs[2] > 2.2


def test_picard_contraction(sd, kw):
    psi = center_bump(M)
    grid = uniform_grid(0.4, 64)
    sol = solve_semilinear(sd, kw, psi, source_sincos(1.0), grid)
    d = sol.diagnostics["picard_distances"]
    assert sol.diagnostics["iterations"] == len(d)
    assert len(d) < 60
    tail = d[1:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert sol.diagnostics["f0_norm"] > 0


def test_picard_nonconvergence_raises(sd, kw):
    psi = center_bump(M)
    grid = uniform_grid(0.2, 16)
    with pytest.raises(ComputationError, match="distances"):
        solve_semilinear(sd, kw, psi, source_sincos(1.0), grid, max_iter=1)


def test_check_lipschitz_catches_false_constant():
    lying = SourceFunction(lambda t, y, z: 3.0 * np.sin(y), 0.5, "liar")
    grid = uniform_grid(0.2, 8)
    with pytest.raises(UsageError, match="Lipschitz"):
        lying.check_lipschitz(3, grid)
    honest = source_sincos(2.0)
    honest.check_lipschitz(3, grid)


def test_source_f0_norm(kw):
    grid = uniform_grid(0.25, 16)
    f = source_constant(2.0)
    total = float(kw.values.sum())
    expected = math.sqrt(4.0 * total * 0.25)
    assert f.f0_norm(kw, grid) == pytest.approx(expected, rel=1e-12)


def test_source_shape_guard():
    f = SourceFunction(lambda t, y, z: np.zeros(2), 0.0, "short")
    with pytest.raises(ComputationError):
        f(0.0, np.zeros(9), np.zeros(9))
    with pytest.raises(UsageError):
        SourceFunction(lambda t, y, z: y, -1.0)


def test_mirror_permutation_symmetry():
    for m in (1, 3):
        g = level_graph(m)
        perm = mirror_permutation(m)
        assert np.array_equal(perm[perm], np.arange(g.n_vertices))
        edge_set = {frozenset(e) for e in g.edges.tolist()}
        mapped = {frozenset((int(perm[a]), int(perm[b]))) for a, b in g.edges}
        assert mapped == edge_set
        assert perm[g.corners[0]] == g.corners[0]
        assert perm[g.corners[1]] == g.corners[2]


def test_symmetry_of_prepared_data():
    perm = mirror_permutation(M)
    even = center_bump(M)
    assert np.abs(even.values[perm] - even.values).max() <= 1e-14
    assert even.values.max() == 1.0
    odd = antisymmetric_data(M, 2.0)
    assert np.abs(odd.values[perm] + odd.values).max() <= 1e-14
    assert np.abs(odd.values).max() == 2.0


def test_energy_decay_pure_heat(sd, kw):
    psi = random_psi(M, 6)
    grid = uniform_grid(0.3, 48)
    sol = solve_linear(sd, kw, psi, None, grid)
    rep = energy_report(sol)
    assert np.all(np.diff(rep["energy_path"]) <= 1e-12)
    assert np.all(np.diff(rep["l2_path"]) <= 1e-12)
    assert rep["sup_l2"] == pytest.approx(rep["l2_path"][0], rel=1e-12)
    assert rep["l2F_sq"] > 0 and rep["dual_dt_sq"] > 0


def test_pdesolution_validation(sd, kw):
    grid = uniform_grid(0.1, 4)
    g = level_graph(M)
    u = np.zeros((5, g.n_vertices))
    u[2, g.corners[0]] = 1.0
    with pytest.raises(ComputationError):
        PDESolution(level=M, grid=grid, u=u, grad=np.zeros((5, 3**M)),
                    coeffs=np.zeros((5, sd.n_modes)))
    with pytest.raises(UsageError):
        PDESolution(level=M, grid=grid, u=np.zeros((3, g.n_vertices)),
                    grad=np.zeros((3, 3**M)),
                    coeffs=np.zeros((3, sd.n_modes)))


def test_holder_report(sd, kw):
    grid = uniform_grid(0.5, 128)
    sol = solve_linear(sd, kw, center_bump(M), None, grid)
    g = level_graph(M)
    rng = np.random.default_rng(17)
    ids = rng.choice(g.interior_ids, size=(24, 2), replace=True)
    ids = np.array([(a, b) for a, b in ids if a != b])
    res = resistance_table(g, ids)
    rep = holder_report(sol, ids, res)
    assert math.isfinite(rep["holder_quotient"])
    assert rep["time_exponent"] > 0
    assert rep["space_exponent"] > 0
    assert rep["n_pairs_used"] >= 8
    same = np.tile(np.array([[g.interior_ids[0], g.interior_ids[0]]]), (10, 1))
    with pytest.raises(ComputationError, match="pairs"):
        holder_report(sol, same, np.full(10, 0.5))
