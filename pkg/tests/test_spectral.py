"""Eigenbasis, heat semigroup, kernels, resolvent, dual norms."""

import numpy as np
import pytest

from gasket.errors import UsageError
from gasket.forms import CellField, DiscreteFunction, cell_means, energy
from gasket.graph import CONSTANTS, level_graph
from gasket.kusuoka import kusuoka_weights
from gasket.spectral import (
    decomposition,
    dual_norm,
    heat_apply,
    heat_apply_measure,
    heat_kernel,
    heat_kernel_diagonal,
    operator_pair,
    prolong,
    resolvent_kernel,
    restrict,
)

M = 5


@pytest.fixture(scope="module")
def sd():
    return decomposition(M, "dirichlet")


@pytest.fixture(scope="module")
def sdn():
    return decomposition(M, "neumann")


def test_ground_state_eigenvalue(sd):
    # Frozen oracle: smallest eigenvalue with zero boundary data at m=5.
    assert sd.eigenvalues[0] == pytest.approx(16.81298, abs=2e-4)
    assert np.all(np.diff(sd.eigenvalues) >= -1e-9)


def test_neumann_basics(sdn):
    op = operator_pair(M, "neumann")
    assert op.M_diag.sum() == pytest.approx(1.0, abs=1e-14)
    assert sdn.eigenvalues[0] == pytest.approx(0.0, abs=1e-9)
    c = sdn.phi[:, 0]
    assert np.abs(c - c[0]).max() <= 1e-8 * abs(c[0])


def test_mass_orthonormality(sd):
    gram = (sd.phi * sd.M_diag[:, None]).T @ sd.phi
    assert np.abs(gram - np.eye(sd.n_modes)).max() <= 1e-10


def test_semigroup_property(sd):
    g = level_graph(M)
    rng = np.random.default_rng(2)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    psi = DiscreteFunction(M, vals)
    u1 = heat_apply(sd, 0.03, heat_apply(sd, 0.07, psi))
    u2 = heat_apply(sd, 0.1, psi)
    assert np.abs(u1.values - u2.values).max() <= 1e-12


def test_heat_contracts_l2(sd):
    op = operator_pair(M, "dirichlet")
    g = level_graph(M)
    rng = np.random.default_rng(4)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    psi = DiscreteFunction(M, vals)
    norms = []
    for t in (0.0, 0.01, 0.05, 0.2):
        u = heat_apply(sd, t, psi)
        norms.append(np.sqrt((u.values[op.basis_ids] ** 2 * op.M_diag).sum()))
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_kernel_symmetry_and_positivity(sd):
    g = level_graph(M)
    x, y = int(g.interior_ids[5]), int(g.interior_ids[40])
    assert heat_kernel(sd, 0.05, x, y) == heat_kernel(sd, 0.05, y, x)
    assert heat_kernel(sd, 0.05, x, x) > 0
    assert heat_kernel(sd, 0.05, x, g.corners[0]) == 0.0


def test_kernel_reproduces_heat_apply(sd):
    g = level_graph(M)
    op = operator_pair(M, "dirichlet")
    rng = np.random.default_rng(6)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    psi = DiscreteFunction(M, vals)
    t = 0.04
    x = int(g.interior_ids[11])
    acc = 0.0
    for j, y in enumerate(op.basis_ids):
        acc += heat_kernel(sd, t, x, int(y)) * psi.values[y] * op.M_diag[j]
    assert acc == pytest.approx(heat_apply(sd, t, psi).values[x], abs=1e-10)


def test_sub_markov(sd):
    g = level_graph(M)
    ones = np.ones(g.n_vertices)
    ones[list(g.corners)] = 0.0
    u = heat_apply(sd, 0.02, DiscreteFunction(M, ones))
    assert u.values.max() <= 1.0 + 1e-9
    assert u.values.min() >= -1e-9


def test_diagonal_decay_exponent():
    sd7 = decomposition(6, "dirichlet")
    g = level_graph(6)
    x0 = g.vertex_id((2**5, 0))
    times = np.geomspace(5.0**-5, 0.05, 10)
    vals = heat_kernel_diagonal(sd7, x0, times)
    A = np.vstack([np.log(times), np.ones(len(times))]).T
    slope = np.linalg.lstsq(A, np.log(vals), rcond=None)[0][0]
    assert slope == pytest.approx(-CONSTANTS.d_s / 2, abs=0.06)


def test_eigenvalue_counting_exponent(sd):
    lam = sd.eigenvalues
    k = np.arange(1, len(lam) + 1)
    lo, hi = 5, len(lam) // 2
    A = np.vstack([np.log(lam[lo:hi]), np.ones(hi - lo)]).T
    slope = np.linalg.lstsq(A, np.log(k[lo:hi]), rcond=None)[0][0]
    assert slope == pytest.approx(CONSTANTS.d_s / 2, abs=0.05)


def test_restrict_prolong_roundtrip(sd):
    g = level_graph(M)
    rng = np.random.default_rng(8)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    u = DiscreteFunction(M, vals)
    back = prolong(sd, restrict(sd, u))
    assert np.abs(back.values - u.values).max() == 0.0


def test_parseval(sd):
    from gasket.spectral import project_coefficients
    g = level_graph(M)
    rng = np.random.default_rng(13)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    u = DiscreteFunction(M, vals)
    c = project_coefficients(sd, u)
    direct = float((u.values[sd.basis_ids] ** 2 * sd.M_diag).sum())
    assert float((c**2).sum()) == pytest.approx(direct, rel=1e-10)


def test_measure_smoothing_duality(sd):
    kw = kusuoka_weights(M)
    rng = np.random.default_rng(9)
    gc = CellField(M, rng.uniform(0.2, 1.0, 3**M))
    g = level_graph(M)
    vals = np.zeros(g.n_vertices)
    vals[g.interior_ids] = rng.standard_normal(len(g.interior_ids))
    v = DiscreteFunction(M, vals)
    t = 0.03
    op = operator_pair(M, "dirichlet")
    left = heat_apply_measure(sd, t, gc, kw)
    lhs = float((left.values[op.basis_ids] * v.values[op.basis_ids]
                 * op.M_diag).sum())
    vt = heat_apply(sd, t, v)
    rhs = float((gc.values * cell_means(vt).values * kw.values).sum())
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_smoothing_norm_blows_up_as_t_vanishes(sd):
    kw = kusuoka_weights(M)
    op = operator_pair(M, "dirichlet")
    ones = CellField(M, np.ones(3**M))
    norms = []
    for t in (0.1, 0.02, 0.005):
        u = heat_apply_measure(sd, t, ones, kw)
        norms.append(np.sqrt((u.values[op.basis_ids] ** 2 * op.M_diag).sum()))
    assert norms[0] < norms[1] < norms[2]


def test_resolvent_matches_quadrature(sd):
    g = level_graph(M)
    x, y = int(g.interior_ids[3]), int(g.interior_ids[30])
    alpha = 2.0
    val = resolvent_kernel(sd, alpha, x, y)
    lam = sd.eigenvalues
    from gasket.spectral import _phi_at
    px, py = _phi_at(sd, x), _phi_at(sd, y)
    direct = float((px * py / (alpha + lam)).sum())
    assert val == pytest.approx(direct, rel=1e-12)


def test_dual_norm_eigenvector_identity(sd):
    op = operator_pair(M, "dirichlet")
    for k in (0, 3, 10):
        vals = np.zeros(level_graph(M).n_vertices)
        vals[op.basis_ids] = sd.phi[:, k]
        expected = 1.0 / np.sqrt(1.0 + sd.eigenvalues[k])
        got = dual_norm(op, DiscreteFunction(M, vals))
        assert got == pytest.approx(expected, rel=1e-10)


def test_time_validation(sd):
    g = level_graph(M)
    psi = DiscreteFunction(M, np.zeros(g.n_vertices))
    with pytest.raises(UsageError):
        heat_apply(sd, -0.1, psi)
    with pytest.raises(UsageError):
        heat_kernel(sd, 0.0, 4, 5)
