"""Energy form, harmonic extension, energy measures, resistance."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasket.errors import UsageError
from gasket.forms import (
    DiscreteFunction,
    cell_means,
    effective_resistance,
    energy,
    energy_bilinear,
    energy_measure_cells,
    energy_measure_cells_bilinear,
    exact_identity_check,
    gradient_cells,
    harmonic_extend,
    reference_harmonic,
    resistance_table,
)
from gasket.graph import level_graph
from gasket.harmonic import A_EXACT, Y_STACK


def test_one_step_extension_values_exact():
    boundary = (Fraction(0), Fraction(1), Fraction(1))
    produced = set()
    for i in range(3):
        produced.update(sum(a * b for a, b in zip(row, boundary))
                        for row in A_EXACT[i])
    assert produced == {Fraction(0), Fraction(1), Fraction(3, 5),
                        Fraction(4, 5)}


def test_extension_float_values():
    h = harmonic_extend(DiscreteFunction(0, [0.0, 1.0, 1.0]), 1)
    vals = sorted(h.values)
    assert np.allclose(vals, [0.0, 0.6, 0.6, 0.8, 1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("m", range(1, 8))
def test_energy_invariant_under_extension(m):
    h = harmonic_extend(DiscreteFunction(0, [0.0, 1.0, 1.0]), m)
    assert abs(energy(h) - 2.0) <= 1e-12


def test_renormalization_identity_exact():
    assert exact_identity_check()


def test_projected_matrices_spectra():
    target = np.array([0.0, 0.2, 0.6])
    for i in range(3):
        ev = np.sort(np.linalg.eigvalsh(Y_STACK[i]))
        assert np.abs(ev - target).max() <= 1e-12


@given(st.integers(1, 4), st.data())
@settings(max_examples=25, deadline=None)
def test_energy_bilinear_consistency(m, data):
    n = level_graph(m).n_vertices
    floats = st.floats(-3, 3, allow_nan=False, width=32)
    u = DiscreteFunction(m, data.draw(st.lists(floats, min_size=n, max_size=n)))
    v = DiscreteFunction(m, data.draw(st.lists(floats, min_size=n, max_size=n)))
    lhs = energy_bilinear(u, v)
    rhs = 0.25 * (energy(DiscreteFunction(m, u.values + v.values))
                  - energy(DiscreteFunction(m, u.values - v.values)))
    scale = max(energy(u), energy(v), 1.0)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_energy_measure_cells_sums_to_energy():
    m = 4
    rng = np.random.default_rng(0)
    u = harmonic_extend(
        DiscreteFunction(1, rng.standard_normal(level_graph(1).n_vertices)), m)
    cells = energy_measure_cells(u)
    assert cells.values.shape == (3**m,)
    assert cells.values.min() >= 0
    assert abs(cells.values.sum() - energy(u)) <= 1e-10 * energy(u)


def test_energy_measure_bilinear_polarization():
    m = 3
    rng = np.random.default_rng(1)
    n = level_graph(m).n_vertices
    u = DiscreteFunction(m, rng.standard_normal(n))
    v = DiscreteFunction(m, rng.standard_normal(n))
    b = energy_measure_cells_bilinear(u, v).values
    pu = energy_measure_cells(u).values
    pv = energy_measure_cells(v).values
    s = energy_measure_cells(DiscreteFunction(m, u.values + v.values)).values
    assert np.allclose(b, 0.5 * (s - pu - pv), atol=1e-12)


def test_gradient_cells_of_reference_harmonic_positive():
    m = 5
    h = reference_harmonic(m)
    grad = gradient_cells(h)
    assert grad.values.shape == (3**m,)
    assert grad.values.min() > 0


def test_gradient_of_constant_vanishes():
    m = 2
    u = DiscreteFunction(m, np.ones(level_graph(m).n_vertices))
    assert np.all(gradient_cells(u).values == 0.0)


def test_cell_means_average_corners():
    m = 2
    g = level_graph(m)
    u = DiscreteFunction(m, np.arange(g.n_vertices, dtype=float))
    means = cell_means(u)
    for j in range(3**m):
        assert means.values[j] == pytest.approx(u.values[g.cells[j]].mean())


@pytest.mark.parametrize("m", range(0, 7))
def test_corner_resistance_level_independent(m):
    g = level_graph(m)
    r = effective_resistance(g, g.corners[0], g.corners[1])
    assert abs(r - 2.0 / 3.0) <= 1e-10


def test_resistance_table_matches_single_solves():
    g = level_graph(4)
    rng = np.random.default_rng(3)
    pairs = rng.choice(g.n_vertices, size=(12, 2), replace=True)
    pairs = np.array([(a, b) for a, b in pairs if a != b])
    table = resistance_table(g, pairs)
    for (x, y), r in zip(pairs, table):
        assert r == pytest.approx(effective_resistance(g, int(x), int(y)),
                                  abs=1e-11)
    assert effective_resistance(g, 5, 5) == 0.0


def test_resistance_is_a_metric_sample():
    g = level_graph(3)
    a, b, c = 0, 7, 19
    rab = effective_resistance(g, a, b)
    rbc = effective_resistance(g, b, c)
    rac = effective_resistance(g, a, c)
    assert rac <= rab + rbc + 1e-12
    assert min(rab, rbc, rac) > 0


def test_function_validation():
    with pytest.raises(UsageError):
        DiscreteFunction(2, np.ones(5))
    with pytest.raises(UsageError):
        DiscreteFunction(1, [0.0, 1.0, np.nan, 0.0, 0.0, 0.0])
