"""Measures, norms, interpolation exponents, inequality lab."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasket.errors import ComputationError, ResourceLimitError, UsageError
from gasket.forms import DiscreteFunction, cell_means, energy
from gasket.graph import CONSTANTS, level_graph, word_index
from gasket.kusuoka import kusuoka_weights
from gasket.sobolev import (
    MeasureSpec,
    build_corpus,
    bump_family_ratios,
    bump_function,
    check_measure_condition,
    estimate_optimal_exponent,
    exponent_core,
    exponent_core_prime,
    exponent_formula,
    lp_norm,
    measure_dirac,
    measure_from_table,
    measure_mu,
    measure_nu,
    trace_limits,
    verify_inequality,
)


def test_exponent_formula_special_values():
    d_s = CONSTANTS.d_s
    # L2 -> sup against nu needs exactly d_s/2 of the energy.
    pair = exponent_formula(2, math.inf, 1.0, 1.0)
    assert pair.a1 == pytest.approx(d_s / 2, abs=1e-12)
    assert pair.a2 == pair.a1
    # L2 -> L2 against nu is free.
    assert exponent_formula(2, 2, 1.0, 1.0).a1 == 0.0
    # L2 -> L2 against the energy-dominant measure costs d_s - 1.
    got = exponent_formula(2, 2, CONSTANTS.delta_s, 1.0, mode="m1").a1
    assert got == pytest.approx(d_s - 1.0, abs=1e-12)


def test_exponent_formula_validation():
    with pytest.raises(UsageError):
        exponent_formula(3, 2, 1.0, 1.0)
    with pytest.raises(UsageError):
        exponent_formula(1, 1.5, 1.0, 1.0)
    with pytest.raises(UsageError):
        exponent_formula(2, 2, 1.0, 2.0)
    with pytest.raises(UsageError):
        exponent_formula(2, 2, 1.0, 1.0, mode="m3")


_frac = st.integers(0, 40)


@settings(max_examples=200, deadline=None)
@given(pn=st.integers(1, 40), pd=st.integers(1, 40), qk=_frac, dk=_frac,
       sn=st.integers(1, 9))
def test_exponent_core_algebra(pn, pd, qk, dk, sn):
    p_inv = Fraction(min(pn, pd), max(pn, pd))
    q_inv = p_inv * Fraction(qk, 40)
    delta_inv = Fraction(dk, 40)
    s = Fraction(sn, 10)
    a = exponent_core(p_inv, q_inv, delta_inv, s)
    assert isinstance(a, Fraction)
    assert 0 <= a < 1
    assert (a == 0) == (p_inv <= q_inv * delta_inv)
    # delta = 1 collapses the primed and unprimed forms.
    if delta_inv == 1:
        assert exponent_core_prime(p_inv, q_inv, delta_inv, s) == a


def test_measure_masses():
    nu, mu = measure_nu(), measure_mu()
    for m in range(0, 6):
        assert nu.total_mass(m) == pytest.approx(1.0, abs=1e-14)
        assert mu.total_mass(m) == pytest.approx(1.0, abs=1e-12)
    assert mu.cell_weight("11") == pytest.approx(41 / 225, abs=1e-15)
    with pytest.raises(ValueError):
        nu.weights(2)[0] = 5.0


def test_measure_spec_validation():
    fn = lambda m: np.full(3**m, 3.0 ** (-m))
    with pytest.raises(UsageError):
        MeasureSpec("bad", fn, delta_bar=0.5, delta_underbar=0.5, C_sigma=1.0)
    with pytest.raises(UsageError):
        MeasureSpec("bad", fn, delta_bar=1.0, delta_underbar=-1.0, C_sigma=1.0)
    with pytest.raises(UsageError):
        MeasureSpec("bad", fn, delta_bar=1.0, delta_underbar=2.0, C_sigma=1.0)
    with pytest.raises(UsageError):
        MeasureSpec("bad", fn, delta_bar=1.0, delta_underbar=1.0, C_sigma=0.0)
    broken = MeasureSpec("bad", lambda m: np.zeros(5), 1.0, 1.0, 1.0)
    with pytest.raises(ComputationError):
        broken.weights(2)


def test_dirac_one_hot_and_additive():
    d = measure_dirac()
    for m in range(1, 8):
        w = d.weights(m)
        assert w.sum() == 1.0
        assert w.max() == 1.0
        assert np.count_nonzero(w) == 1
    fine = d.weights(7)
    assert np.array_equal(fine.reshape(-1, 3).sum(axis=1), d.weights(6))
    # hot cell stays inside the previous hot cell
    hot = [int(np.flatnonzero(d.weights(m))[0]) for m in range(1, 7)]
    for parent, child in zip(hot, hot[1:]):
        assert child // 3 == parent


def test_dirac_interior_vertex():
    # midpoint of the q1-q2 edge at level 1 sits in cells 2 and 3
    d = measure_dirac(lattice=(1, 1), level=1)
    w = d.weights(1)
    assert np.count_nonzero(w) == 1
    assert w[word_index("2")] == 1.0
    with pytest.raises(UsageError):
        measure_dirac(corner=5)


def test_dirac_depth_limit():
    d = measure_dirac()
    with pytest.raises(ResourceLimitError):
        d.weights(40)


def test_measure_from_table(tmp_path):
    kw = kusuoka_weights(2)
    path = tmp_path / "w.csv"
    lines = ["word,weight"]
    from gasket.graph import enumerate_words
    for i, word in enumerate(enumerate_words(2)):
        lines.append(f"{word},{float(kw.values[i])!r}")
    path.write_text("\n".join(lines) + "\n")
    spec = measure_from_table(str(path), delta_bar=CONSTANTS.delta_s,
                              delta_underbar=1.0, C_sigma=1.0)
    assert np.array_equal(spec.weights(2), kw.values)
    assert np.allclose(spec.weights(1), kusuoka_weights(1).values, atol=1e-15)
    with pytest.raises(ResourceLimitError):
        spec.weights(3)


def test_measure_from_table_rejects_mixed_levels(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,0.5\n11,0.5\n")
    with pytest.raises(UsageError):
        measure_from_table(str(path), 1.0, 1.0, 1.0)
    empty = tmp_path / "empty.csv"
    empty.write_text("word,weight\n")
    with pytest.raises(UsageError):
        measure_from_table(str(empty), 1.0, 1.0, 1.0)


def test_lp_norm():
    m = 3
    g = level_graph(m)
    rng = np.random.default_rng(3)
    u = DiscreteFunction(m, rng.standard_normal(g.n_vertices))
    nu = measure_nu()
    assert lp_norm(u, nu, math.inf) == np.abs(u.values).max()
    means = np.abs(cell_means(u).values)
    direct = math.sqrt(float(means**2 @ nu.weights(m)))
    assert lp_norm(u, nu, 2) == pytest.approx(direct, rel=1e-14)
    with pytest.raises(UsageError):
        lp_norm(u, nu, 0.5)


def test_bump_function_shape():
    # word 2: the peak is the q0-q1 edge midpoint, away from V_0
    h = bump_function("2", 4)
    assert h.level == 4
    assert h.values.min() == 0.0
    assert h.values.max() == 1.0
    g = level_graph(4)
    assert np.abs(h.values[list(g.corners)]).max() == 0.0
    with pytest.raises(UsageError):
        bump_function("12", 2)


def test_build_corpus_deterministic():
    c1 = build_corpus(4, seed=7)
    c2 = build_corpus(4, seed=7)
    assert c1.names == c2.names
    for u, v in zip(c1.members, c2.members):
        assert np.array_equal(u.values, v.values)
    g = level_graph(4)
    for u in c1.members:
        assert np.abs(u.values[list(g.corners)]).max() <= 1e-12
        assert u.values.max() > u.values.min()


def test_verify_inequality_report():
    corpus = build_corpus(4)
    nu = measure_nu()
    a_star = exponent_formula(2, math.inf, 1.0, 1.0).a1
    rep = verify_inequality(corpus, nu, 2, math.inf, a_star)
    assert rep["form"] == "centered"
    assert math.isfinite(rep["max_ratio"]) and rep["max_ratio"] > 0
    assert rep["argmax"] in rep["ratios"]
    assert rep["max_ratio"] == max(rep["ratios"].values())
    rep2 = verify_inequality(corpus, nu, 2, math.inf, a_star, form="dirichlet")
    assert rep2["max_ratio"] > 0
    with pytest.raises(UsageError):
        verify_inequality(corpus, nu, 2, math.inf, 1.5)
    with pytest.raises(UsageError):
        verify_inequality(corpus, nu, 2, math.inf, a_star, form="weird")


def test_check_measure_condition_mu():
    rep = check_measure_condition(measure_mu(), 5)
    assert rep["violating_cells"] == []
    assert rep["best_C"] <= 1.0 + 1e-12
    # heaviest chain decays like nu^(1/delta_s)
    expected = math.log(5 / 3) / math.log(3)
    assert rep["exponent_along_ones"] == pytest.approx(expected, abs=0.05)


def test_check_measure_condition_nu():
    rep = check_measure_condition(measure_nu(), 5)
    assert rep["best_C"] == pytest.approx(1.0, abs=1e-12)
    assert rep["violating_cells"] == []
    assert rep["exponent_along_ones"] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(UsageError):
        check_measure_condition(measure_nu(), 0)


def test_estimate_optimal_exponent_frozen():
    nu, mu = measure_nu(), measure_mu()
    r1 = estimate_optimal_exponent(nu, 2, math.inf)
    r2 = estimate_optimal_exponent(nu, 2, math.inf)
    assert r1["fitted_a"] == r2["fitted_a"]
    assert r1["fitted_a"] == pytest.approx(0.6827049475866612, abs=1e-6)
    assert r1["fitted_a"] == pytest.approx(CONSTANTS.d_s / 2, abs=0.01)
    assert estimate_optimal_exponent(nu, 2, 2)["fitted_a"] == pytest.approx(
        0.0, abs=1e-9)
    got = estimate_optimal_exponent(mu, 2, 2)["fitted_a"]
    assert got == pytest.approx(0.35792754122135517, abs=1e-6)
    assert got == pytest.approx(CONSTANTS.d_s - 1.0, abs=0.05)
    with pytest.raises(UsageError):
        estimate_optimal_exponent(nu, 2, 2, k_max=1)
    with pytest.raises(ResourceLimitError):
        estimate_optimal_exponent(nu, 2, 2, k_max=5, level=13)


def test_bump_family_direction():
    nu = measure_nu()
    a_star = exponent_formula(2, math.inf, 1.0, 1.0).a1
    below = bump_family_ratios(nu, 2, math.inf, a_star - 0.1, k_max=4)
    above = bump_family_ratios(nu, 2, math.inf, a_star + 0.1, k_max=4)
    assert all(b > a for a, b in zip(below, below[1:]))
    assert all(b < a for a, b in zip(above, above[1:]))


def test_trace_limits_wrapper():
    rep = trace_limits(5)
    assert rep["levels"] == list(range(1, 6))
    assert len(rep["max_curve"]) == 5
    assert rep["max_curve"][0] == pytest.approx(0.4, abs=1e-15)
    assert all(len(w) == lev for lev, w in zip(rep["levels"], rep["argmax"]))
    with pytest.raises(ResourceLimitError):
        trace_limits(14)
