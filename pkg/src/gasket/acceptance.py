"""Reference experiments behind the acceptance criteria.

Each criterion function runs one self-contained experiment and returns a
record with a boolean verdict and the measured numbers.  ``run_all``
executes every criterion (optionally in a reduced ``quick`` profile that
only shrinks Monte Carlo path counts) and never raises: a crashed
criterion is reported as a failure with the error message.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .forms import (
    CellField,
    DiscreteFunction,
    effective_resistance,
    energy,
    exact_identity_check,
    harmonic_extend,
    reference_harmonic,
    resistance_table,
)
from .graph import CONSTANTS, level_graph
from .harmonic import A_EXACT, Y_STACK
from .kusuoka import kusuoka_weights, trace_curves
from .pde import (
    center_bump,
    duhamel,
    holder_report,
    solve_linear,
    solve_semilinear,
    source_sincos,
    uniform_grid,
)
from .sobolev import (
    bump_family_ratios,
    build_corpus,
    estimate_optimal_exponent,
    exponent_formula,
    measure_mu,
    measure_nu,
    verify_inequality,
)
from .spectral import (
    decomposition,
    heat_apply_measure,
    heat_kernel_diagonal,
    operator_pair,
)
from .walk import WalkConfig, fk_heat, fk_source, qv_exponential_moment


def _record(cid: str, title: str, passed: bool, details: dict) -> dict:
    return {"id": cid, "title": title, "passed": bool(passed),
            "details": details}


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    A = np.vstack([np.log(x), np.ones(len(x))]).T
    return float(np.linalg.lstsq(A, np.log(y), rcond=None)[0][0])


def criterion_01(quick: bool = False) -> dict:
    """Cell-measure exactness in rational arithmetic up to level 10."""
    m_top = 10
    kw_top = kusuoka_weights(m_top)
    ok = True
    details: dict = {}
    for m in range(1, m_top + 1):
        kw = kusuoka_weights(m)
        total = sum(kw.numerators)
        if total != kw.denominator:
            ok = False
            details[f"total_m{m}"] = f"{total}/{kw.denominator}"
    for m in range(1, m_top):
        parent = kusuoka_weights(m).numerators
        child = kusuoka_weights(m + 1).numerators
        for j, nw in enumerate(parent):
            if 135 * nw != child[3 * j] + child[3 * j + 1] + child[3 * j + 2]:
                ok = False
                details[f"additivity_m{m}"] = j
                break
    level1 = [kusuoka_weights(1).weight(w) for w in ("1", "2", "3")]
    if any(x != Fraction(1, 3) for x in level1):
        ok = False
    w11 = kusuoka_weights(2).weight("11")
    if w11 != Fraction(41, 225):
        ok = False
    details.update({"level1": [str(x) for x in level1], "mu_11": str(w11),
                    "levels_checked": m_top})
    del kw_top
    return _record("C01", "cell measure exact to level 10", ok, details)


def criterion_02(quick: bool = False) -> dict:
    """Projected harmonic matrices have eigenvalues {0, 1/5, 3/5}."""
    target = np.array([0.0, 0.2, 0.6])
    worst = 0.0
    for i in range(3):
        ev = np.sort(np.linalg.eigvalsh(Y_STACK[i]))
        worst = max(worst, float(np.abs(ev - target).max()))
    exact = exact_identity_check()
    ok = worst <= 1e-12 and exact
    return _record("C02", "matrix identities", ok,
                   {"eigenvalue_error": worst, "renormalization_exact": exact})


def criterion_03(quick: bool = False) -> dict:
    """Trace-curve limits of the word matrices at depth 12."""
    tc = trace_curves(12)
    mx, mn = tc.max_curve[-1], tc.min_curve[-1]
    tail = tc.min_curve[8:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    ok = abs(mx / 0.36 - 1.0) <= 0.02 and abs(mn / 0.12 - 1.0) <= 0.10 \
        and decreasing
    return _record("C03", "trace curve limits at depth 12", ok,
                   {"max_curve_12": mx, "min_curve_12": mn,
                    "min_tail": list(tail), "tail_decreasing": decreasing})


def criterion_04(quick: bool = False) -> dict:
    """Harmonic extension values, energy invariance, corner resistance."""
    boundary = (Fraction(0), Fraction(1), Fraction(1))
    new_vals = set()
    for i in range(3):
        new_vals.update(sum(a * b for a, b in zip(row, boundary))
                        for row in A_EXACT[i])
    extension_exact = new_vals == {Fraction(0), Fraction(1), Fraction(3, 5),
                                   Fraction(4, 5)}
    h0 = DiscreteFunction(0, [0.0, 1.0, 1.0])
    drift = 0.0
    for m in range(1, 8):
        drift = max(drift, abs(energy(harmonic_extend(h0, m)) - 2.0))
    r_err = 0.0
    for m in range(0, 7):
        g = level_graph(m)
        for a in range(3):
            for b in range(a + 1, 3):
                r = effective_resistance(g, g.corners[a], g.corners[b])
                r_err = max(r_err, abs(r - 2.0 / 3.0))
    ok = extension_exact and drift <= 1e-12 and r_err <= 1e-10
    return _record("C04", "harmonic calculus", ok,
                   {"extension_values_exact": extension_exact,
                    "energy_drift": drift, "resistance_error": r_err})


def criterion_05(quick: bool = False) -> dict:
    """On-diagonal heat kernel decay exponent at level 7."""
    sd = decomposition(7, "dirichlet")
    g = level_graph(7)
    x0 = g.vertex_id((2**6, 0))
    times = np.geomspace(5.0**-6, 0.05, 12)
    vals = heat_kernel_diagonal(sd, x0, times)
    slope = _loglog_slope(times, vals)
    target = -CONSTANTS.d_s / 2.0
    ok = abs(slope - target) <= 0.05
    return _record("C05", "heat kernel on-diagonal scaling", ok,
                   {"slope": slope, "target": target, "level": 7})


def criterion_06(quick: bool = False) -> dict:
    """Optimal inequality exponents, corpus stability, bump blow-up."""
    nu, mu = measure_nu(), measure_mu()
    fits = {
        "nu_2_2": (estimate_optimal_exponent(nu, 2, 2)["fitted_a"], 0.0),
        "mu_2_2": (estimate_optimal_exponent(mu, 2, 2)["fitted_a"],
                   CONSTANTS.d_s - 1.0),
        "nu_2_inf": (estimate_optimal_exponent(nu, 2, math.inf)["fitted_a"],
                     0.683),
    }
    fit_ok = all(abs(v - t) <= 0.05 for v, t in fits.values())
    a_star = exponent_formula(2, math.inf, nu.delta_bar, nu.delta_underbar).a1
    ratios = []
    for m in range(4, 8):
        rep = verify_inequality(build_corpus(m), nu, 2, math.inf, a_star)
        ratios.append(rep["max_ratio"])
    mean_r = float(np.mean(ratios))
    stable = all(abs(r / mean_r - 1.0) <= 0.20 for r in ratios)
    # Perturbing the energy exponent below a* breaks the inequality: the
    # bump-family ratios then grow without bound.  (At a* + 0.1 they decay
    # instead; the blow-up direction is toward smaller a.)
    fam = bump_family_ratios(nu, 2, math.inf, a_star - 0.1, k_max=5)
    growing = all(b > a for a, b in zip(fam, fam[1:]))
    ok = fit_ok and stable and growing
    return _record("C06", "optimal smoothing exponents", ok,
                   {"fitted": {k: v for k, (v, _) in fits.items()},
                    "targets": {k: t for k, (_, t) in fits.items()},
                    "corpus_max_ratios": ratios, "stable": stable,
                    "bump_ratios_below_a": list(fam),
                    "blow_up_below_a": growing})


def criterion_07(quick: bool = False) -> dict:
    """Smoothing norm of the measure-valued heat flow grows as t drops."""
    sd = decomposition(7, "dirichlet")
    kw = kusuoka_weights(7)
    op = operator_pair(7, "dirichlet")
    ones = CellField(7, np.ones(3**7))
    ts = (0.1, 0.05, 0.02, 0.01, 0.005)
    norms = []
    for t in ts:
        u = heat_apply_measure(sd, t, ones, kw)
        norms.append(float(np.sqrt((u.values[op.basis_ids]**2 * op.M_diag).sum())))
    increasing = all(b > a for a, b in zip(norms, norms[1:]))
    return _record("C07", "singular measure smoothing", increasing,
                   {"times": list(ts), "norms": norms})


def criterion_08(quick: bool = False) -> dict:
    """Convolution integrator against closed form and refined quadrature."""
    m, T, n = 3, 0.25, 64
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    grid = uniform_grid(T, n)
    rng = np.random.default_rng(5)
    base = rng.uniform(0.5, 1.5, 3**m)
    g_rows = base[None, :] * (1.0 + grid.times[:, None])
    sol = duhamel(sd, kw, g_rows, grid)[-1].values

    fine = uniform_grid(T, 10 * n)
    gf = base[None, :] * (1.0 + fine.times[:, None])
    from .pde import _measure_coefficient_matrix
    mat = _measure_coefficient_matrix(sd, kw)
    coeff_rows = gf @ mat.T
    lam = sd.eigenvalues
    tsf = fine.times
    decay = np.exp(-np.outer(T - tsf, lam))
    integ = np.trapezoid(decay * coeff_rows, tsf, axis=0)
    ref = np.zeros(level_graph(m).n_vertices)
    ref[sd.basis_ids] = sd.phi @ integ
    rel = float(np.abs(sol - ref).max() / np.abs(ref).max())

    const = duhamel(sd, kw, np.full((n + 1, 3**m), 2.0), grid)[-1].values
    coeffs_const = 2.0 * mat.sum(axis=1)
    closed = sd.phi @ (coeffs_const * -np.expm1(-lam * T) / lam)
    ref2 = np.zeros(level_graph(m).n_vertices)
    ref2[sd.basis_ids] = closed
    rel2 = float(np.abs(const - ref2).max() / np.abs(ref2).max())
    ok = rel <= 1e-3 and rel2 <= 1e-12
    return _record("C08", "convolution integrator accuracy", ok,
                   {"vs_refined_trapezoid": rel, "vs_closed_form": rel2})


def criterion_09(quick: bool = False) -> dict:
    """Contraction of the fixed-point iteration at the reference setup."""
    m, T = 6, 0.5
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    psi = center_bump(m, 1.0)
    sol = solve_semilinear(sd, kw, psi, source_sincos(1.0), uniform_grid(T, 256))
    d = sol.diagnostics["picard_distances"]
    ratios = [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]
    late = ratios[2:] if len(ratios) > 2 else ratios
    contraction = all(r <= 0.7 for r in late)
    norms = sol.diagnostics["norms"]
    strength = math.sqrt(norms["sup_l2"]**2 + norms["l2F_sq"]
                         + norms["dual_dt_sq"])
    op = operator_pair(m, "dirichlet")
    psi_l2 = float(np.sqrt((psi.values[op.basis_ids]**2 * op.M_diag).sum()))
    data = psi_l2 + math.sqrt(sol.diagnostics["f0_norm"])
    stability = strength / data
    ok = contraction and math.isfinite(stability)
    return _record("C09", "fixed point contraction and stability", ok,
                   {"distances": list(d), "late_ratios": late,
                    "stability_constant": stability})


def criterion_10(quick: bool = False) -> dict:
    """Time and space regularity exponents of the g=1 convolution."""
    m, T = 6, 0.5
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    g = level_graph(m)
    grid = uniform_grid(T, 256)
    ones = np.ones((grid.times.shape[0], 3**m))
    zero = DiscreteFunction(m, np.zeros(g.n_vertices))
    sol = solve_linear(sd, kw, zero, ones, grid)
    rng = np.random.default_rng(17)
    ids = g.interior_ids
    pairs = np.array([(int(a), int(b)) for a, b in
                      rng.choice(ids, size=(60, 2), replace=True) if a != b])
    table = resistance_table(g, pairs)
    rep = holder_report(sol, pairs, table, theta=0.45)
    ok = (math.isfinite(rep["holder_quotient"])
          and rep["holder_quotient"] <= 1.0
          and rep["space_exponent"] >= 0.45)
    return _record("C10", "regularity exponents of the convolution", ok,
                   {"holder_quotient": rep["holder_quotient"],
                    "time_exponent": rep["time_exponent"],
                    "space_exponent": rep["space_exponent"],
                    "n_pairs": rep["n_pairs_used"]})


def criterion_11(quick: bool = False) -> dict:
    """Maximum principle of the advective solver, stable under refinement."""
    from .burgers import BurgersConfig, max_principle_report, solve_burgers

    m, T = 6, 0.5
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    psi = center_bump(m, 0.5)
    excesses = []
    reports = []
    for n in (256, 512):
        sol = solve_burgers(sd, kw, BurgersConfig(psi=psi, T=T, n_steps=n))
        rep = max_principle_report(sol, slack=0.01)
        excesses.append(rep["excess"])
        reports.append({"n_steps": n, "max_ratio": rep["max_ratio"],
                        "verdict": rep["verdict"]})
    ok = all(r["verdict"] for r in reports) and excesses[1] <= excesses[0]
    return _record("C11", "advective maximum principle", ok,
                   {"runs": reports, "excess_nonincreasing":
                    excesses[1] <= excesses[0]})


def criterion_12(quick: bool = False) -> dict:
    """Path estimators against spectral values; moment level-stability."""
    m, T = 5, 0.2
    n_paths = 20_000 if quick else 100_000
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    g = level_graph(m)
    x0 = int(g.interior_ids[len(g.interior_ids) // 3])
    psi = center_bump(m, 1.0)
    cfg = WalkConfig(level=m, n_paths=n_paths, master_seed=12345)

    from .spectral import heat_apply
    r1 = fk_heat(cfg, x0, T, psi)
    exact1 = float(heat_apply(sd, T, psi).values[x0])
    dev1 = abs(r1["estimate"] - exact1) / r1["stderr"]

    r2 = fk_source(cfg, x0, T)
    grid = uniform_grid(T, 256)
    exact2 = float(duhamel(sd, kw, np.ones((grid.times.shape[0], 3**m)),
                           grid)[-1].values[x0])
    dev2 = abs(r2["estimate"] - exact2) / r2["stderr"]

    n_qv = 5_000 if quick else 10_000
    ests = []
    for lev in (4, 5, 6):
        r = qv_exponential_moment(WalkConfig(level=lev, n_paths=n_qv,
                                             master_seed=777), 1.0, T)
        ests.append((r["estimate"], r["stderr"]))
    devs = []
    for i in range(2):
        joint = math.hypot(ests[i][1], ests[i + 1][1])
        devs.append(abs(ests[i][0] - ests[i + 1][0]) / joint)
    finite = all(math.isfinite(e) for e, _ in ests)
    ok = dev1 <= 3.0 and dev2 <= 3.0 and finite and all(d <= 3.0 for d in devs)
    return _record("C12", "Monte Carlo cross-checks", ok,
                   {"heat_dev_sigma": dev1, "source_dev_sigma": dev2,
                    "heat": {"mc": r1["estimate"], "exact": exact1,
                             "stderr": r1["stderr"]},
                    "source": {"mc": r2["estimate"], "exact": exact2,
                               "stderr": r2["stderr"]},
                    "moment_estimates": [e for e, _ in ests],
                    "moment_dev_sigma": devs, "n_paths": n_paths})


CRITERIA = [criterion_01, criterion_02, criterion_03, criterion_04,
            criterion_05, criterion_06, criterion_07, criterion_08,
            criterion_09, criterion_10, criterion_11, criterion_12]


def run_all(quick: bool = False, only: list | None = None) -> list:
    """Run every criterion; crashes are reported as failed records."""
    results = []
    for fn in CRITERIA:
        cid = fn.__name__[-2:]
        if only is not None and int(cid) not in only:
            continue
        try:
            results.append(fn(quick=quick))
        except Exception as exc:
            title = (fn.__doc__ or "").strip().split("\n")[0]
            results.append(_record(f"C{cid}", title, False,
                                   {"error": f"{type(exc).__name__}: {exc}"}))
    return results


def format_lines(results: list) -> str:
    lines = []
    for r in results:
        lines.append(f"{'PASS' if r['passed'] else 'FAIL'} {r['id']} {r['title']}")
    n_pass = sum(r["passed"] for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)
