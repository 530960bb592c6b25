"""Measure conditions, interpolation exponents, and inequality checks.

The objects here quantify how a Borel measure sigma on the gasket couples
to the Dirichlet energy: cell-mass growth conditions, the interpolation
exponents they produce, and empirical verification of the resulting
norm inequalities on function corpora, including the bump-family
optimality mechanism and the trace-curve limits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, ResourceLimitError, UsageError
from .forms import (
    DiscreteFunction,
    cell_means,
    energy,
    harmonic_extend,
)
from .graph import CONSTANTS, check_word, index_word, level_graph, word_index
from .kusuoka import MAX_WEIGHT_LEVEL, kusuoka_weights, trace_curves


class MeasureSpec:
    """A Borel measure given by cell masses at every level.

    ``cell_weight(word)`` returns the mass of the cell addressed by the
    word; masses must be additive across refinement (a measure, not just
    a density).  ``delta_bar`` and ``delta_underbar`` are the declared
    growth exponents: sigma(S) <= C_sigma * nu(S)^(1/delta_bar) for the
    upper condition, with math.inf meaning a flat bound.
    """

    def __init__(self, name: str, weights_fn, delta_bar: float,
                 delta_underbar: float, C_sigma: float):
        if not (1.0 <= delta_bar):
            raise UsageError(f"delta_bar must be >= 1, got {delta_bar}")
        if not (0.0 < delta_underbar):
            raise UsageError(f"delta_underbar must be positive, got {delta_underbar}")
        if delta_underbar > delta_bar:
            raise UsageError("delta_underbar cannot exceed delta_bar")
        if not (C_sigma > 0.0):
            raise UsageError(f"C_sigma must be positive, got {C_sigma}")
        self.name = name
        self.delta_bar = float(delta_bar)
        self.delta_underbar = float(delta_underbar)
        self.C_sigma = float(C_sigma)
        self._weights_fn = weights_fn
        self._cache: dict[int, np.ndarray] = {}

    def weights(self, level: int) -> np.ndarray:
        """Cell masses at one level, lexicographic word order."""
        got = self._cache.get(level)
        if got is None:
            got = np.asarray(self._weights_fn(level), dtype=np.float64)
            if got.shape != (3**level,):
                raise ComputationError(
                    f"measure {self.name} returned {got.shape} at level {level}"
                )
            if np.any(got < 0) or not np.all(np.isfinite(got)):
                raise ComputationError(f"measure {self.name} produced bad masses")
            got.setflags(write=False)
            self._cache[level] = got
        return got

    def cell_weight(self, word: str) -> float:
        check_word(word)
        return float(self.weights(len(word))[word_index(word)])

    def total_mass(self, level: int = 0) -> float:
        return float(self.weights(level).sum())

    def __repr__(self):
        return (f"MeasureSpec({self.name!r}, delta_bar={self.delta_bar}, "
                f"delta_underbar={self.delta_underbar}, C={self.C_sigma})")


def measure_nu() -> MeasureSpec:
    """The uniform self-similar measure: every level-m cell has mass 3^-m."""
    return MeasureSpec(
        "nu",
        lambda m: np.full(3**m, 3.0 ** (-m)),
        delta_bar=1.0,
        delta_underbar=1.0,
        C_sigma=1.0,
    )


def measure_mu() -> MeasureSpec:
    """The energy-dominant measure with exact cell masses.

    Satisfies the upper growth condition with delta_bar equal to the
    spectral exponent and constant 1, and the lower one with
    delta_underbar = 1.
    """
    return MeasureSpec(
        "mu",
        lambda m: kusuoka_weights(m).values,
        delta_bar=CONSTANTS.delta_s,
        delta_underbar=1.0,
        C_sigma=1.0,
    )


def _dirac_chain(lattice: tuple[int, int], k: int, depth: int) -> str:
    """Lexicographically first cell chain containing a V_k vertex.

    Containment is tested in integer lattice arithmetic: the cell of word
    w at level l spans the closed triangle with lower corner at
    sum_j 2^(l-j) * offset(w_j) and side 2^(k-l) at scale 2^max(k,l).
    """
    a, b = lattice
    word = []
    a0 = b0 = 0  # lower corner of the current cell at scale 2^len(word)
    for l in range(1, depth + 1):
        scale_pt = max(k, l)
        pa = a << (scale_pt - k)
        pb = b << (scale_pt - k)
        found = False
        for s, (oa, ob) in enumerate(((0, 0), (1, 0), (0, 1))):
            ca = 2 * a0 + oa
            cb = 2 * b0 + ob
            side = 1 << (scale_pt - l)
            qa = ca << (scale_pt - l)
            qb = cb << (scale_pt - l)
            if pa >= qa and pb >= qb and (pa - qa) + (pb - qb) <= side:
                word.append(chr(ord("1") + s))
                a0, b0 = ca, cb
                found = True
                break
        if not found:
            raise ComputationError(f"dirac descent lost the vertex at level {l}")
    return "".join(word)


def measure_dirac(corner: int = 0, level: int = 0,
                  lattice: tuple[int, int] | None = None) -> MeasureSpec:
    """Unit point mass at a vertex, represented additively on cells.

    At each level the whole mass sits on the lexicographically first cell
    whose closure contains the vertex, which keeps refinement additivity
    exact.  Default vertex is the corner q0; any V_k vertex can be given
    by its lattice pair.
    """
    if lattice is None:
        g0 = level_graph(0)
        if corner not in (0, 1, 2):
            raise UsageError(f"corner must be 0, 1, or 2, got {corner}")
        a, b = (int(v) for v in g0.lattice[g0.corners[corner]])
        level = 0
    else:
        a, b = (int(v) for v in lattice)
    chain = _dirac_chain((a, b), level, MAX_WEIGHT_LEVEL)

    def weights_fn(m: int) -> np.ndarray:
        if m > len(chain):
            raise ResourceLimitError(f"dirac chain computed only to level {len(chain)}")
        out = np.zeros(3**m)
        out[word_index(chain[:m])] = 1.0
        return out

    return MeasureSpec(
        f"dirac(({a},{b})@{level})",
        weights_fn,
        delta_bar=math.inf,
        delta_underbar=math.inf,
        C_sigma=1.0,
    )


def measure_from_table(path: str, delta_bar: float, delta_underbar: float,
                       C_sigma: float, name: str | None = None) -> MeasureSpec:
    """Measure defined by a CSV of word,weight rows at one fixed level.

    Coarser levels are produced by exact child summation; levels finer
    than the table are not defined and raise an error.
    """
    rows: dict[str, float] = {}
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#") or rec[0] == "word":
                continue
            word = rec[0].strip()
            if word in ("", "0"):
                word = ""
            check_word(word)
            rows[word] = float(rec[1])
    if not rows:
        raise UsageError(f"no weight rows found in {path}")
    levels = {len(w) for w in rows}
    if len(levels) != 1:
        raise UsageError(f"weights in {path} mix levels {sorted(levels)}")
    table_level = levels.pop()
    base = np.zeros(3**table_level)
    for w, val in rows.items():
        base[word_index(w)] = val
    if np.any(base < 0):
        raise UsageError("weights must be nonnegative")

    def weights_fn(m: int) -> np.ndarray:
        if m > table_level:
            raise ResourceLimitError(
                f"measure table resolves level {table_level}, requested {m}"
            )
        out = base
        for _ in range(table_level - m):
            out = out.reshape(-1, 3).sum(axis=1)
        return out

    return MeasureSpec(
        name or f"file:{path}",
        weights_fn,
        delta_bar=delta_bar,
        delta_underbar=delta_underbar,
        C_sigma=C_sigma,
    )


def lp_norm(u: DiscreteFunction, spec: MeasureSpec, p: float) -> float:
    """Cell-mean quadrature of the L^p norm against the measure.

    For finite p this is (sum_w |mean_w(u)|^p sigma(w))^(1/p) at u's
    level; p = inf returns the max of |u| over vertices.  Exact for
    cell-constant integrands, first-order accurate otherwise.
    """
    if p < 1:
        raise UsageError(f"p must be at least 1, got {p}")
    if math.isinf(p):
        return float(np.abs(u.values).max())
    means = np.abs(cell_means(u).values)
    w = spec.weights(u.level)
    return float((means**p @ w) ** (1.0 / p))


@dataclass(frozen=True)
class ExponentPair:
    """Upper and lower interpolation exponents, a2 <= a1."""

    a1: float
    a2: float

    def __post_init__(self):
        if not (0.0 <= self.a2 <= self.a1 <= 1.0):
            raise ComputationError(f"bad exponent pair ({self.a1}, {self.a2})")


def exponent_core(p_inv, q_inv, delta_inv, s):
    """One bracketed exponent [(p_inv - q_inv*delta_inv) / (p_inv + s)]+.

    Arguments are reciprocals (1/p, 1/q, 1/delta) plus s = 1/(2 delta_s),
    so infinite parameters enter as exact zeros.  Works on floats and on
    exact rational inputs alike; used directly by the algebra tests.
    """
    num = p_inv - q_inv * delta_inv
    den = p_inv + s
    if den == 0:
        return num * 0
    a = num / den
    return a if a > 0 else a * 0


def exponent_core_prime(p_inv, q_inv, delta_inv, s):
    """The primed form [(p_inv*delta_inv - q_inv) / (p_inv*delta_inv + s)]+."""
    num = p_inv * delta_inv - q_inv
    den = p_inv * delta_inv + s
    if den == 0:
        return num * 0
    a = num / den
    return a if a > 0 else a * 0


def _inv(x: float) -> float:
    if math.isinf(x):
        return 0.0
    return 1.0 / x


def exponent_formula(p: float, q: float, delta_bar: float,
                     delta_underbar: float, mode: str = "compact") -> ExponentPair:
    """Interpolation exponents for a measure with declared growth exponents.

    Modes: "m1" pairs the upper-condition exponent a1 (using delta_bar)
    with a2 from delta_underbar; "m1prime" uses the primed formulas with
    the roles of the two deltas exchanged; "compact" returns the single
    compact-gasket exponent (the m1 a1 form) in both slots.
    """
    if not (1.0 <= p <= q):
        raise UsageError(f"need 1 <= p <= q, got p={p}, q={q}")
    if q < 2:
        raise UsageError(f"need q >= 2, got q={q}")
    if delta_underbar > delta_bar:
        raise UsageError("delta_underbar cannot exceed delta_bar")
    if delta_bar < 1 or delta_underbar <= 0:
        raise UsageError("delta_bar >= 1 and delta_underbar > 0 required")
    s = 1.0 / (2.0 * CONSTANTS.delta_s)
    p_inv, q_inv = _inv(p), _inv(q)
    if mode == "m1":
        a1 = exponent_core(p_inv, q_inv, _inv(delta_bar), s)
        a2 = exponent_core(p_inv, q_inv, _inv(delta_underbar), s)
    elif mode == "m1prime":
        a1 = exponent_core_prime(p_inv, q_inv, _inv(delta_underbar), s)
        a2 = exponent_core_prime(p_inv, q_inv, _inv(delta_bar), s)
    elif mode == "compact":
        a1 = exponent_core(p_inv, q_inv, _inv(delta_bar), s)
        a2 = a1
    else:
        raise UsageError(f"unknown exponent mode {mode!r}")
    return ExponentPair(a1=float(a1), a2=float(a2))


def bump_function(word: str, level: int | None = None) -> DiscreteFunction:
    """Piecewise-harmonic bump attached to one cell.

    Takes the value 1 at the cell's q0-corner vertex, 0 at every other
    vertex of the next-finer net, and is harmonically extended to the
    working level (default: two levels below the cell).  Values stay in
    [0, 1] and the support is the union of cells meeting the peak vertex.
    """
    check_word(word)
    k = len(word)
    if level is None:
        level = k + 2
    if level <= k:
        raise UsageError(f"working level {level} must exceed the cell level {k}")
    g = level_graph(k + 1)
    a0 = b0 = 0
    for j, c in enumerate(word, start=1):
        oa, ob = ((0, 0), (1, 0), (0, 1))[ord(c) - ord("1")]
        a0 += oa << (k - j)
        b0 += ob << (k - j)
    peak = g.vertex_id((a0 << 1, b0 << 1))  # q0 corner, rescaled to level k+1
    vals = np.zeros(g.n_vertices)
    vals[peak] = 1.0
    return harmonic_extend(DiscreteFunction(k + 1, vals), level)


@dataclass(frozen=True)
class TestCorpus:
    """Named nonconstant test functions at a common level."""

    level: int
    members: tuple
    names: tuple
    dirichlet: bool

    def __post_init__(self):
        if len(self.members) != len(self.names):
            raise UsageError("corpus members and names differ in length")
        for u, name in zip(self.members, self.names):
            if u.level != self.level:
                raise UsageError(f"member {name} at level {u.level} != {self.level}")
            if float(u.values.max() - u.values.min()) == 0.0:
                raise UsageError(f"member {name} is constant")
            if self.dirichlet:
                g = level_graph(self.level)
                if np.abs(u.values[list(g.corners)]).max() > 1e-12:
                    raise UsageError(f"member {name} violates zero boundary")


def build_corpus(m: int, dirichlet: bool = True, seed: int = 7,
                 n_random: int = 8) -> TestCorpus:
    """Bumps, eigenfunctions, and random piecewise-harmonic functions.

    The Dirichlet corpus zeroes all members on V_0 and draws its
    eigenfunctions from the Dirichlet decomposition.  Construction is
    deterministic in the seed.
    """
    from . import spectral  # local import to avoid a cycle at module load

    rng = np.random.default_rng(seed)
    g = level_graph(m)
    members: list[DiscreteFunction] = []
    names: list[str] = []

    for word in ("1", "3", "12", "22", "131"):
        if len(word) + 1 > m:
            continue
        members.append(bump_function(word, m))
        names.append(f"bump:{word}")

    if m <= 7:
        sd = spectral.decomposition(min(m, 5), "dirichlet")
        for k in (0, 1, 4):
            u5 = spectral.prolong(sd, sd.phi[:, k])
            members.append(harmonic_extend(u5, m) if m > sd.level
                           else DiscreteFunction(m, u5.values))
            names.append(f"eig:{k}")

    base = level_graph(2)
    for i in range(n_random):
        vals = rng.standard_normal(base.n_vertices)
        if dirichlet:
            vals[list(base.corners)] = 0.0
        members.append(harmonic_extend(DiscreteFunction(2, vals), m))
        names.append(f"pwharm:{i}")

    if not dirichlet:
        vals = rng.standard_normal(g.n_vertices)
        members.append(DiscreteFunction(m, vals))
        names.append("noise")

    keep_members, keep_names = [], []
    for u, name in zip(members, names):
        if dirichlet:
            vals = u.values.copy()
            vals[list(g.corners)] = 0.0
            u = DiscreteFunction(m, vals)
        if float(u.values.max() - u.values.min()) > 0.0:
            keep_members.append(u)
            keep_names.append(name)
    return TestCorpus(level=m, members=tuple(keep_members),
                      names=tuple(keep_names), dirichlet=dirichlet)


def check_measure_condition(spec: MeasureSpec, m_max: int) -> dict:
    """Scan the upper growth condition and fit empirical mass exponents.

    Returns the best (largest) constant sigma(S)/nu(S)^(1/delta_bar) over
    all cells at levels 1..m_max, cells violating the declared C_sigma,
    and regression slopes of log sigma vs log nu along the all-ones word
    and along the chain of the smallest positive-mass cell at m_max
    (diagnostics for the lower growth condition).
    """
    if m_max < 1:
        raise UsageError("m_max must be at least 1")
    inv_bar = 0.0 if math.isinf(spec.delta_bar) else 1.0 / spec.delta_bar
    best_c = 0.0
    best_word = ""
    violating: list[tuple[str, float]] = []
    per_level_max = []
    for m in range(1, m_max + 1):
        sig = spec.weights(m)
        nu_mass = 3.0 ** (-m)
        ratios = sig / nu_mass**inv_bar
        i = int(ratios.argmax())
        per_level_max.append(float(ratios[i]))
        if ratios[i] > best_c:
            best_c = float(ratios[i])
            best_word = index_word(i, m)
        if ratios[i] > spec.C_sigma * (1.0 + 1e-12):
            bad = np.flatnonzero(ratios > spec.C_sigma * (1.0 + 1e-12))
            for j in bad[:8]:
                violating.append((index_word(int(j), m), float(ratios[j])))

    def chain_slope(word: str):
        xs, ys = [], []
        for l in range(1, len(word) + 1):
            s = spec.cell_weight(word[:l])
            if s > 0:
                xs.append(-l * math.log(3.0))
                ys.append(math.log(s))
        if len(xs) < 2 or xs[0] == xs[-1]:
            return None
        return float(np.polyfit(xs, ys, 1)[0])

    sig_last = spec.weights(m_max)
    pos = sig_last[sig_last > 0]
    min_word = index_word(int(np.flatnonzero(sig_last == pos.min())[0]), m_max)
    return {
        "name": spec.name,
        "m_max": m_max,
        "best_C": best_c,
        "best_C_word": best_word,
        "per_level_max_ratio": per_level_max,
        "violating_cells": violating,
        "declared_C": spec.C_sigma,
        "exponent_along_ones": chain_slope("1" * m_max),
        "exponent_along_min_word": chain_slope(min_word),
        "min_word": min_word,
    }


def midrange(u: DiscreteFunction) -> float:
    return 0.5 * (float(u.values.min()) + float(u.values.max()))


def verify_inequality(corpus: TestCorpus, spec: MeasureSpec, p: float,
                      q: float, a: float, form: str = "centered") -> dict:
    """Empirical constants of one interpolation inequality on a corpus.

    Forms: "centered" subtracts the midrange before both norms,
    "dirichlet" requires zero boundary values and no centering,
    "additive" adds the plain L^p(nu) norm to the right-hand side.
    Reports the max ratio LHS/RHS (RHS constant 1) and its witness; a
    large ratio is data, never a failure.
    """
    if form not in ("centered", "dirichlet", "additive"):
        raise UsageError(f"unknown inequality form {form!r}")
    if not (0.0 <= a <= 1.0):
        raise UsageError(f"exponent a must lie in [0,1], got {a}")
    nu = measure_nu()
    ratios: list[float] = []
    names: list[str] = []
    skipped: list[str] = []
    g = level_graph(corpus.level)
    for u, name in zip(corpus.members, corpus.names):
        if form == "dirichlet" and np.abs(u.values[list(g.corners)]).max() > 1e-12:
            raise UsageError(f"member {name} has nonzero boundary values")
        if form == "centered":
            v = DiscreteFunction(u.level, u.values - midrange(u))
        else:
            v = u
        e = energy(u)
        lhs = lp_norm(v, spec, q)
        rhs = e ** (0.5 * a) * lp_norm(v, nu, p) ** (1.0 - a)
        if form == "additive":
            rhs = rhs + lp_norm(u, nu, p)
        if rhs == 0.0:
            skipped.append(name)
            continue
        ratios.append(lhs / rhs)
        names.append(name)
    if not ratios:
        raise ComputationError("all corpus members were skipped")
    i = int(np.argmax(ratios))
    return {
        "form": form,
        "p": p,
        "q": q,
        "a": a,
        "measure": spec.name,
        "max_ratio": float(ratios[i]),
        "argmax": names[i],
        "ratios": dict(zip(names, map(float, ratios))),
        "skipped": skipped,
    }


def bump_family_ratios(spec: MeasureSpec, p: float, q: float, a: float,
                       k_max: int, level: int | None = None) -> list[float]:
    """Inequality ratios along the shrinking bump family (words 1, 11, ...).

    The family drives the optimality mechanism: at the formula exponent
    the ratios stay bounded; below it they grow without bound as k
    increases; above it they decay to zero.
    """
    if level is None:
        level = min(k_max + 4, 12)
    if level < k_max + 2:
        raise UsageError("working level must be at least k_max + 2")
    nu = measure_nu()
    out = []
    for k in range(1, k_max + 1):
        h = bump_function("1" * k, level)
        rhs = energy(h) ** (0.5 * a) * lp_norm(h, nu, p) ** (1.0 - a)
        out.append(lp_norm(h, spec, q) / rhs)
    return out


def estimate_optimal_exponent(spec: MeasureSpec, p: float, q: float,
                              k_max: int = 5, level: int | None = None) -> dict:
    """Fit the interpolation exponent realized by the bump family.

    Regresses log(||h||_q,sigma / ||h||_p,nu) on
    log(E(h)^(1/2) / ||h||_p,nu) across bump scales k = 1..k_max; the
    slope is the exponent balancing the two sides.  The working level
    sits four levels below the finest bump so that norms of the smallest
    bumps are fully resolved.
    """
    if k_max < 2:
        raise UsageError("k_max must be at least 2 for a regression")
    if level is None:
        level = k_max + 4
    if level < k_max + 2:
        raise UsageError("working level must be at least k_max + 2")
    if level > 12:
        raise ResourceLimitError(f"working level {level} exceeds 12")
    nu = measure_nu()
    xs, ys = [], []
    for k in range(1, k_max + 1):
        h = bump_function("1" * k, level)
        np_norm = lp_norm(h, nu, p)
        xs.append(math.log(math.sqrt(energy(h)) / np_norm))
        ys.append(math.log(lp_norm(h, spec, q) / np_norm))
    if max(xs) - min(xs) < 1e-9:
        raise ComputationError("bump scales are degenerate; cannot regress")
    slope, intercept = np.polyfit(xs, ys, 1)
    return {
        "measure": spec.name,
        "p": p,
        "q": q,
        "k_max": k_max,
        "level": level,
        "fitted_a": float(slope),
        "intercept": float(intercept),
        "log_energy_ratio": xs,
        "log_norm_ratio": ys,
    }


def trace_limits(m_max: int = 12, workers: int | None = None) -> dict:
    """Extreme trace-curve values per level from the exact word scan."""
    if m_max > 13:
        raise ResourceLimitError("trace scan supports m_max <= 13")
    tc = trace_curves(m_max, workers=workers)
    return {
        "levels": list(tc.levels),
        "max_curve": list(tc.max_curve),
        "min_curve": list(tc.min_curve),
        "argmax": list(tc.argmax),
        "argmin": list(tc.argmin),
    }
