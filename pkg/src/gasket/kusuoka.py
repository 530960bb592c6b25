"""Exact cell masses of the energy-dominant (Kusuoka) measure.

Cell masses are computed in integer arithmetic.  With Z_i = (3I - J)(5A_i)
and Z_w = Z_{w_m} ... Z_{w_1}, the squared Frobenius norm F_w = |Z_w|_F^2
is a nonnegative integer and the measure of the cell addressed by w is

    mu(S_w) = F_w / (2 * 135^m),    |w| = m.

Masses at one level sum to one exactly and refine additively:
135 * F_w = F_w1 + F_w2 + F_w3.  The same scan yields the extreme values
of the per-cell trace curve tr(Y_w^T Y_w)^(1/m) = F_w^(1/m) / 225 used by
the trace-restriction diagnostics.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ComputationError, ResourceLimitError, UsageError
from .graph import check_word, word_index
from .harmonic import Z_INT

#: Largest level for which exact per-cell weights are materialized.
MAX_WEIGHT_LEVEL = 12

#: Largest depth accepted by the trace scan.
MAX_TRACE_LEVEL = 13

_IDENTITY = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _matmul(a, b):
    # 3x3 products of Python ints; kept tuple-based for exactness.
    return tuple(
        tuple(
            a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]
            for j in range(3)
        )
        for i in range(3)
    )


def _frob2(a) -> int:
    return sum(a[i][j] * a[i][j] for i in range(3) for j in range(3))


def worker_count() -> int:
    """Worker process cap: GASKET_THREADS if set, else cpu count (max 8)."""
    env = os.environ.get("GASKET_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, min(os.cpu_count() or 1, 8))


@dataclass(frozen=True)
class KusuokaWeights:
    """Exact cell masses of the energy-dominant measure at one level.

    Attributes:
        level: word length m.
        numerators: 3^m Python ints in lexicographic word order.
        denominator: 2 * 135^m; ``numerators[i] / denominator`` is the mass
            of the i-th cell.
        values: float64 view of the masses (correctly rounded).
    """

    level: int
    numerators: tuple
    denominator: int
    values: np.ndarray

    def weight(self, word: str) -> Fraction:
        """Exact mass of the cell addressed by ``word``."""
        check_word(word)
        if len(word) != self.level:
            raise UsageError(
                f"word {word!r} has length {len(word)}, expected {self.level}"
            )
        return Fraction(self.numerators[word_index(word)], self.denominator)

    def total(self) -> Fraction:
        return Fraction(sum(self.numerators), self.denominator)


_WEIGHTS_CACHE: dict[int, KusuokaWeights] = {}


def _weights_from_numerators(m: int, nums: list) -> KusuokaWeights:
    den = 2 * 135**m
    values = np.array([n / den for n in nums], dtype=np.float64)
    values.setflags(write=False)
    return KusuokaWeights(
        level=m, numerators=tuple(nums), denominator=den, values=values
    )


def kusuoka_weights(m: int, max_level: int = MAX_WEIGHT_LEVEL) -> KusuokaWeights:
    """Exact masses of all level-m cells, memoized.

    Raises ResourceLimitError above ``max_level`` (default 12).
    """
    if m < 0:
        raise UsageError(f"level must be nonnegative, got {m}")
    if m > max_level:
        raise ResourceLimitError(
            f"level {m} exceeds the exact-weights maximum {max_level}"
        )
    got = _WEIGHTS_CACHE.get(m)
    if got is not None:
        return got
    if m == 0:
        out = _weights_from_numerators(0, [2])
        _WEIGHTS_CACHE[0] = out
        return out

    # One DFS in lexicographic order fills every level up to m.
    per_level: list[list] = [[] for _ in range(m + 1)]
    per_level[0].append(2)

    def dfs(z, depth):
        for s in range(3):
            z1 = _matmul(Z_INT[s], z)
            per_level[depth + 1].append(_frob2(z1))
            if depth + 1 < m:
                dfs(z1, depth + 1)

    dfs(_IDENTITY, 0)
    for d in range(1, m + 1):
        if d not in _WEIGHTS_CACHE:
            _WEIGHTS_CACHE[d] = _weights_from_numerators(d, per_level[d])
    return _WEIGHTS_CACHE[m]


def _scan_chunk(args):
    """Trace-scan worker: full subtree statistics below one prefix.

    Returns, for each absolute depth d in (depth0, m_max], the tuple
    (F_max, F_min, argmax suffix, argmin suffix, F_sum) over all words of
    length d extending the prefix.  Strict comparisons keep the first
    (lexicographically smallest) witness.
    """
    z0, depth0, m_max = args
    span = m_max - depth0
    fmax = [None] * span
    fmin = [None] * span
    wmax = [""] * span
    wmin = [""] * span
    fsum = [0] * span

    def dfs(z, rel, suffix):
        for s in range(3):
            z1 = _matmul(Z_INT[s], z)
            f = _frob2(z1)
            sfx = suffix + chr(ord("1") + s)
            fsum[rel] += f
            if fmax[rel] is None or f > fmax[rel]:
                fmax[rel] = f
                wmax[rel] = sfx
            if fmin[rel] is None or f < fmin[rel]:
                fmin[rel] = f
                wmin[rel] = sfx
            if rel + 1 < span:
                dfs(z1, rel + 1, sfx)

    dfs(tuple(tuple(row) for row in z0), 0, "")
    return fmax, fmin, wmax, wmin, fsum


@dataclass(frozen=True)
class TraceCurves:
    """Extreme per-cell trace values by level.

    ``max_curve[d-1]`` and ``min_curve[d-1]`` hold the largest and smallest
    value of tr(Y_w^T Y_w)^(1/d) over words of length d, with witness words
    in ``argmax`` / ``argmin``.
    """

    levels: tuple
    max_curve: tuple
    min_curve: tuple
    argmax: tuple
    argmin: tuple


def trace_curves(m_max: int, workers: int | None = None) -> TraceCurves:
    """Scan all words up to length ``m_max`` for extreme trace values.

    The scan runs in exact integer arithmetic and verifies the mass
    identity sum_w F_w = 2 * 135^d at every depth.  Work is split over
    subtrees below the depth-2 prefixes when more than one worker is
    allowed; results do not depend on the worker count.
    """
    if m_max < 1:
        raise UsageError(f"m_max must be at least 1, got {m_max}")
    if m_max > MAX_TRACE_LEVEL:
        raise ResourceLimitError(
            f"m_max {m_max} exceeds the trace-scan maximum {MAX_TRACE_LEVEL}"
        )
    if workers is None:
        workers = worker_count()

    fmax = [None] * m_max
    fmin = [None] * m_max
    wmax = [""] * m_max
    wmin = [""] * m_max
    fsum = [0] * m_max

    def absorb(depth_abs, f, word):
        i = depth_abs - 1
        fsum[i] += f
        if fmax[i] is None or f > fmax[i]:
            fmax[i] = f
            wmax[i] = word
        if fmin[i] is None or f < fmin[i]:
            fmin[i] = f
            wmin[i] = word

    split_depth = 2
    if m_max <= split_depth + 2 or workers <= 1:
        out = _scan_chunk((_IDENTITY, 0, m_max))
        for d in range(1, m_max + 1):
            fmax[d - 1] = out[0][d - 1]
            fmin[d - 1] = out[1][d - 1]
            wmax[d - 1] = out[2][d - 1]
            wmin[d - 1] = out[3][d - 1]
            fsum[d - 1] = out[4][d - 1]
    else:
        # Depths 1..split_depth in-process, deeper levels fanned out.
        prefixes = []

        def head(z, depth, word):
            for s in range(3):
                z1 = _matmul(Z_INT[s], z)
                w1 = word + chr(ord("1") + s)
                absorb(depth + 1, _frob2(z1), w1)
                if depth + 1 < split_depth:
                    head(z1, depth + 1, w1)
                else:
                    prefixes.append((z1, w1))

        head(_IDENTITY, 0, "")
        jobs = [(z, split_depth, m_max) for z, _ in prefixes]
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_scan_chunk, jobs))
        for (_, prefix), (cmax, cmin, cwmax, cwmin, csum) in zip(prefixes, results):
            for rel in range(m_max - split_depth):
                i = split_depth + rel
                fsum[i] += csum[rel]
                if fmax[i] is None or cmax[rel] > fmax[i]:
                    fmax[i] = cmax[rel]
                    wmax[i] = prefix + cwmax[rel]
                if fmin[i] is None or cmin[rel] < fmin[i]:
                    fmin[i] = cmin[rel]
                    wmin[i] = prefix + cwmin[rel]

    for d in range(1, m_max + 1):
        if fsum[d - 1] != 2 * 135**d:
            raise ComputationError(f"mass identity failed at depth {d}")

    levels = tuple(range(1, m_max + 1))
    max_curve = tuple(float(fmax[d - 1]) ** (1.0 / d) / 225.0 for d in levels)
    min_curve = tuple(float(fmin[d - 1]) ** (1.0 / d) / 225.0 for d in levels)
    return TraceCurves(
        levels=levels,
        max_curve=max_curve,
        min_curve=min_curve,
        argmax=tuple(wmax),
        argmin=tuple(wmin),
    )
