"""Harmonic extension matrices and their exact companions.

A harmonic function on the gasket is determined by its boundary values
(u(q0), u(q1), u(q2)); restriction to the cell F_i is the linear map A_i
with the classical 1/5-2/5 extension weights.  The matrices are kept both
as exact rationals (for identity checks and the exact cell-measure
arithmetic) and as float64 arrays (for vectorized extension).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import UsageError
from .graph import check_word

#: Exact extension matrices: row k of A_i gives u(F_i(q_k)) in terms of
#: the boundary values of the parent cell.
A_EXACT = (
    tuple(
        tuple(Fraction(n, 5) for n in row)
        for row in ((5, 0, 0), (2, 2, 1), (2, 1, 2))
    ),
    tuple(
        tuple(Fraction(n, 5) for n in row)
        for row in ((2, 2, 1), (0, 5, 0), (1, 2, 2))
    ),
    tuple(
        tuple(Fraction(n, 5) for n in row)
        for row in ((2, 1, 2), (1, 2, 2), (0, 0, 5))
    ),
)

#: Float stack of the three extension matrices, shape (3, 3, 3).
A_STACK = np.array(
    [[[float(x) for x in row] for row in mat] for mat in A_EXACT], dtype=np.float64
)

#: Exact centering projection P = I - J/3 (J the all-ones matrix).
P_EXACT = tuple(
    tuple(Fraction(2, 3) if i == j else Fraction(-1, 3) for j in range(3))
    for i in range(3)
)

P_MATRIX = np.array([[float(x) for x in row] for row in P_EXACT], dtype=np.float64)

#: Y_i = P A_i P, the centered extension maps driving the gradient calculus.
Y_STACK = np.einsum("ab,ibc,cd->iad", P_MATRIX, A_STACK, P_MATRIX)

def _z_int() -> tuple:
    # Z_i = (3I - J)(5 A_i); the factors 3 and 5 clear all denominators.
    out = []
    for i in range(3):
        zi = []
        for a in range(3):
            row = []
            for b in range(3):
                v = sum(
                    (2 if a == c else -1) * (A_EXACT[i][c][b] * 5)
                    for c in range(3)
                )
                row.append(int(v))
            zi.append(tuple(row))
        out.append(tuple(zi))
    return tuple(out)


#: Integer matrices Z_i = (3I - J)(5 A_i), so Z_i / 15 = P A_i.  Products
#: Z_w = Z_{w_m} ... Z_{w_1} carry the centered harmonic maps of cells in
#: exact integer arithmetic; squared Frobenius norms of these products
#: yield the exact cell masses of the energy-dominant measure.
Z_INT = _z_int()


def word_matrix(word: str) -> np.ndarray:
    """Harmonic matrix A_w of a cell: boundary values -> values on F_w(V_0).

    Appending a symbol multiplies on the left, so A_w = A_{w_m} ... A_{w_1}.
    """
    check_word(word)
    out = np.eye(3)
    for c in word:
        out = A_STACK[ord(c) - ord("1")] @ out
    return out


def extend_values(values: np.ndarray, from_level: int, to_level: int,
                  graphs: tuple) -> np.ndarray:
    """Harmonically extend vertex values from one level graph to a finer one.

    ``graphs`` must contain the level graphs from ``from_level`` to
    ``to_level`` inclusive, in order.  Extension is exact for the 1/5-2/5
    weights: each refinement evaluates the three child cells of every cell
    by the extension matrices, then scatters onto the finer vertex set.
    Values already present on coarse vertices are reproduced exactly.
    """
    if to_level < from_level:
        raise UsageError("target level must be at least the source level")
    if len(graphs) != to_level - from_level + 1:
        raise UsageError("need one graph per level from source to target")
    vals = np.asarray(values, dtype=np.float64)
    for step in range(to_level - from_level):
        g_from = graphs[step]
        g_to = graphs[step + 1]
        corner_vals = vals[g_from.cells]  # (C, 3)
        # (C, 3 children, 3 corners): child corner values per parent cell.
        child_vals = np.einsum("iab,cb->cia", A_STACK, corner_vals)
        out = np.empty(g_to.n_vertices, dtype=np.float64)
        out[g_to.cells.reshape(-1)] = child_vals.reshape(-1)
        vals = out
    return vals
