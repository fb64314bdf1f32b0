"""Independent reference implementations used to check the fast paths.

Everything here is deliberately naive: scalar Python arithmetic, plain
loops, no numpy vectorization of the quantities under test. Tests freeze
expected values computed by these functions; the implementations under
test must match them, not the other way around.
"""

import math
import operator


def scalar_column_scale(column):
    amax = max((abs(v) for v in column), default=0.0)
    return 127.0 / amax if amax > 0 else 1.0


def scalar_round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def scalar_quantize(matrix):
    """Per-column scalar quantizer; matrix is a list of rows of floats."""
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    scales = [scalar_column_scale([matrix[i][j] for i in range(rows)]) for j in range(cols)]
    q = [
        [
            max(-127, min(127, scalar_round_half_away(matrix[i][j] * scales[j])))
            for j in range(cols)
        ]
        for i in range(rows)
    ]
    return q, scales


def naive_int_matmul(qa, qb):
    """Triple-loop integer matrix product over Python ints (exact)."""
    m, k = len(qa), len(qa[0]) if qa else 0
    n = len(qb[0]) if qb else 0
    cols = [[qb[x][j] for x in range(k)] for j in range(n)]
    out = []
    for i in range(m):
        row_a = qa[i]
        out.append([sum(map(operator.mul, row_a, cols[j])) for j in range(n)])
    return out
