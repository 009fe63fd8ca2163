"""Linear assignment solvers.

``linear_assignment`` is a shortest-augmenting-path Hungarian method with
row/column potentials (O(n^2 m)).  ``max_score_mapping`` builds on it to
return the lexicographically smallest optimal one-to-one mapping, which is
what the DER scorer and the committee aligner need for reproducible output.
"""

from __future__ import annotations

import numpy as np


def linear_assignment(cost) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost assignment on a rectangular cost matrix.

    Returns ``(rows, cols)`` index arrays of length ``min(n, m)`` with rows
    sorted ascending, in the same convention as
    ``scipy.optimize.linear_sum_assignment``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = cost.shape
    if n == 0 or m == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    transposed = n > m
    if transposed:
        cost = cost.T
        n, m = m, n

    # 1-based potentials; column 0 is a virtual source.  Plain lists are
    # much faster than numpy for the small matrices used here.
    c = cost.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    match = [0] * (m + 1)  # match[j] = row assigned to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            row = c[i0 - 1]
            ui = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break

    rows, cols = [], []
    for j in range(1, m + 1):
        if match[j] != 0:
            rows.append(match[j] - 1)
            cols.append(j - 1)
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    if transposed:
        rows, cols = cols, rows
    order = np.argsort(rows, kind="stable")
    return rows[order], cols[order]


def assignment_value(score, maximize: bool = True) -> float:
    score = np.asarray(score, dtype=float)
    if score.size == 0:
        return 0.0
    rows, cols = linear_assignment(-score if maximize else score)
    return float(score[rows, cols].sum())


def max_score_mapping(score) -> list[tuple[int, int]]:
    """Lexicographically smallest one-to-one mapping of maximal total score.

    Every injective mapping of size ``min(R, H)`` is a candidate; among the
    optimal ones the mapping whose (row, col) pair list, sorted by row, is
    lexicographically smallest is returned.  Scores are compared exactly, so
    callers should pass integer-valued scores (co-activity counts).
    """
    score = np.asarray(score, dtype=float)
    n_rows, n_cols = score.shape
    k_total = min(n_rows, n_cols)
    if k_total == 0:
        return []
    best = assignment_value(score)

    pairs: list[tuple[int, int]] = []
    free_cols = list(range(n_cols))
    gained = 0.0
    for i in range(n_rows):
        need_after = k_total - len(pairs)
        rows_left = list(range(i + 1, n_rows))
        chosen = None
        for j in free_cols:
            cols_left = [c for c in free_cols if c != j]
            if need_after - 1 > min(len(rows_left), len(cols_left)):
                continue
            rest = assignment_value(score[np.ix_(rows_left, cols_left)]) if need_after > 1 else 0.0
            if gained + score[i, j] + rest == best:
                chosen = j
                break
        if chosen is not None:
            pairs.append((i, chosen))
            gained += score[i, chosen]
            free_cols.remove(chosen)
            if len(pairs) == k_total:
                break
    return pairs
