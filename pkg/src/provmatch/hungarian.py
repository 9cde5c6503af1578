"""Minimum-cost bipartite assignment.

Classic potentials-based Hungarian method, O(n^3), written as plain loops
(JIT-compiled when numba is importable; the undecorated function computes
bit-identical results, just slower).  Rectangular inputs are padded square
with a constant; padded cells are dropped from the result.

Tie handling is exact and deterministic: after an optimum is found, the
assignment is refined to the lexicographically smallest (row, col) sequence
among ALL optimal assignments.  The refinement walks the subgraph of edges
with zero reduced cost under the final dual potentials; by complementary
slackness every optimal assignment lives inside that subgraph, and every
perfect matching of it is optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    """Injective row -> col map over the original matrix, plus its cost.

    With more rows than columns the unassignable rows are absent from
    `pairs`.  `total_cost` sums original entries only (padding excluded).
    """

    pairs: dict[int, int]
    total_cost: float


def _solve_square_py(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row (1-based) matched to col j
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u, v


try:  # same function either way; numba only changes speed
    from numba import njit

    _solve_square = njit(cache=True)(_solve_square_py)
except ImportError:
    _solve_square = _solve_square_py


def _augment(
    adj: list[list[int]],
    match_col: list[int],
    match_row: list[int],
    start_row: int,
    row_ok: list[bool],
    col_ok: list[bool],
) -> bool:
    """Kuhn augmenting-path search from an unmatched row, restricted to the
    permitted rows/columns.  Flips the path and returns True on success."""
    via_row: dict[int, int] = {}
    visited: set[int] = set()
    stack = [start_row]
    free_col = -1
    while stack and free_col < 0:
        row = stack.pop()
        for col in adj[row]:
            if col in visited or not col_ok[col]:
                continue
            visited.add(col)
            via_row[col] = row
            occupant = match_row[col]
            if occupant == -1:
                free_col = col
                break
            if row_ok[occupant]:
                stack.append(occupant)
    if free_col < 0:
        return False
    col = free_col
    while True:
        row = via_row[col]
        prev = match_col[row]
        match_col[row] = col
        match_row[col] = row
        if row == start_row:
            return True
        col = prev


def _lex_min_matching(adj: list[list[int]], initial: list[int]) -> list[int]:
    """Refine a perfect matching of the tight graph to the lexicographically
    smallest one.  Rows are fixed in index order; for each row the smallest
    column that still permits completing a perfect matching wins."""
    n = len(adj)
    match_col = list(initial)
    match_row = [-1] * n
    for i, c in enumerate(match_col):
        match_row[c] = i
    row_ok = [True] * n
    col_ok = [True] * n

    for i in range(n):
        cur = match_col[i]
        row_ok[i] = False
        for cand in adj[i]:
            if cand >= cur:
                break
            if not col_ok[cand]:
                continue
            displaced = match_row[cand]
            # tentatively take (i, cand); cur becomes free, displaced unmatched
            match_col[i] = cand
            match_row[cand] = i
            match_row[cur] = -1
            match_col[displaced] = -1
            col_ok[cand] = False
            if _augment(adj, match_col, match_row, displaced, row_ok, col_ok):
                cur = cand
                break
            # revert
            col_ok[cand] = True
            match_col[displaced] = cand
            match_row[cand] = displaced
            match_col[i] = cur
            match_row[cur] = i
        col_ok[cur] = False
    return match_col


def solve(entries, pad_value: float | None = None) -> Assignment:
    """Minimum-total-cost injective assignment of rows to columns.

    :param entries: rectangular cost matrix (any nested-sequence or ndarray).
    :param pad_value: entry used to square up rectangular inputs.  The choice
        cannot change which real assignment wins (every completion uses the
        same number of padded cells); defaults to max entry + 1.
    """
    a = np.asarray(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise AssignmentError("cost matrix must be non-empty and two-dimensional")
    if not np.isfinite(a).all():
        raise AssignmentError("cost matrix entries must be finite")
    rows, cols = a.shape
    n = max(rows, cols)
    if pad_value is None:
        pad_value = float(a.max()) + 1.0
    m = np.full((n, n), float(pad_value))
    m[:rows, :cols] = a
    m = np.ascontiguousarray(m)

    row_to_col, u, v = _solve_square(m)

    reduced = m - u[1:][:, None] - v[1:][None, :]
    tol = 1e-9 * max(1.0, float(np.abs(m).max()))
    adj = [[int(j) for j in np.nonzero(np.abs(reduced[i]) <= tol)[0]] for i in range(n)]
    for i in range(n):
        j = int(row_to_col[i])
        if j not in adj[i]:  # float-tolerance paranoia: keep the optimum reachable
            adj[i].append(j)
            adj[i].sort()

    match_col = _lex_min_matching(adj, [int(x) for x in row_to_col])

    pairs = {i: int(j) for i, j in enumerate(match_col) if i < rows and j < cols}
    total = 0.0
    for i in sorted(pairs):
        total += float(a[i, pairs[i]])
    return Assignment(pairs=pairs, total_cost=total)
