"""Ranked assignment: Murty's K-best solutions and exhaustive enumeration.

Cost matrices are ``(n_rows, n_cols)`` with ``n_rows <= n_cols``; ``np.inf``
marks a forbidden pairing. A solution is an integer array giving the column
assigned to each row.
"""
import heapq
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment


def _solve(cost):
    """Optimal assignment of every row, or ``None`` when infeasible."""
    if cost.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=np.int64)
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    total = cost[rows, cols].sum()
    if not np.isfinite(total):
        return None
    return float(total), cols.astype(np.int64)


def _solve_node(cost, forced, excluded):
    """Solve the sub-problem with ``forced`` ``{row: col}`` and ``excluded`` pairs."""
    n, m = cost.shape
    free_rows = [i for i in range(n) if i not in forced]
    used_cols = set(forced.values())
    free_cols = [j for j in range(m) if j not in used_cols]
    sub = cost[np.ix_(free_rows, free_cols)].copy()
    row_pos = {i: k for k, i in enumerate(free_rows)}
    col_pos = {j: k for k, j in enumerate(free_cols)}
    for i, j in excluded:
        if i in row_pos and j in col_pos:
            sub[row_pos[i], col_pos[j]] = np.inf
    sol = _solve(sub)
    if sol is None:
        return None
    sub_cost, sub_cols = sol
    cols = np.empty(n, dtype=np.int64)
    total = sub_cost
    for i, j in forced.items():
        cols[i] = j
        total += cost[i, j]
    for k, i in enumerate(free_rows):
        cols[i] = free_cols[sub_cols[k]]
    return float(total), cols


def murty(cost, k):
    """Up to ``k`` lowest-cost assignments in non-decreasing cost order.

    Returns a list of ``(total_cost, cols)`` pairs.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n > m:
        raise ValueError(f"need at least as many columns as rows, got {cost.shape}")
    if k <= 0:
        return []
    first = _solve_node(cost, {}, ())
    if first is None:
        return []
    tie = itertools.count()
    heap = [(first[0], next(tie), first[1], {}, ())]
    out = []
    while heap and len(out) < k:
        total, _, cols, forced, excluded = heapq.heappop(heap)
        out.append((total, cols))
        if len(out) == k:
            break
        forced = dict(forced)
        for i in range(n):
            if i in forced:
                continue
            child_excluded = excluded + ((i, int(cols[i])),)
            sol = _solve_node(cost, forced, child_excluded)
            if sol is not None:
                heapq.heappush(heap, (sol[0], next(tie), sol[1], dict(forced), child_excluded))
            forced[i] = int(cols[i])
    return out


def enumerate_assignments(options, n_shared):
    """Every joint choice where row ``i`` picks one entry of ``options[i]``.

    ``options[i]`` is a sequence of ``(col, shared)`` pairs; ``shared`` is an
    index in ``range(n_shared)`` that at most one row may take, or ``-1`` for
    a column private to the row. Returns an ``(n_hypotheses, n_rows)`` array
    of chosen ``col`` values.
    """
    n = len(options)
    out = []
    current = [0] * n
    used = [False] * n_shared

    def rec(i):
        if i == n:
            out.append(tuple(current))
            return
        for col, shared in options[i]:
            if shared >= 0:
                if used[shared]:
                    continue
                used[shared] = True
                current[i] = col
                rec(i + 1)
                used[shared] = False
            else:
                current[i] = col
                rec(i + 1)

    rec(0)
    return np.asarray(out, dtype=np.int64).reshape(len(out), n)
