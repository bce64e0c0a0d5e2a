"""Pure-numpy shortest augmenting path LAP solver.

Mirrors ``_lap_ext.pyx`` operation for operation, so both backends return
identical assignments (including tie-breaks) on identical input.
"""
import numpy as np


def solve_min_cost(cost):
    """Minimum-cost assignment of a square float64 matrix.

    Returns ``col4row`` with ``col4row[i]`` the column assigned to row ``i``.
    Rows are augmented in ascending order; among columns tied at the minimal
    reduced distance, an unassigned column wins, then the lowest index.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    shortest = np.empty(n)
    path = np.full(n, -1, dtype=np.intp)
    col4row = np.full(n, -1, dtype=np.intp)
    row4col = np.full(n, -1, dtype=np.intp)
    scanned_rows = np.zeros(n, dtype=bool)
    scanned_cols = np.zeros(n, dtype=bool)

    for cur_row in range(n):
        shortest.fill(np.inf)
        scanned_rows.fill(False)
        scanned_cols.fill(False)
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            open_cols = ~scanned_cols
            r = min_val + cost[i] - u[i] - v
            better = open_cols & (r < shortest)
            shortest[better] = r[better]
            path[better] = i

            cand = np.where(open_cols, shortest, np.inf)
            lowest = cand.min()
            if not np.isfinite(lowest):
                raise ValueError("assignment infeasible")
            tied = cand == lowest
            free_tied = tied & (row4col == -1)
            j = int(np.argmax(free_tied)) if free_tied.any() else int(np.argmax(tied))

            min_val = lowest
            scanned_cols[j] = True
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]

        u[cur_row] += min_val
        rows = np.flatnonzero(scanned_rows)
        rows = rows[rows != cur_row]
        u[rows] += min_val - shortest[col4row[rows]]
        cols = np.flatnonzero(scanned_cols)
        v[cols] -= min_val - shortest[cols]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return col4row
