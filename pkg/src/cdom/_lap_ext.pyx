# cython: language_level=3
"""Compiled shortest augmenting path LAP kernel (see _lap_py.py)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def solve_min_cost(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef double[::1] u = np.zeros(n)
    cdef double[::1] v = np.zeros(n)
    cdef double[::1] shortest = np.empty(n)
    cdef Py_ssize_t[::1] path = np.full(n, -1, dtype=np.intp)
    col4row_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] col4row = col4row_arr
    cdef Py_ssize_t[::1] row4col = np.full(n, -1, dtype=np.intp)
    cdef char[::1] srow = np.zeros(n, dtype=np.int8)
    cdef char[::1] scol = np.zeros(n, dtype=np.int8)
    cdef Py_ssize_t cur_row, i, j, k, sink, best_j, tmp
    cdef double min_val, r, lowest
    cdef bint best_free, feasible = True

    with nogil:
        for cur_row in range(n):
            for k in range(n):
                shortest[k] = INFINITY
                srow[k] = 0
                scol[k] = 0
            min_val = 0.0
            i = cur_row
            sink = -1
            while sink == -1:
                srow[i] = 1
                for k in range(n):
                    if scol[k] == 0:
                        r = min_val + c[i, k] - u[i] - v[k]
                        if r < shortest[k]:
                            shortest[k] = r
                            path[k] = i
                lowest = INFINITY
                best_j = -1
                best_free = False
                for k in range(n):
                    if scol[k] != 0:
                        continue
                    if best_j == -1 or shortest[k] < lowest:
                        lowest = shortest[k]
                        best_j = k
                        best_free = row4col[k] == -1
                    elif shortest[k] == lowest and not best_free and row4col[k] == -1:
                        best_j = k
                        best_free = True
                if best_j == -1 or lowest == INFINITY:
                    feasible = False
                    break
                j = best_j
                min_val = lowest
                scol[j] = 1
                if row4col[j] == -1:
                    sink = j
                else:
                    i = row4col[j]
            if not feasible:
                break

            u[cur_row] += min_val
            for k in range(n):
                if srow[k] != 0 and k != cur_row:
                    u[k] += min_val - shortest[col4row[k]]
            for k in range(n):
                if scol[k] != 0:
                    v[k] -= min_val - shortest[k]

            j = sink
            while True:
                i = path[j]
                row4col[j] = i
                tmp = col4row[i]
                col4row[i] = j
                j = tmp
                if i == cur_row:
                    break

    if not feasible:
        raise ValueError("assignment infeasible")
    return col4row_arr
