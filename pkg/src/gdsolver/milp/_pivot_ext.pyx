# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex iteration kernel.

Same contract and pivot rules as ``_pivot_py.iterate``; the row update skips
zero multipliers and zero pivot-row entries, which keeps sparse tableaux cheap.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs, isfinite

cnp.import_array()

cdef enum:
    AT_LB = 0
    AT_UB = 1
    FREE = 2
    BASIC = 3

cdef double TIE = 1e-12
cdef double DEGENERATE = 1e-12


def iterate(double[:, ::1] T, double[::1] d, cnp.int64_t[::1] basis, double[::1] x,
            signed char[::1] status, double[::1] lo, double[::1] hi,
            Py_ssize_t max_iter, double opt_tol, double piv_tol, Py_ssize_t bland_after):
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t ncol = T.shape[1]
    cdef Py_ssize_t it, j, i, k, q, r, leaving, nnz
    cdef Py_ssize_t degenerate = 0
    cdef bint bland
    cdef double best, score, direction, theta, ratio, rmin, a, f, piv, dq, best_abs
    cdef cnp.ndarray[cnp.float64_t, ndim=1] col_arr = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ratio_arr = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prow_arr = np.empty(ncol, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nzc_arr = np.empty(ncol, dtype=np.int64)
    cdef double[::1] col = col_arr
    cdef double[::1] ratios = ratio_arr
    cdef double[::1] prow = prow_arr
    cdef cnp.int64_t[::1] nzc = nzc_arr

    for it in range(max_iter):
        bland = degenerate > bland_after
        q = -1
        best = -INFINITY
        for j in range(ncol):
            if status[j] == BASIC or not (hi[j] > lo[j]):
                continue
            if status[j] == AT_LB:
                score = -d[j]
            elif status[j] == AT_UB:
                score = d[j]
            else:
                score = fabs(d[j])
            if score > opt_tol:
                if bland:
                    q = j
                    break
                if score > best:
                    best = score
                    q = j
        if q < 0:
            return 0, it
        direction = 1.0 if d[q] < 0.0 else -1.0

        rmin = INFINITY
        for i in range(m):
            a = T[i, q] * direction
            col[i] = a
            k = basis[i]
            ratio = INFINITY
            if a > piv_tol:
                if isfinite(lo[k]):
                    ratio = (x[k] - lo[k]) / a
            elif a < -piv_tol:
                if isfinite(hi[k]):
                    ratio = (hi[k] - x[k]) / (-a)
            if ratio < 0.0:
                ratio = 0.0
            ratios[i] = ratio
            if ratio < rmin:
                rmin = ratio

        theta = hi[q] - lo[q]
        r = -1
        if m > 0 and rmin < theta:
            best_abs = -1.0
            for i in range(m):
                if ratios[i] <= rmin + TIE:
                    if bland:
                        if r < 0 or basis[i] < basis[r]:
                            r = i
                    elif fabs(col[i]) > best_abs:
                        best_abs = fabs(col[i])
                        r = i
            theta = ratios[r]
        if theta == INFINITY:
            return 1, it

        if theta > 0.0:
            for i in range(m):
                k = basis[i]
                x[k] = x[k] - theta * col[i]
            x[q] += direction * theta
        if r < 0:
            if direction > 0:
                status[q] = AT_UB
                x[q] = hi[q]
            else:
                status[q] = AT_LB
                x[q] = lo[q]
        else:
            leaving = basis[r]
            if col[r] > 0.0:
                status[leaving] = AT_LB
                x[leaving] = lo[leaving]
            else:
                status[leaving] = AT_UB
                x[leaving] = hi[leaving]
            piv = T[r, q]
            nnz = 0
            for k in range(ncol):
                prow[k] = T[r, k] / piv
                if prow[k] != 0.0:
                    nzc[nnz] = k
                    nnz += 1
            for i in range(m):
                if i == r:
                    continue
                f = T[i, q]
                if f != 0.0:
                    for j in range(nnz):
                        k = nzc[j]
                        T[i, k] = T[i, k] - f * prow[k]
            for k in range(ncol):
                T[r, k] = prow[k]
            for i in range(m):
                T[i, q] = 0.0
            T[r, q] = 1.0
            dq = d[q]
            if dq != 0.0:
                for j in range(nnz):
                    k = nzc[j]
                    d[k] = d[k] - dq * prow[k]
            d[q] = 0.0
            basis[r] = q
            status[q] = BASIC
        if theta <= DEGENERATE:
            degenerate += 1
        else:
            degenerate = 0
    return 2, max_iter
