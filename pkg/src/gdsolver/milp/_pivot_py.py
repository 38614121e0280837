"""Pure-numpy simplex iteration kernel.

Mirrors ``_pivot_ext.pyx`` operation for operation so both backends take the
same pivots.  See :func:`gdsolver.milp.lp.iterate` for the contract.
"""
import numpy as np

AT_LB, AT_UB, FREE, BASIC = 0, 1, 2, 3
OPTIMAL, UNBOUNDED, ITER_LIMIT = 0, 1, 2

_TIE = 1e-12
_DEGENERATE = 1e-12


def iterate(T, d, basis, x, status, lo, hi, max_iter, opt_tol, piv_tol, bland_after):
    m = T.shape[0]
    movable = hi > lo
    degenerate = 0
    for it in range(max_iter):
        score = np.full(d.shape[0], -np.inf)
        at_lb = (status == AT_LB) & movable
        at_ub = (status == AT_UB) & movable
        free = (status == FREE) & movable
        score[at_lb] = -d[at_lb]
        score[at_ub] = d[at_ub]
        score[free] = np.abs(d[free])
        cand = score > opt_tol
        if not cand.any():
            return OPTIMAL, it
        bland = degenerate > bland_after
        q = int(np.argmax(cand)) if bland else int(np.argmax(score))
        direction = 1.0 if d[q] < 0.0 else -1.0

        col = T[:, q] * direction
        bv = basis
        xb = x[bv]
        ratios = np.full(m, np.inf)
        dec = col > piv_tol
        inc = col < -piv_tol
        lob = lo[bv]
        hib = hi[bv]
        dec &= np.isfinite(lob)
        inc &= np.isfinite(hib)
        ratios[dec] = (xb[dec] - lob[dec]) / col[dec]
        ratios[inc] = (hib[inc] - xb[inc]) / (-col[inc])
        np.maximum(ratios, 0.0, out=ratios)

        theta = hi[q] - lo[q]
        r = -1
        if m:
            rmin = ratios.min()
            if rmin < theta:
                ties = np.flatnonzero(ratios <= rmin + _TIE)
                if bland:
                    r = int(ties[np.argmin(bv[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(col[ties]))])
                theta = ratios[r]
        if theta == np.inf:
            return UNBOUNDED, it

        if theta > 0.0:
            x[bv] = xb - theta * col
            x[q] += direction * theta
        if r < 0:
            if direction > 0:
                status[q] = AT_UB
                x[q] = hi[q]
            else:
                status[q] = AT_LB
                x[q] = lo[q]
        else:
            leaving = bv[r]
            if col[r] > 0.0:
                status[leaving] = AT_LB
                x[leaving] = lo[leaving]
            else:
                status[leaving] = AT_UB
                x[leaving] = hi[leaving]
            prow = T[r] / T[r, q]
            colq = T[:, q].copy()
            colq[r] = 0.0
            nz = np.flatnonzero(colq)
            if nz.size:
                T[nz] -= np.outer(colq[nz], prow)
            T[r] = prow
            T[:, q] = 0.0
            T[r, q] = 1.0
            d -= d[q] * prow
            d[q] = 0.0
            basis[r] = q
            status[q] = BASIC
        degenerate = degenerate + 1 if theta <= _DEGENERATE else 0
    return ITER_LIMIT, max_iter
