"""Compiled line solves for the two implicit half-operators.

Both factors of the splitting are solved in structured form:

* (I - h P): per theta block a tridiagonal system in mu; blocks j and
  M+1-j couple only through the kappa_3 symmetry entry at i = 1, so each
  pair is solved jointly via a bordered (rank-one) correction.  Self-paired
  blocks (j = 0, and the middle block when M is odd) absorb the coupling
  into their diagonal.
* (I - h R): per mu line a cyclic tridiagonal system in theta, solved by
  Sherman-Morrison rank-one corrected elimination.

All kernels return a status flag: 0 on success, 1 on a vanishing pivot
(impossible under diagonal dominance; surfaced upstream as SolveFailure).
"""

import numpy as np
from numba import njit

_PIVOT_FLOOR = 1e-300


@njit(cache=True)
def _thomas2(sub, diag, sup, b1, b2, x1, x2):
    """Solve one tridiagonal system for two right-hand sides."""
    n = diag.shape[0]
    beta = np.empty(n)
    gamma = np.empty(n)
    piv = diag[0]
    if abs(piv) < _PIVOT_FLOOR:
        return 1
    beta[0] = piv
    x1[0] = b1[0]
    x2[0] = b2[0]
    for k in range(1, n):
        gamma[k - 1] = sup[k - 1] / beta[k - 1]
        piv = diag[k] - sub[k] * gamma[k - 1]
        if abs(piv) < _PIVOT_FLOOR:
            return 1
        beta[k] = piv
        x1[k] = b1[k] - sub[k] * x1[k - 1] / beta[k - 1]
        x2[k] = b2[k] - sub[k] * x2[k - 1] / beta[k - 1]
    x1[n - 1] /= beta[n - 1]
    x2[n - 1] /= beta[n - 1]
    for k in range(n - 2, -1, -1):
        x1[k] = x1[k] / beta[k] - gamma[k] * x1[k + 1]
        x2[k] = x2[k] / beta[k] - gamma[k] * x2[k + 1]
    return 0


@njit(cache=True)
def p_solve(h, psi, cl, cc, cr, kappa3, pair, rhs, out):
    """Solve (I - h P) x = rhs on the (M+1, N) field layout."""
    m1, n = psi.shape
    sub = np.empty(n)
    diag = np.empty(n)
    sup = np.empty(n)
    sub2 = np.empty(n)
    diag2 = np.empty(n)
    sup2 = np.empty(n)
    e0 = np.zeros(n)
    e0[0] = 1.0
    u = np.empty(n)
    w = np.empty(n)
    u2 = np.empty(n)
    w2 = np.empty(n)

    for j in range(m1):
        jp = pair[j]
        if jp < j:
            continue
        cross_j = -h * psi[j, 0] * kappa3
        for k in range(n):
            diag[k] = 1.0 - h * psi[j, k] * cc[k]
            sub[k] = -h * psi[j, k] * cl[k]
            sup[k] = -h * psi[j, k] * cr[k]
        if jp == j:
            diag[0] += cross_j
            st = _thomas2(sub, diag, sup, rhs[j], e0, u, w)
            if st != 0:
                return st
            for k in range(n):
                out[j, k] = u[k]
        else:
            cross_p = -h * psi[jp, 0] * kappa3
            for k in range(n):
                diag2[k] = 1.0 - h * psi[jp, k] * cc[k]
                sub2[k] = -h * psi[jp, k] * cl[k]
                sup2[k] = -h * psi[jp, k] * cr[k]
            st = _thomas2(sub, diag, sup, rhs[j], e0, u, w)
            if st != 0:
                return st
            st = _thomas2(sub2, diag2, sup2, rhs[jp], e0, u2, w2)
            if st != 0:
                return st
            # First components couple through the kappa_3 border:
            #   x_j[0] + c1 x_jp[0] = u[0],  c2 x_j[0] + x_jp[0] = u2[0].
            c1 = cross_j * w[0]
            c2 = cross_p * w2[0]
            det = 1.0 - c1 * c2
            if abs(det) < _PIVOT_FLOOR:
                return 1
            x0 = (u[0] - c1 * u2[0]) / det
            xp0 = (u2[0] - c2 * u[0]) / det
            for k in range(n):
                out[j, k] = u[k] - cross_j * xp0 * w[k]
                out[jp, k] = u2[k] - cross_p * x0 * w2[k]
    return 0


@njit(cache=True)
def r_solve(h, psi, tl, tc, tr, rhs, out):
    """Solve (I - h R) x = rhs: one cyclic tridiagonal system per mu line."""
    m1, n = psi.shape
    sub = np.empty(m1)
    diag = np.empty(m1)
    sup = np.empty(m1)
    b = np.empty(m1)
    uvec = np.zeros(m1)
    y = np.empty(m1)
    z = np.empty(m1)

    for i in range(n):
        for j in range(m1):
            diag[j] = 1.0 - h * psi[j, i] * tc[j]
            sub[j] = -h * psi[j, i] * tl[j]
            sup[j] = -h * psi[j, i] * tr[j]
            b[j] = rhs[j, i]
        alpha = sub[0]  # corner (0, M), the kappa_1 coupling
        betac = sup[m1 - 1]  # corner (M, 0), the kappa_2 coupling
        gamma = -diag[0]
        # Rank-one split A = T + u v^T with u = (gamma,0,..,0,betac),
        # v = (1,0,..,0,alpha/gamma).
        diag[0] -= gamma
        diag[m1 - 1] -= alpha * betac / gamma
        uvec[0] = gamma
        uvec[m1 - 1] = betac
        st = _thomas2(sub, diag, sup, b, uvec, y, z)
        if st != 0:
            return st
        fac = alpha / gamma
        denom = 1.0 + z[0] + fac * z[m1 - 1]
        if abs(denom) < _PIVOT_FLOOR:
            return 1
        corr = (y[0] + fac * y[m1 - 1]) / denom
        for j in range(m1):
            out[j, i] = y[j] - corr * z[j]
        uvec[0] = 0.0
        uvec[m1 - 1] = 0.0
    return 0
