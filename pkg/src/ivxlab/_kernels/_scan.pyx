# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the NumPy scan kernels.

Semantics are defined by numpy_backend; this module only exists for speed.
Candidates hitting a singular solve are flagged (value left at zero) and the
dispatcher recomputes them through the fallback's pseudo-inverse path.
"""

import numpy as np

from libc.math cimport fabs, floor, isfinite, pow


cdef double TINY = 1e-300


cdef int lu_factor(double* A, int n, int* piv) noexcept nogil:
    """In-place LU with partial pivoting on a row-major n x n matrix."""
    cdef int i, j, k, pr
    cdef double mx, tmp, f
    for k in range(n):
        pr = k
        mx = fabs(A[k * n + k])
        for i in range(k + 1, n):
            if fabs(A[i * n + k]) > mx:
                mx = fabs(A[i * n + k])
                pr = i
        if mx < TINY:
            return -1
        piv[k] = pr
        if pr != k:
            for j in range(n):
                tmp = A[k * n + j]
                A[k * n + j] = A[pr * n + j]
                A[pr * n + j] = tmp
        for i in range(k + 1, n):
            f = A[i * n + k] / A[k * n + k]
            A[i * n + k] = f
            for j in range(k + 1, n):
                A[i * n + j] -= f * A[k * n + j]
    return 0


cdef void lu_solve(double* A, int n, int* piv, double* b) noexcept nogil:
    cdef int i, j
    cdef double tmp, s
    for i in range(n):
        if piv[i] != i:
            tmp = b[i]
            b[i] = b[piv[i]]
            b[piv[i]] = tmp
    for i in range(n):
        s = b[i]
        for j in range(i):
            s -= A[i * n + j] * b[j]
        b[i] = s
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= A[i * n + j] * b[j]
        b[i] = s / A[i * n + i]


cdef int solve_copy(const double* A, const double* b, int n, double* lu, int* piv, double* x) noexcept nogil:
    """x = A^{-1} b without destroying A; returns -1 on singularity."""
    cdef int i
    for i in range(n * n):
        lu[i] = A[i]
    for i in range(n):
        x[i] = b[i]
    if lu_factor(lu, n, piv) != 0:
        return -1
    lu_solve(lu, n, piv, x)
    for i in range(n):
        if not isfinite(x[i]):
            return -1
    return 0


cdef int inv_copy(const double* A, int n, double* lu, int* piv, double* col, double* Ai) noexcept nogil:
    """Ai = A^{-1}; returns -1 on singularity."""
    cdef int i, j
    for i in range(n * n):
        lu[i] = A[i]
    if lu_factor(lu, n, piv) != 0:
        return -1
    for j in range(n):
        for i in range(n):
            col[i] = 1.0 if i == j else 0.0
        lu_solve(lu, n, piv, col)
        for i in range(n):
            if not isfinite(col[i]):
                return -1
            Ai[i * n + j] = col[i]
    return 0


cdef double quad_form(const double* V, const double* d, int n, double* lu, int* piv, double* x, int* err) noexcept nogil:
    """d' V^{-1} d; err set to 1 on singular or non-finite result."""
    cdef int i
    cdef double q = 0.0
    if solve_copy(V, d, n, lu, piv, x) != 0:
        err[0] = 1
        return 0.0
    for i in range(n):
        q += d[i] * x[i]
    if not isfinite(q):
        err[0] = 1
        return 0.0
    return q


def ols_scan(const double[::1] y, const double[:, ::1] x, const long[::1] grid, int mode):
    """Compiled least-squares break scan; see numpy_backend.ols_scan."""
    cdef int T = x.shape[0]
    cdef int p = x.shape[1]
    cdef int G = grid.shape[0]
    cdef int d
    if mode == 0:
        d = p
    elif mode == 2:
        d = p + 1
    else:
        d = 2 * p + 1

    xnp = np.asarray(x)
    ynp = np.asarray(y)
    cdef double[:, :, ::1] cxx = np.ascontiguousarray(np.cumsum(xnp[:, :, None] * xnp[:, None, :], axis=0))
    cdef double[:, ::1] cxy = np.ascontiguousarray(np.cumsum(xnp * ynp[:, None], axis=0))
    cdef double[::1] cyy = np.cumsum(ynp * ynp)
    cdef double[:, ::1] cx = np.ascontiguousarray(np.cumsum(xnp, axis=0))
    cdef double[::1] cy = np.cumsum(ynp)

    values_np = np.zeros(G)
    flags_np = np.zeros(G, dtype=np.uint8)
    cdef double[::1] values = values_np
    cdef unsigned char[::1] flags = flags_np

    scratch_np = np.zeros(8 * d * d + 8 * d, dtype=np.float64)
    piv_np = np.zeros(d, dtype=np.intc)
    cdef double[::1] sc = scratch_np
    cdef int[::1] piv = piv_np

    cdef double* A1 = &sc[0]
    cdef double* A2 = &sc[d * d]
    cdef double* Ai1 = &sc[2 * d * d]
    cdef double* Ai2 = &sc[3 * d * d]
    cdef double* V = &sc[4 * d * d]
    cdef double* lu = &sc[5 * d * d]
    cdef double* Afull = &sc[6 * d * d]
    cdef double* col = &sc[8 * d * d]
    cdef double* b1 = &sc[8 * d * d + d]
    cdef double* b2 = &sc[8 * d * d + 2 * d]
    cdef double* th1 = &sc[8 * d * d + 3 * d]
    cdef double* th2 = &sc[8 * d * d + 4 * d]
    cdef double* dth = &sc[8 * d * d + 5 * d]
    cdef double* xw = &sc[8 * d * d + 6 * d]
    cdef double* bf = &sc[8 * d * d + 7 * d]

    cdef int g, i, j, k, err
    cdef double n1, n2, ssr, sigma2, q, syy_tot
    syy_tot = cyy[T - 1]

    with nogil:
        for g in range(G):
            k = <int>grid[g]
            n1 = <double>k
            n2 = <double>(T - k)
            err = 0

            if mode == 0:
                for i in range(p):
                    b1[i] = cxy[k - 1, i]
                    b2[i] = cxy[T - 1, i] - b1[i]
                    for j in range(p):
                        A1[i * p + j] = cxx[k - 1, i, j]
                        A2[i * p + j] = cxx[T - 1, i, j] - A1[i * p + j]
            elif mode == 2:
                A1[0] = n1
                A2[0] = n2
                b1[0] = cy[k - 1]
                b2[0] = cy[T - 1] - b1[0]
                for i in range(p):
                    A1[0 * d + (i + 1)] = cx[k - 1, i]
                    A1[(i + 1) * d + 0] = cx[k - 1, i]
                    A2[0 * d + (i + 1)] = cx[T - 1, i] - cx[k - 1, i]
                    A2[(i + 1) * d + 0] = A2[0 * d + (i + 1)]
                    b1[i + 1] = cxy[k - 1, i]
                    b2[i + 1] = cxy[T - 1, i] - cxy[k - 1, i]
                    for j in range(p):
                        A1[(i + 1) * d + (j + 1)] = cxx[k - 1, i, j]
                        A2[(i + 1) * d + (j + 1)] = cxx[T - 1, i, j] - cxx[k - 1, i, j]

            if mode == 0 or mode == 2:
                if inv_copy(A1, d, lu, &piv[0], col, Ai1) != 0 or inv_copy(A2, d, lu, &piv[0], col, Ai2) != 0:
                    flags[g] = 1
                    continue
                ssr = syy_tot
                for i in range(d):
                    th1[i] = 0.0
                    th2[i] = 0.0
                    for j in range(d):
                        th1[i] += Ai1[i * d + j] * b1[j]
                        th2[i] += Ai2[i * d + j] * b2[j]
                for i in range(d):
                    ssr -= th1[i] * b1[i] + th2[i] * b2[i]
                    dth[i] = th1[i] - th2[i]
                    for j in range(d):
                        V[i * d + j] = Ai1[i * d + j] + Ai2[i * d + j]
                if ssr < 0.0:
                    ssr = 0.0
                sigma2 = ssr / T
                q = quad_form(V, dth, d, lu, &piv[0], xw, &err)
                if err:
                    flags[g] = 1
                    continue
                if q < 0.0:
                    q = 0.0
                values[g] = q / sigma2 if sigma2 > 0.0 else 0.0
            else:
                # one joint design [1, x*I1, x*I2]
                for i in range(d * d):
                    Afull[i] = 0.0
                Afull[0] = <double>T
                bf[0] = cy[T - 1]
                for i in range(p):
                    Afull[0 * d + (1 + i)] = cx[k - 1, i]
                    Afull[(1 + i) * d + 0] = cx[k - 1, i]
                    Afull[0 * d + (1 + p + i)] = cx[T - 1, i] - cx[k - 1, i]
                    Afull[(1 + p + i) * d + 0] = Afull[0 * d + (1 + p + i)]
                    bf[1 + i] = cxy[k - 1, i]
                    bf[1 + p + i] = cxy[T - 1, i] - cxy[k - 1, i]
                    for j in range(p):
                        Afull[(1 + i) * d + (1 + j)] = cxx[k - 1, i, j]
                        Afull[(1 + p + i) * d + (1 + p + j)] = cxx[T - 1, i, j] - cxx[k - 1, i, j]
                if inv_copy(Afull, d, lu, &piv[0], col, Ai1) != 0:
                    flags[g] = 1
                    continue
                ssr = syy_tot
                for i in range(d):
                    th1[i] = 0.0
                    for j in range(d):
                        th1[i] += Ai1[i * d + j] * bf[j]
                for i in range(d):
                    ssr -= th1[i] * bf[i]
                if ssr < 0.0:
                    ssr = 0.0
                sigma2 = ssr / T
                for i in range(p):
                    dth[i] = th1[1 + i] - th1[1 + p + i]
                    for j in range(p):
                        V[i * p + j] = (
                            Ai1[(1 + i) * d + (1 + j)]
                            + Ai1[(1 + p + i) * d + (1 + p + j)]
                            - Ai1[(1 + i) * d + (1 + p + j)]
                            - Ai1[(1 + p + i) * d + (1 + j)]
                        )
                q = quad_form(V, dth, p, lu, &piv[0], xw, &err)
                if err:
                    flags[g] = 1
                    continue
                if q < 0.0:
                    q = 0.0
                values[g] = q / sigma2 if sigma2 > 0.0 else 0.0

    return values_np, flags_np


cdef struct RegimeOut:
    double alpha
    double sigma2
    double ssr
    int n
    int ok


cdef RegimeOut ivx_regime(
    const double* y,
    const double* x,
    const double* z,
    const double* vh,
    int n,
    int p,
    bint demean,
    bint fm,
    bint bias,
    double eta,
    double* beta,
    double* zbar,
    double* Q,
    double* sand,
    double* resid,
    double* work,
    int* piv,
) noexcept nogil:
    """One estimation window of the instrumented scan.

    ``vh`` must hold the n-1 autoregression innovations aligned with the
    window rows.  Outputs beta, zbar, the fully modified covariance Q (when
    fm and demean) and the unscaled sandwich.
    """
    cdef RegimeOut out
    cdef int i, j, l, h, m, k, err
    cdef double xbar_j, ybar, a0, s, wgt, suu, rho2, omfm, quad, sigma2
    cdef double* A = work
    cdef double* Ai = work + p * p
    cdef double* Szz = work + 2 * p * p
    cdef double* M = work + 3 * p * p
    cdef double* ovv = work + 4 * p * p
    cdef double* lu = work + 5 * p * p
    cdef double* xbar = work + 6 * p * p
    cdef double* bvec = work + 6 * p * p + p
    cdef double* delta = work + 6 * p * p + 2 * p
    cdef double* ouv = work + 6 * p * p + 3 * p
    cdef double* sol = work + 6 * p * p + 4 * p
    cdef double* tmpv = work + 6 * p * p + 5 * p

    out.ok = 1
    out.n = n
    k = n - 1
    m = <int>floor(eta * pow(<double>n, 0.2))

    ybar = 0.0
    for j in range(p):
        xbar[j] = 0.0
        zbar[j] = 0.0
    for i in range(n):
        ybar += y[i]
        for j in range(p):
            xbar[j] += x[i * p + j]
            zbar[j] += z[i * p + j]
    ybar /= n
    for j in range(p):
        xbar[j] /= n
        zbar[j] /= n
    if not demean:
        ybar = 0.0
        for j in range(p):
            xbar[j] = 0.0

    for i in range(p * p):
        A[i] = 0.0
        Szz[i] = 0.0
    for j in range(p):
        bvec[j] = 0.0
    for i in range(n):
        for j in range(p):
            bvec[j] += z[i * p + j] * (y[i] - ybar)
            for l in range(p):
                A[j * p + l] += z[i * p + j] * (x[i * p + l] - xbar[l])
                Szz[j * p + l] += z[i * p + j] * z[i * p + l]

    if solve_copy(A, bvec, p, lu, piv, beta) != 0:
        out.ok = 0
        return out

    if bias and k > m:
        a0 = 0.0
        if demean:
            a0 = ybar
            for j in range(p):
                a0 -= beta[j] * zbar[j]
        for i in range(n):
            s = y[i] - a0
            for j in range(p):
                s -= x[i * p + j] * beta[j]
            resid[i] = s
        for j in range(p):
            delta[j] = 0.0
        for h in range(m + 1):
            wgt = 1.0 - h / (m + 1.0)
            for i in range(h, k):
                for j in range(p):
                    delta[j] += wgt * resid[i] * vh[(i - h) * p + j]
        for j in range(p):
            tmpv[j] = bvec[j] - delta[j]
        if solve_copy(A, tmpv, p, lu, piv, beta) != 0:
            out.ok = 0
            return out

    a0 = 0.0
    if demean:
        a0 = ybar
        for j in range(p):
            a0 -= beta[j] * zbar[j]
    out.alpha = a0
    out.ssr = 0.0
    for i in range(n):
        s = y[i] - a0
        for j in range(p):
            s -= x[i * p + j] * beta[j]
        resid[i] = s
        out.ssr += s * s
    sigma2 = out.ssr / n
    out.sigma2 = sigma2

    if inv_copy(A, p, lu, piv, tmpv, Ai) != 0:
        out.ok = 0
        return out
    # sand = Ai Szz Ai'
    for i in range(p):
        for j in range(p):
            s = 0.0
            for l in range(p):
                s += Ai[i * p + l] * Szz[l * p + j]
            M[i * p + j] = s
    for i in range(p):
        for j in range(p):
            s = 0.0
            for l in range(p):
                s += M[i * p + l] * Ai[j * p + l]
            sand[i * p + j] = s

    if fm and demean:
        suu = 0.0
        for i in range(k):
            suu += resid[i] * resid[i]
        suu /= k
        for j in range(p):
            ouv[j] = 0.0
            for l in range(p):
                ovv[j * p + l] = 0.0
        for i in range(k):
            for j in range(p):
                ouv[j] += resid[i] * vh[i * p + j]
                for l in range(p):
                    ovv[j * p + l] += vh[i * p + j] * vh[i * p + l]
        for h in range(1, m + 1):
            wgt = 1.0 - h / (m + 1.0)
            for i in range(h, k):
                for j in range(p):
                    ouv[j] += wgt * (resid[i] * vh[(i - h) * p + j] + resid[i - h] * vh[i * p + j])
                    for l in range(p):
                        ovv[j * p + l] += wgt * (vh[i * p + j] * vh[(i - h) * p + l] + vh[(i - h) * p + j] * vh[i * p + l])
        for j in range(p):
            ouv[j] /= k
            for l in range(p):
                ovv[j * p + l] /= k
        if solve_copy(ovv, ouv, p, lu, piv, sol) != 0:
            out.ok = 0
            return out
        quad = 0.0
        for j in range(p):
            quad += ouv[j] * sol[j]
        if suu <= 0.0:
            rho2 = 0.0 if quad <= 0.0 else 1.0
        else:
            rho2 = quad / suu
            if rho2 < 0.0:
                rho2 = 0.0
            if rho2 > 1.0:
                rho2 = 1.0
        omfm = suu * (1.0 - rho2)
        for i in range(p):
            for j in range(p):
                M[i * p + j] = sigma2 * Szz[i * p + j] - omfm * n * zbar[i] * zbar[j]
        # Q = Ai M Ai'
        for i in range(p):
            for j in range(p):
                s = 0.0
                for l in range(p):
                    s += Ai[i * p + l] * M[l * p + j]
                ovv[i * p + j] = s
        for i in range(p):
            for j in range(p):
                s = 0.0
                for l in range(p):
                    s += ovv[i * p + l] * Ai[j * p + l]
                Q[i * p + j] = s
    else:
        for i in range(p * p):
            Q[i] = sigma2 * sand[i]

    return out


def ivx_scan(
    const double[::1] y,
    const double[:, ::1] x,
    const double[:, ::1] z,
    const double[:, ::1] vhat,
    const long[::1] grid,
    double rz,
    int demean,
    int restart,
    int fm,
    int bias,
    double eta,
):
    """Compiled instrumented break scan; see numpy_backend.ivx_scan."""
    cdef int T = x.shape[0]
    cdef int p = x.shape[1]
    cdef int G = grid.shape[0]

    wb_np = np.zeros(G)
    wa_np = np.full(G, np.nan)
    flags_np = np.zeros(G, dtype=np.uint8)
    cdef double[::1] wb = wb_np
    cdef double[::1] wa = wa_np
    cdef unsigned char[::1] flags = flags_np

    rzpow_np = rz ** np.arange(T, dtype=np.float64)
    cdef double[::1] rzpow = rzpow_np

    z2_np = np.zeros((T, p))
    cdef double[:, ::1] z2 = z2_np
    resid_np = np.zeros(T)
    cdef double[::1] resid = resid_np
    work_np = np.zeros(2 * (6 * p * p + 6 * p) + 64, dtype=np.float64)
    cdef double[::1] work = work_np
    piv_np = np.zeros(p + 1, dtype=np.intc)
    cdef int[::1] piv = piv_np

    beta_np = np.zeros((2, p))
    zbar_np = np.zeros((2, p))
    Q_np = np.zeros((2, p, p))
    sand_np = np.zeros((2, p, p))
    cdef double[:, ::1] beta = beta_np
    cdef double[:, ::1] zbarv = zbar_np
    cdef double[:, :, ::1] Qv = Q_np
    cdef double[:, :, ::1] sandv = sand_np

    vb_np = np.zeros(p * p + 2 * p + 8)
    cdef double[::1] vb = vb_np
    cdef double* Vsum = &vb[0]
    cdef double* dbeta = &vb[p * p]
    cdef double* xsol = &vb[p * p + p]

    cdef RegimeOut r1, r2
    cdef int g, i, j, k, n2, err
    cdef double sigma2_pool, q, om1, om2, da, denom, s

    with nogil:
        for g in range(G):
            k = <int>grid[g]
            n2 = T - k
            err = 0

            if restart:
                for i in range(n2):
                    for j in range(p):
                        z2[i, j] = z[k + i, j] - rzpow[i] * z[k, j]
            else:
                for i in range(n2):
                    for j in range(p):
                        z2[i, j] = z[k + i, j]

            r1 = ivx_regime(
                &y[0], &x[0, 0], &z[0, 0], &vhat[0, 0], k, p,
                demean != 0, fm != 0, bias != 0, eta,
                &beta[0, 0], &zbarv[0, 0], &Qv[0, 0, 0], &sandv[0, 0, 0],
                &resid[0], &work[0], &piv[0],
            )
            r2 = ivx_regime(
                &y[k], &x[k, 0], &z2[0, 0], &vhat[k, 0], n2, p,
                demean != 0, fm != 0, bias != 0, eta,
                &beta[1, 0], &zbarv[1, 0], &Qv[1, 0, 0], &sandv[1, 0, 0],
                &resid[0], &work[0], &piv[0],
            )
            if not (r1.ok and r2.ok):
                flags[g] = 1
                continue

            for j in range(p):
                dbeta[j] = beta[0, j] - beta[1, j]
            if fm and demean:
                for i in range(p):
                    for j in range(p):
                        Vsum[i * p + j] = Qv[0, i, j] + Qv[1, i, j]
            else:
                sigma2_pool = (r1.ssr + r2.ssr) / T
                for i in range(p):
                    for j in range(p):
                        Vsum[i * p + j] = sigma2_pool * (sandv[0, i, j] + sandv[1, i, j])
            q = quad_form(Vsum, dbeta, p, &work[0], &piv[0], xsol, &err)
            if err:
                flags[g] = 1
                continue
            wb[g] = q if q > 0.0 else 0.0

            if demean:
                om1 = r1.sigma2 / r1.n
                om2 = r2.sigma2 / r2.n
                for i in range(p):
                    for j in range(p):
                        if fm:
                            om1 += zbarv[0, i] * Qv[0, i, j] * zbarv[0, j]
                            om2 += zbarv[1, i] * Qv[1, i, j] * zbarv[1, j]
                        else:
                            om1 += zbarv[0, i] * r1.sigma2 * sandv[0, i, j] * zbarv[0, j]
                            om2 += zbarv[1, i] * r2.sigma2 * sandv[1, i, j] * zbarv[1, j]
                da = r1.alpha - r2.alpha
                denom = om1 + om2
                if denom <= 0.0 or not isfinite(denom):
                    wa[g] = 0.0
                    flags[g] = 1
                else:
                    wa[g] = da * da / denom

    return wb_np, wa_np, flags_np
