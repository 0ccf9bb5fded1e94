# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Same contracts as ``_pykernels``."""

import numpy as np

from libc.math cimport fabs, sqrt, cos, sin


cdef inline void _residual(const double* x, const double[:, ::1] tgt,
                           const double[:, ::1] u, double* f) noexcept nogil:
    cdef int j, c, i
    cdef double s
    for j in range(2):
        for c in range(3):
            s = 0.0
            for i in range(3):
                s += u[i, j] * x[3 * i + c]
            f[3 * j + c] = s - tgt[j, c]
    for i in range(3):
        f[6 + i] = x[3 * i] * x[3 * i] + x[3 * i + 1] * x[3 * i + 1] + x[3 * i + 2] * x[3 * i + 2] - 1.0


cdef inline int _solve9(double* a, double* b) noexcept nogil:
    """Gaussian elimination with partial pivoting on a 9x9 row-major system; b <- a^-1 b."""
    cdef int n = 9
    cdef int col, r, piv, k
    cdef double amax, v, tmp, factor
    for col in range(n):
        piv = col
        amax = fabs(a[col * n + col])
        for r in range(col + 1, n):
            v = fabs(a[r * n + col])
            if v > amax:
                amax = v
                piv = r
        if amax < 1e-300:
            return 0
        if piv != col:
            for k in range(n):
                tmp = a[col * n + k]
                a[col * n + k] = a[piv * n + k]
                a[piv * n + k] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, n):
            factor = a[r * n + col] / a[col * n + col]
            if factor != 0.0:
                for k in range(col, n):
                    a[r * n + k] -= factor * a[col * n + k]
                b[r] -= factor * b[col]
    for r in range(n - 1, -1, -1):
        v = b[r]
        for k in range(r + 1, n):
            v -= a[r * n + k] * b[k]
        b[r] = v / a[r * n + r]
    return 1


cdef inline double _maxabs(const double* f, int n) noexcept nogil:
    cdef double m = 0.0
    cdef int i
    for i in range(n):
        if fabs(f[i]) > m:
            m = fabs(f[i])
    return m


cdef inline double _norm2(const double* f, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += f[i] * f[i]
    return sqrt(s)


cdef int _newton(const double[:, ::1] tgt, const double[:, ::1] u, const double* seed,
                 double* out, double tol, int maxiter, int maxhalve) noexcept nogil:
    cdef double x[9]
    cdef double xn[9]
    cdef double f[9]
    cdef double fn[9]
    cdef double jac[81]
    cdef double dx[9]
    cdef double fnorm, fnn, s
    cdef int it, h, i, j, c, k, ok
    for k in range(9):
        x[k] = seed[k]
    _residual(x, tgt, u, f)
    fnorm = _norm2(f, 9)
    cdef int polished = 0
    for it in range(maxiter + 2):
        if _maxabs(f, 9) < tol and polished:
            for k in range(9):
                out[k] = x[k]
            return 1
        if _maxabs(f, 9) < tol:
            # one extra full step takes the quadratic gain down to rounding
            polished = 1
            for k in range(81):
                jac[k] = 0.0
            for j in range(2):
                for c in range(3):
                    for i in range(3):
                        jac[(3 * j + c) * 9 + 3 * i + c] = u[i, j]
            for i in range(3):
                for c in range(3):
                    jac[(6 + i) * 9 + 3 * i + c] = 2.0 * x[3 * i + c]
            for k in range(9):
                dx[k] = -f[k]
            if _solve9(jac, dx):
                for k in range(9):
                    xn[k] = x[k] + dx[k]
                _residual(xn, tgt, u, fn)
                if _norm2(fn, 9) <= fnorm:
                    for k in range(9):
                        x[k] = xn[k]
                        f[k] = fn[k]
                    fnorm = _norm2(fn, 9)
            continue
        for k in range(81):
            jac[k] = 0.0
        for j in range(2):
            for c in range(3):
                for i in range(3):
                    jac[(3 * j + c) * 9 + 3 * i + c] = u[i, j]
        for i in range(3):
            for c in range(3):
                jac[(6 + i) * 9 + 3 * i + c] = 2.0 * x[3 * i + c]
        for k in range(9):
            dx[k] = -f[k]
        if not _solve9(jac, dx):
            return 0
        s = 1.0
        ok = 0
        for h in range(maxhalve + 1):
            for k in range(9):
                xn[k] = x[k] + s * dx[k]
            _residual(xn, tgt, u, fn)
            fnn = _norm2(fn, 9)
            if fnn < fnorm or _maxabs(fn, 9) < tol:
                ok = 1
                break
            s *= 0.5
        if not ok:
            return 0
        for k in range(9):
            x[k] = xn[k]
            f[k] = fn[k]
        fnorm = fnn
    return 0


def newton_solve(const double[:, ::1] tgt, const double[:, ::1] u, seed, double[:, ::1] out,
                 double tol=1e-12, int maxiter=50, int maxhalve=20):
    cdef double[::1] sd = np.ascontiguousarray(seed, dtype=np.float64).ravel()
    cdef int ok
    with nogil:
        ok = _newton(tgt, u, &sd[0], &out[0, 0], tol, maxiter, maxhalve)
    return bool(ok)


def newton_sweep(const double[:, :, ::1] targets, const double[:, ::1] u, seed,
                 double[:, :, ::1] out, double tol=1e-12, int maxiter=50, int maxhalve=20):
    cdef Py_ssize_t m = targets.shape[0]
    cdef Py_ssize_t k
    cdef double[::1] sd = np.ascontiguousarray(seed, dtype=np.float64).ravel()
    cdef const double* prev = &sd[0]
    cdef Py_ssize_t failed = m
    with nogil:
        for k in range(m):
            if not _newton(targets[k], u, prev, &out[k, 0, 0], tol, maxiter, maxhalve):
                failed = k
                break
            prev = &out[k, 0, 0]
    return failed


cdef inline void _coin(const double* U, double pr, double pi, double qr, double qi,
                       double* o) noexcept nogil:
    # o <- U (p, q); U stored as 4 interleaved complex numbers (row-major)
    o[0] = U[0] * pr - U[1] * pi + U[2] * qr - U[3] * qi
    o[1] = U[0] * pi + U[1] * pr + U[2] * qi + U[3] * qr
    o[2] = U[4] * pr - U[5] * pi + U[6] * qr - U[7] * qi
    o[3] = U[4] * pi + U[5] * pr + U[6] * qi + U[7] * qr


cdef inline void _coin_dagger(const double* U, double pr, double pi, double qr, double qi,
                              double* o) noexcept nogil:
    # o <- U^dag (p, q)
    o[0] = U[0] * pr + U[1] * pi + U[4] * qr + U[5] * qi
    o[1] = U[0] * pi - U[1] * pr + U[4] * qi - U[5] * qr
    o[2] = U[2] * pr + U[3] * pi + U[6] * qr + U[7] * qi
    o[3] = U[2] * pi - U[3] * pr + U[6] * qi - U[7] * qr


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def bravais_factor(double complex[:, :, ::1] psi, const double complex[:, :, :, ::1] U,
                   const double[:, ::1] gamma, double eps, int da, int db):
    cdef Py_ssize_t n1 = psi.shape[1]
    cdef Py_ssize_t n2 = psi.shape[2]
    cdef Py_ssize_t nn = n1 * n2
    cdef Py_ssize_t a, b, s, src
    cdef double c, sn, pr, pi, qr, qi
    cdef double o[4]
    cdef double[::1] tmp = np.empty(4 * nn)
    cdef double* t = &tmp[0]
    cdef double* p = <double*> &psi[0, 0, 0]
    cdef const double* u = <const double*> &U[0, 0, 0, 0]
    cdef const double* g = &gamma[0, 0]
    with nogil:
        for s in range(nn):
            c = cos(eps * g[s])
            sn = -sin(eps * g[s])
            pr = c * p[2 * s] - sn * p[2 * s + 1]
            pi = c * p[2 * s + 1] + sn * p[2 * s]
            qr = c * p[2 * (nn + s)] - sn * p[2 * (nn + s) + 1]
            qi = c * p[2 * (nn + s) + 1] + sn * p[2 * (nn + s)]
            _coin(u + 8 * s, pr, pi, qr, qi, t + 4 * s)
        for a in range(n1):
            for b in range(n2):
                s = a * n2 + b
                src = _wrap(a - da, n1) * n2 + _wrap(b - db, n2)
                pr = t[4 * src]
                pi = t[4 * src + 1]
                src = _wrap(a + da, n1) * n2 + _wrap(b + db, n2)
                qr = t[4 * src + 2]
                qi = t[4 * src + 3]
                _coin_dagger(u + 8 * s, pr, pi, qr, qi, o)
                p[2 * s] = o[0]
                p[2 * s + 1] = o[1]
                p[2 * (nn + s)] = o[2]
                p[2 * (nn + s) + 1] = o[3]


def tri_substep(double complex[:, :, :, ::1] psi, const double complex[:, :, :, :, ::1] Usrc,
                const double complex[:, :, :, :, ::1] Utgt, const double[:, :, ::1] gamma,
                double eps, offsets):
    cdef Py_ssize_t m1 = psi.shape[2]
    cdef Py_ssize_t m2 = psi.shape[3]
    cdef Py_ssize_t mm = m1 * m2
    cdef Py_ssize_t ne = 3 * mm
    cdef Py_ssize_t k, a, b, s, ks, src
    cdef double c, sn, pr, pi, qr, qi
    cdef double o[4]
    cdef long oa[3]
    cdef long ob[3]
    for k in range(3):
        oa[k] = offsets[k][0]
        ob[k] = offsets[k][1]
    cdef double[::1] tmp = np.empty(4 * ne)
    cdef double* t = &tmp[0]
    cdef double* p = <double*> &psi[0, 0, 0, 0]
    cdef const double* us = <const double*> &Usrc[0, 0, 0, 0, 0]
    cdef const double* ut = <const double*> &Utgt[0, 0, 0, 0, 0]
    cdef const double* g = &gamma[0, 0, 0]
    with nogil:
        for s in range(ne):
            c = cos(eps * g[s])
            sn = -sin(eps * g[s])
            pr = c * p[2 * s] - sn * p[2 * s + 1]
            pi = c * p[2 * s + 1] + sn * p[2 * s]
            qr = c * p[2 * (ne + s)] - sn * p[2 * (ne + s) + 1]
            qi = c * p[2 * (ne + s) + 1] + sn * p[2 * (ne + s)]
            _coin(us + 8 * s, pr, pi, qr, qi, t + 4 * s)
        for k in range(3):
            ks = (k + 2) % 3
            for a in range(m1):
                for b in range(m2):
                    s = k * mm + a * m2 + b
                    src = ks * mm + a * m2 + b
                    pr = t[4 * src]
                    pi = t[4 * src + 1]
                    src = ks * mm + _wrap(a + oa[k], m1) * m2 + _wrap(b + ob[k], m2)
                    qr = t[4 * src + 2]
                    qi = t[4 * src + 3]
                    _coin_dagger(ut + 8 * s, pr, pi, qr, qi, o)
                    p[2 * s] = o[0]
                    p[2 * s + 1] = o[1]
                    p[2 * (ne + s)] = o[2]
                    p[2 * (ne + s) + 1] = o[3]
