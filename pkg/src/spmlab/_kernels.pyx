# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, isfinite

cnp.import_array()

BACKEND = "cython"

LAW_POWER = 0
LAW_HERMITE = 1


cdef inline void _power(double u, double m, double* f, double* df) noexcept nogil:
    cdef double au = fabs(u)
    cdef double p
    if m == 2.0:
        p = au
    elif m == 3.0:
        p = au * au
    else:
        p = pow(au, m - 1.0)
    f[0] = p * u
    df[0] = m * p


cdef inline void _hermite(double u, const double[::1] xs, const double[::1] ys,
                          const double[::1] dys, double* f, double* df) noexcept nogil:
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t lo, hi, mid
    cdef double h, t, t2, t3, m0, m1
    if u < xs[0]:
        f[0] = ys[0] + dys[0] * (u - xs[0])
        df[0] = dys[0]
        return
    if u > xs[n - 1]:
        f[0] = ys[n - 1] + dys[n - 1] * (u - xs[n - 1])
        df[0] = dys[n - 1]
        return
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= u:
            lo = mid
        else:
            hi = mid
    h = xs[lo + 1] - xs[lo]
    t = (u - xs[lo]) / h
    t2 = t * t
    t3 = t2 * t
    m0 = dys[lo] * h
    m1 = dys[lo + 1] * h
    f[0] = ((2 * t3 - 3 * t2 + 1) * ys[lo] + (t3 - 2 * t2 + t) * m0
            + (-2 * t3 + 3 * t2) * ys[lo + 1] + (t3 - t2) * m1)
    df[0] = ((6 * t2 - 6 * t) * ys[lo] + (3 * t2 - 4 * t + 1) * m0
             + (-6 * t2 + 6 * t) * ys[lo + 1] + (3 * t2 - 2 * t) * m1) / h


def power_law(u, double m):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t n = uv.shape[0], i
    f = np.empty(n)
    df = np.empty(n)
    cdef double[::1] fv = f, dfv = df
    for i in range(n):
        _power(uv[i], m, &fv[i], &dfv[i])
    shape = np.shape(u)
    return f.reshape(shape), df.reshape(shape)


def hermite_law(u, const double[::1] xs, const double[::1] ys, const double[::1] dys):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t n = uv.shape[0], i
    f = np.empty(n)
    df = np.empty(n)
    cdef double[::1] fv = f, dfv = df
    for i in range(n):
        _hermite(uv[i], xs, ys, dys, &fv[i], &dfv[i])
    shape = np.shape(u)
    return f.reshape(shape), df.reshape(shape)


cdef void _thomas(Py_ssize_t n, const double* a, const double* b, const double* c,
                  const double* r, double* x, double* work) noexcept nogil:
    # a: sub-diagonal (a[0] unused), b: diagonal, c: super-diagonal (c[n-1] unused)
    cdef Py_ssize_t i
    cdef double beta = b[0]
    x[0] = r[0] / beta
    for i in range(1, n):
        work[i] = c[i - 1] / beta
        beta = b[i] - a[i] * work[i]
        x[i] = (r[i] - a[i] * x[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        x[i] -= work[i + 1] * x[i + 1]


def periodic_tridiag_solve(lower, diag, upper, rhs):
    cdef Py_ssize_t n = diag.shape[0], i
    if n <= 3:
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] += diag[i]
            mat[i, (i - 1) % n] += lower[i]
            mat[i, (i + 1) % n] += upper[i]
        return np.linalg.solve(mat, rhs)
    cdef const double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef const double[::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef double[::1] d = np.array(diag, dtype=np.float64)
    out = np.empty(n)
    cdef double[::1] x = out
    cdef double[::1] z = np.empty(n)
    cdef double[::1] uvec = np.zeros(n)
    cdef double[::1] work = np.empty(n)
    _cyclic(n, &lo[0], &d[0], &up[0], &r[0], &x[0], &z[0], &uvec[0], &work[0])
    return out


cdef void _cyclic(Py_ssize_t n, const double* lower, double* d, const double* upper,
                  const double* r, double* x, double* z, double* uvec,
                  double* work) noexcept nogil:
    # d is overwritten
    cdef double alpha = upper[n - 1]
    cdef double beta = lower[0]
    cdef double gamma = -d[0]
    cdef double fact
    cdef Py_ssize_t i
    d[0] -= gamma
    d[n - 1] -= alpha * beta / gamma
    _thomas(n, lower, d, upper, r, x, work)
    for i in range(n):
        uvec[i] = 0.0
    uvec[0] = gamma
    uvec[n - 1] = alpha
    _thomas(n, lower, d, upper, uvec, z, work)
    fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
    for i in range(n):
        x[i] -= fact * z[i]


cdef double _residual(Py_ssize_t n, const double* u, const double* rhs, double c,
                      int law_kind, double m, const double[::1] xs,
                      const double[::1] ys, const double[::1] dys,
                      double* f, double* df, double* res) noexcept nogil:
    cdef Py_ssize_t i
    cdef double lap, rn = 0.0, a
    for i in range(n):
        if law_kind == 0:
            _power(u[i], m, &f[i], &df[i])
        else:
            _hermite(u[i], xs, ys, dys, &f[i], &df[i])
    for i in range(n):
        lap = f[(i - 1 + n) % n] - 2.0 * f[i] + f[(i + 1) % n]
        res[i] = u[i] - c * lap - rhs[i]
        a = fabs(res[i])
        if a > rn or a != a:
            rn = a
    return rn


def newton_periodic_1d(rhs, guess, double c, int law_kind, double m,
                       const double[::1] xs, const double[::1] ys, const double[::1] dys,
                       double tol, int maxit):
    cdef Py_ssize_t n = rhs.shape[0], i
    if n <= 3:
        from . import _kernels_py
        return _kernels_py.newton_periodic_1d(rhs, guess, c, law_kind, m, xs, ys, dys, tol, maxit)
    cdef const double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    out = np.array(guess, dtype=np.float64, copy=True)
    cdef double[::1] u = out
    cdef double[::1] f = np.empty(n), df = np.empty(n), res = np.empty(n)
    cdef double[::1] tf = np.empty(n), tdf = np.empty(n), tres = np.empty(n)
    cdef double[::1] trial = np.empty(n), delta = np.empty(n), neg = np.empty(n)
    cdef double[::1] lower = np.empty(n), diag = np.empty(n), upper = np.empty(n)
    cdef double[::1] z = np.empty(n), uvec = np.empty(n), work = np.empty(n)
    cdef double rnorm, tnorm, step
    cdef int it = 0, k
    with nogil:
        rnorm = _residual(n, &u[0], &r[0], c, law_kind, m, xs, ys, dys, &f[0], &df[0], &res[0])
        while rnorm > tol and it < maxit:
            it += 1
            for i in range(n):
                diag[i] = 1.0 + 2.0 * c * df[i]
                lower[i] = -c * df[(i - 1 + n) % n]
                upper[i] = -c * df[(i + 1) % n]
                neg[i] = -res[i]
            _cyclic(n, &lower[0], &diag[0], &upper[0], &neg[0], &delta[0],
                    &z[0], &uvec[0], &work[0])
            step = 1.0
            for k in range(12):
                for i in range(n):
                    trial[i] = u[i] + step * delta[i]
                tnorm = _residual(n, &trial[0], &r[0], c, law_kind, m, xs, ys, dys,
                                  &tf[0], &tdf[0], &tres[0])
                if tnorm < rnorm or not isfinite(rnorm):
                    break
                step *= 0.5
            for i in range(n):
                u[i] = trial[i]
                f[i] = tf[i]
                df[i] = tdf[i]
                res[i] = tres[i]
            rnorm = tnorm
            if not isfinite(rnorm):
                break
    return out, it, float(rnorm)


def window_oscillation(vals, Py_ssize_t w):
    """Sliding-window oscillation with monotone deques, O(n)."""
    cdef const double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    if n < 2 * w + 1:
        return 0.0
    cdef Py_ssize_t[::1] qmax = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] qmin = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t hmax = 0, tmax = 0, hmin = 0, tmin = 0, j, i
    cdef double best = 0.0, d
    with nogil:
        for j in range(n):
            while tmax > hmax and v[qmax[tmax - 1]] <= v[j]:
                tmax -= 1
            qmax[tmax] = j
            tmax += 1
            while tmin > hmin and v[qmin[tmin - 1]] >= v[j]:
                tmin -= 1
            qmin[tmin] = j
            tmin += 1
            if j >= 2 * w:
                i = j - w
                while qmax[hmax] < i - w:
                    hmax += 1
                while qmin[hmin] < i - w:
                    hmin += 1
                d = v[qmax[hmax]] - v[i]
                if d > best:
                    best = d
                d = v[i] - v[qmin[hmin]]
                if d > best:
                    best = d
    return best
