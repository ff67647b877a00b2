"""Pure NumPy/SciPy versions of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_kernels`` extension. This module is used when the extension is missing
or when ``SPMLAB_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.linalg import solve_banded
from scipy.ndimage import maximum_filter1d, minimum_filter1d

BACKEND = "python"

LAW_POWER = 0
LAW_HERMITE = 1


def power_law(u, m):
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    f = au ** (m - 1.0) * u
    df = m * au ** (m - 1.0)
    return f, df


def hermite_law(u, xs, ys, dys):
    """Cubic Hermite interpolant through (xs, ys) with slopes dys.

    Outside [xs[0], xs[-1]] the function is continued linearly with the end
    slope. Returns the value and the derivative of the interpolant.
    """
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    n = xs.shape[0]
    idx = np.searchsorted(xs, flat, side="right") - 1
    idx = np.clip(idx, 0, n - 2)
    x0 = xs[idx]
    h = xs[idx + 1] - x0
    t = (flat - x0) / h
    y0 = ys[idx]
    y1 = ys[idx + 1]
    m0 = dys[idx] * h
    m1 = dys[idx + 1] * h
    t2 = t * t
    t3 = t2 * t
    f = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0
         + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1)
    df = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0
          + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h
    lo = flat < xs[0]
    if lo.any():
        f[lo] = ys[0] + dys[0] * (flat[lo] - xs[0])
        df[lo] = dys[0]
    hi = flat > xs[-1]
    if hi.any():
        f[hi] = ys[-1] + dys[-1] * (flat[hi] - xs[-1])
        df[hi] = dys[-1]
    return f.reshape(u.shape), df.reshape(u.shape)


def _law(u, law_kind, m, xs, ys, dys):
    if law_kind == LAW_POWER:
        return power_law(u, m)
    return hermite_law(u, xs, ys, dys)


def periodic_tridiag_solve(lower, diag, upper, rhs):
    """Solve a cyclic tridiagonal system.

    Row i reads ``lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]``
    with indices taken modulo n.
    """
    n = diag.shape[0]
    if n <= 3:
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] += diag[i]
            mat[i, (i - 1) % n] += lower[i]
            mat[i, (i + 1) % n] += upper[i]
        return np.linalg.solve(mat, rhs)
    alpha = upper[n - 1]  # row n-1, column 0
    beta = lower[0]       # row 0, column n-1
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[n - 1] -= alpha * beta / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = d
    ab[2, :-1] = lower[1:]
    x = solve_banded((1, 1), ab, rhs)
    uvec = np.zeros(n)
    uvec[0] = gamma
    uvec[n - 1] = alpha
    z = solve_banded((1, 1), ab, uvec)
    fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
    return x - fact * z


def _residual(u, rhs, c, law_kind, m, xs, ys, dys):
    f, df = _law(u, law_kind, m, xs, ys, dys)
    lap = np.roll(f, 1) - 2.0 * f + np.roll(f, -1)
    return u - c * lap - rhs, df


def newton_periodic_1d(rhs, guess, c, law_kind, m, xs, ys, dys, tol, maxit):
    """Solve ``u - c*L A(u) = rhs`` on a periodic 1D grid.

    L is the unscaled second difference, so ``c = dt/dx**2``. Newton with
    backtracking on the max-norm of the residual. Returns
    ``(u, iterations, residual_max_norm)``; the caller decides whether a
    residual above ``tol`` is a failure.
    """
    u = np.array(guess, dtype=float, copy=True)
    res, df = _residual(u, rhs, c, law_kind, m, xs, ys, dys)
    rnorm = np.max(np.abs(res))
    it = 0
    while rnorm > tol and it < maxit:
        it += 1
        cs = c * df
        diag = 1.0 + 2.0 * cs
        lower = -np.roll(cs, 1)
        upper = -np.roll(cs, -1)
        delta = periodic_tridiag_solve(lower, diag, upper, -res)
        step = 1.0
        for _ in range(12):
            trial = u + step * delta
            tres, tdf = _residual(trial, rhs, c, law_kind, m, xs, ys, dys)
            tnorm = np.max(np.abs(tres))
            if tnorm < rnorm or not np.isfinite(rnorm):
                break
            step *= 0.5
        u, res, df, rnorm = trial, tres, tdf, tnorm
        if not np.isfinite(rnorm):
            break
    return u, it, float(rnorm)


def window_oscillation(vals, w):
    """max_i max(v_i - min(v[i-w:i+w+1]), max(v[i-w:i+w+1]) - v_i) over interior i."""
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[0]
    if n < 2 * w + 1:
        return 0.0
    size = 2 * w + 1
    hi = maximum_filter1d(vals, size=size, mode="nearest")
    lo = minimum_filter1d(vals, size=size, mode="nearest")
    core = slice(w, n - w)
    v = vals[core]
    return float(max(np.max(hi[core] - v), np.max(v - lo[core])))
