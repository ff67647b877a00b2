"""Mollifier kernel, refining Simpson quadrature and Hermite tables."""
import numpy as np
from scipy import integrate

from . import kernels
from .errors import QuadratureError

#: absolute tolerance used for every convolution/integral unless overridden
QUAD_TOL = 1e-8


def bump(y):
    """Unnormalized bump exp(-1/(1-y^2)) on (-1, 1), zero elsewhere."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (1.0 - yi * yi))
    return out


def bump_prime(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    q = 1.0 - yi * yi
    out[inside] = np.exp(-1.0 / q) * (-2.0 * yi / (q * q))
    return out


BUMP_MASS = integrate.quad(lambda y: float(bump(y)), -1.0, 1.0,
                           epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def kernel(y, width):
    """Unit-mass symmetric kernel supported on (-width, width)."""
    return bump(np.asarray(y) / width) / (width * BUMP_MASS)


_PARTIALS = None


def _partials():
    # Hermite tables of C(t) = int_{-1}^t k and M(t) = int_{-1}^t s k(s) ds
    # for the unit kernel k = bump / BUMP_MASS
    global _PARTIALS
    if _PARTIALS is None:
        t = np.linspace(-1.0, 1.0, 2049)
        span = t + 1.0

        def cdf(s, sl):
            y = -1.0 + span[sl][:, None] * s[None, :]
            return bump(y) * span[sl][:, None] / BUMP_MASS

        def mom(s, sl):
            y = -1.0 + span[sl][:, None] * s[None, :]
            return y * bump(y) * span[sl][:, None] / BUMP_MASS

        c = simpson(cdf, 0.0, 1.0, t.size, tol=1e-14, name="kernel cdf", max_level=24)
        mvals = simpson(mom, 0.0, 1.0, t.size, tol=1e-14, name="kernel moment",
                        max_level=24)
        k = bump(t) / BUMP_MASS
        _PARTIALS = (HermiteTable(t, c, k), HermiteTable(t, mvals, t * k))
    return _PARTIALS


def kernel_cdf(t):
    """Mass of the unit kernel on (-1, t]."""
    t = np.asarray(t, dtype=float)
    c = _partials()[0]
    return np.where(t <= -1.0, 0.0, np.where(t >= 1.0, 1.0, c(np.clip(t, -1.0, 1.0))))


def _ramp_integral(t):
    # int_{-1}^{t} (t - s) k(s) ds
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, -1.0, 1.0)
    c, mom = _partials()
    inner = tc * c(tc) - mom(tc)
    return np.where(t <= -1.0, 0.0, np.where(t >= 1.0, t, inner))


def mollified_clip(u, level, eps):
    """(rho_eps * clip(., -level, level))(u) and its derivative, in closed form.

    Uses clip(z) = z - (z - L)_+ + (-L - z)_+ and the kernel's partial mass and
    first moment.
    """
    u = np.asarray(u, dtype=float)
    tp = (u - level) / eps
    tm = (-u - level) / eps
    val = u - eps * _ramp_integral(tp) + eps * _ramp_integral(tm)
    slope = 1.0 - kernel_cdf(tp) - kernel_cdf(tm)
    return val, slope


def simpson(integrand, a, b, batch, tol=QUAD_TOL, name="integral",
            min_level=4, max_level=20, chunk_points=4_000_000):
    """Composite Simpson on [a, b] with interval doubling, batched.

    ``integrand(nodes, sl)`` returns an array of shape ``(len(range)[sl], k)``
    for the ``k`` nodes. The batch is processed in chunks so memory stays
    bounded. Refinement stops when ``|S_2h - S_h| / 15 <= tol`` for every
    batch entry; otherwise :class:`QuadratureError` names the integral.
    """
    out = np.empty(batch)
    start = 0
    while start < batch:
        stop = min(batch, start + max(1, chunk_points // (2 ** min_level + 1) // 8))
        sl = slice(start, stop)
        out[sl] = _simpson_chunk(integrand, a, b, sl, tol, name, min_level, max_level)
        start = stop
    return out


def _simpson_chunk(integrand, a, b, sl, tol, name, min_level, max_level):
    n = 2 ** min_level
    x = np.linspace(a, b, n + 1)
    f = np.atleast_2d(integrand(x, sl))
    ends = f[:, 0] + f[:, -1]
    odd = f[:, 1:-1:2].sum(axis=1)
    even = f[:, 2:-1:2].sum(axis=1)
    h = (b - a) / n
    s_old = h / 3.0 * (ends + 4.0 * odd + 2.0 * even)
    err = np.inf
    for _ in range(min_level, max_level):
        inner = odd + even
        n *= 2
        h = (b - a) / n
        mid = a + h * (2 * np.arange(n // 2) + 1)
        fm = np.atleast_2d(integrand(mid, sl))
        odd = fm.sum(axis=1)
        even = inner
        s_new = h / 3.0 * (ends + 4.0 * odd + 2.0 * even)
        err = np.max(np.abs(s_new - s_old)) / 15.0
        if err <= tol:
            return s_new
        s_old = s_new
    raise QuadratureError(name, err, tol)


# 4-point Gauss-Legendre on [0, 1]; exact for polynomials of degree <= 7
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W


class HermiteTable:
    """Piecewise cubic Hermite function given by nodes, values and slopes.

    Evaluation goes through the active kernel backend and continues linearly
    beyond the end nodes.
    """

    def __init__(self, xs, ys, dys):
        self.xs = np.ascontiguousarray(xs, dtype=float)
        self.ys = np.ascontiguousarray(ys, dtype=float)
        self.dys = np.ascontiguousarray(dys, dtype=float)
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("Hermite nodes must be strictly increasing")

    def __call__(self, u):
        return kernels.hermite_law(u, self.xs, self.ys, self.dys)[0]

    def both(self, u):
        return kernels.hermite_law(u, self.xs, self.ys, self.dys)

    def derivative(self, u):
        return kernels.hermite_law(u, self.xs, self.ys, self.dys)[1]

    def interval_quadrature(self, transform):
        """Per-interval integrals of ``transform(p(x))`` by 4-point Gauss."""
        x0 = self.xs[:-1]
        h = np.diff(self.xs)
        pts = x0[:, None] + h[:, None] * GL_NODES[None, :]
        vals = transform(self(pts))
        return h * (vals @ GL_WEIGHTS)

    def antiderivative(self, transform, origin_index):
        """Hermite table of r -> int_{x[origin]}^r transform(p(s)) ds.

        Node values are exact for polynomial ``transform`` of degree <= 7 in
        the cubic pieces; node slopes are ``transform(p(x_i))``.
        """
        pieces = self.interval_quadrature(transform)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        cum -= cum[origin_index]
        return HermiteTable(self.xs, cum, transform(self.ys))
