"""Nonlinearity A, noise family g, structural-hypothesis checks and mollification.

The canonical nonlinearity is ``A(r) = |r|^(m-1) r``. From it (or from a
sampled custom A) we derive ``a = sqrt(A')`` and ``Psi(r) = int_0^r a``.
Mollification produces the regularized coefficients ``a_n, A_n, Psi_n, g_n``
and the clipped, smoothed initial datum ``u0_n``.
"""
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import convolve1d

from . import kernels
from .errors import PreconditionError
from .grid import Field
from .quadrature import (BUMP_MASS, QUAD_TOL, HermiteTable, bump, bump_prime,
                         kernel, kernel_cdf, mollified_clip, simpson)

# ---------------------------------------------------------------------------
# nonlinearity


class Nonlinearity:
    """Odd, strictly increasing diffusion nonlinearity with constants m, K.

    ``kind="canonical"`` is ``|r|^(m-1) r``. ``kind="custom"`` is built from
    samples with :meth:`custom` and interpolated by monotone cubics.
    """

    def __init__(self, m=2.0, K=1.0, kind="canonical", table=None):
        m = float(m)
        K = float(K)
        if not m > 1.0:
            raise PreconditionError(f"exponent m must exceed 1, got {m}")
        if not K >= 1.0:
            raise PreconditionError(f"constant K must be >= 1, got {K}")
        if kind not in ("canonical", "custom"):
            raise ValueError(f"unknown nonlinearity kind {kind!r}")
        if kind == "custom" and table is None:
            raise ValueError("custom nonlinearity needs a sample table")
        self.m = m
        self.K = K
        self.kind = kind
        self._table = table

    @classmethod
    def custom(cls, r, A_values, m, K):
        """Build from samples of an odd increasing A on a symmetric grid."""
        r = np.asarray(r, dtype=float)
        A_values = np.asarray(A_values, dtype=float)
        if np.any(np.diff(r) <= 0):
            raise ValueError("sample abscissae must be strictly increasing")
        if not np.allclose(r, -r[::-1], rtol=0, atol=1e-12 * max(1.0, abs(r[-1]))):
            raise ValueError("custom samples must sit on a grid symmetric about 0")
        if np.any(np.diff(A_values) <= 0):
            raise PreconditionError("custom A must be strictly increasing on its samples")
        if not np.allclose(A_values, -A_values[::-1], rtol=1e-12, atol=1e-14):
            raise PreconditionError("custom A must be odd")
        slopes = PchipInterpolator(r, A_values).derivative()(r)
        return cls(m, K, "custom", HermiteTable(r, A_values, slopes))

    @classmethod
    def from_function(cls, func, m, K, r_max=50.0, num=4001):
        r = np.linspace(-r_max, r_max, num)
        return cls.custom(r, func(r), m, K)

    @property
    def cache_key(self):
        if self.kind == "canonical":
            return ("canonical", self.m, self.K)
        t = self._table
        return ("custom", self.m, self.K, t.xs.tobytes(), t.ys.tobytes())

    # evaluation -----------------------------------------------------------

    def A(self, r):
        if self.kind == "canonical":
            return kernels.power_law(r, self.m)[0]
        return self._table(r)

    def dA(self, r):
        if self.kind == "canonical":
            return kernels.power_law(r, self.m)[1]
        return np.maximum(self._table.derivative(r), 0.0)

    def a(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "canonical":
            return math.sqrt(self.m) * np.abs(r) ** ((self.m - 1.0) / 2.0)
        return np.sqrt(self.dA(r))

    def da(self, r):
        """a'(r): closed form for canonical kind, central differences otherwise."""
        r = np.asarray(r, dtype=float)
        if self.kind == "canonical":
            e = (self.m - 1.0) / 2.0
            with np.errstate(divide="ignore", invalid="ignore"):
                return math.sqrt(self.m) * e * np.abs(r) ** (e - 1.0) * np.sign(r)
        h = 1e-6 * np.maximum(1.0, np.abs(r))
        return (self.a(r + h) - self.a(r - h)) / (2.0 * h)

    def Psi(self, r, tol=QUAD_TOL):
        return _integrate_from_zero(self.a, r, tol, "Psi")

    def Psi_closed_form(self, r):
        if self.kind != "canonical":
            raise ValueError("closed form exists only for the canonical kind")
        r = np.asarray(r, dtype=float)
        m = self.m
        return 2.0 * math.sqrt(m) / (m + 1.0) * np.abs(r) ** ((m - 1.0) / 2.0) * r

    def Psi_f(self, f, r, tol=QUAD_TOL):
        return _integrate_from_zero(lambda s: f(s) * self.a(s), r, tol, "Psi_f")

    @property
    def law(self):
        if self.kind == "canonical":
            return Law(kernels.LAW_POWER, self.m)
        t = self._table
        return Law(kernels.LAW_HERMITE, self.m, t.xs, t.ys, t.dys)

    def __repr__(self):
        return f"Nonlinearity(m={self.m}, K={self.K}, kind={self.kind!r})"


_EMPTY = np.zeros(2)


@dataclass(frozen=True, eq=False)
class Law:
    """Kernel-facing description of a monotone map: power law or Hermite table."""

    kind: int
    m: float = 2.0
    xs: np.ndarray = field(default_factory=lambda: _EMPTY)
    ys: np.ndarray = field(default_factory=lambda: _EMPTY)
    dys: np.ndarray = field(default_factory=lambda: _EMPTY)

    def __call__(self, u):
        return self.both(u)[0]

    def both(self, u):
        if self.kind == kernels.LAW_POWER:
            return kernels.power_law(u, self.m)
        return kernels.hermite_law(u, self.xs, self.ys, self.dys)


def _integrate_from_zero(func, r, tol, name):
    # s = r * t^2 keeps integrands like |s|^((m-1)/2) smooth in t
    r = np.asarray(r, dtype=float)
    flat = r.ravel()

    def integrand(t, sl):
        rr = flat[sl][:, None]
        return func(rr * t[None, :] ** 2) * rr * 2.0 * t[None, :]

    out = simpson(integrand, 0.0, 1.0, flat.size, tol=tol, name=name)
    return out.reshape(r.shape)


def eval_A(nl, r):
    return nl.A(r)


def eval_a(nl, r):
    return nl.a(r)


def eval_Psi(nl, r):
    return nl.Psi(r)


# ---------------------------------------------------------------------------
# noise family

_MODE_KINDS = ("constant", "sinusoidal", "clipped_linear", "sinusoidal_clipped")


@dataclass(frozen=True)
class NoiseMode:
    """Built-in separable mode ``amp * X(x) * U(u)``.

    X is 1 or ``sin(2 pi freq x[axis] + phase)``; U is 1 or ``clip(u, -cap, cap)``.
    """

    kind: str = "constant"
    amp: float = 1.0
    freq: int = 1
    phase: float = 0.0
    cap: float = 1.0
    axis: int = 0

    def __post_init__(self):
        if self.kind not in _MODE_KINDS:
            raise ValueError(f"unknown noise mode kind {self.kind!r}; "
                             f"expected one of {_MODE_KINDS}")
        if int(self.freq) != self.freq or self.freq < 0:
            raise ValueError("freq must be a nonnegative integer (periodicity)")
        if self.cap <= 0:
            raise ValueError("cap must be positive")

    @property
    def has_x(self):
        return self.kind in ("sinusoidal", "sinusoidal_clipped")

    @property
    def has_u(self):
        return self.kind in ("clipped_linear", "sinusoidal_clipped")

    def x_factor(self, x):
        x = np.asarray(x, dtype=float)
        if not self.has_x:
            return np.ones(x.shape[:-1])
        return np.sin(2.0 * np.pi * self.freq * x[..., self.axis] + self.phase)

    def u_factor(self, u):
        u = np.asarray(u, dtype=float)
        if not self.has_u:
            return np.ones_like(u)
        return np.clip(u, -self.cap, self.cap)

    def du_factor(self, u):
        u = np.asarray(u, dtype=float)
        if not self.has_u:
            return np.zeros_like(u)
        return (np.abs(u) < self.cap).astype(float)

    def __call__(self, x, u):
        return self.amp * self.x_factor(x) * self.u_factor(u)

    def du(self, x, u):
        return self.amp * self.x_factor(x) * self.du_factor(u)

    def mollified(self, n):
        return MollifiedMode(self, n)


class MollifiedMode:
    """Tensor-kernel mollification of a built-in mode after clipping u at +-n.

    Separability lets the x- and u-convolutions be done independently: the
    sinusoid is scaled by the kernel's cosine transform and the clipped-linear
    factor is tabulated.
    """

    def __init__(self, base, n):
        self.base = base
        self.n = n
        eps = 1.0 / n
        if base.has_x:
            w = 2.0 * np.pi * base.freq
            self.x_scale = float(simpson(
                lambda y, sl: kernel(y, eps)[None, :] * np.cos(w * y)[None, :],
                -eps, eps, 1, name="g_n x-convolution")[0])
        else:
            self.x_scale = 1.0
        self.eps = eps
        self.level = min(base.cap, n)

    def u_factor(self, u):
        if not self.base.has_u:
            return np.ones_like(np.asarray(u, float))
        return mollified_clip(u, self.level, self.eps)[0]

    def du_factor(self, u):
        if not self.base.has_u:
            return np.zeros_like(np.asarray(u, float))
        return mollified_clip(u, self.level, self.eps)[1]

    def __call__(self, x, u):
        b = self.base
        return b.amp * self.x_scale * b.x_factor(x) * self.u_factor(u)

    def du(self, x, u):
        b = self.base
        return b.amp * self.x_scale * b.x_factor(x) * self.du_factor(u)


class CallableMode:
    """Arbitrary mode ``g(x, u)``; mollified by tensor quadrature.

    ``du`` falls back to central differences in u.
    """

    def __init__(self, func, name="callable"):
        self.func = func
        self.name = name

    def __call__(self, x, u):
        return np.asarray(self.func(np.asarray(x, float), np.asarray(u, float)), float)

    def du(self, x, u):
        u = np.asarray(u, float)
        h = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self(x, u + h) - self(x, u - h)) / (2.0 * h)

    def mollified(self, n, nodes=33):
        return _TensorMollifiedMode(self, n, nodes)


class _TensorMollifiedMode(CallableMode):
    def __init__(self, base, n, nodes):
        eps = 1.0 / n
        y = np.linspace(-eps, eps, nodes)
        w = np.full(nodes, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w = w * kernel(y, eps)
        w /= w.sum()
        keep = w > 0
        self._y, self._w, self._n = y[keep], w[keep], n
        self._base = base
        super().__init__(self._eval, f"{base.name}_n{n}")

    def _eval(self, x, u):
        x, u = np.broadcast_arrays(x, np.asarray(u)[..., None])
        u = u[..., 0]
        dim = x.shape[-1]
        n = self._n
        out = np.zeros(u.shape)
        shifts = [self._y] * dim
        weights = [self._w] * dim
        grids = np.meshgrid(*shifts, indexing="ij")
        wx = functools.reduce(np.multiply.outer, weights)
        for idx in np.ndindex(wx.shape):
            shift = np.array([g[idx] for g in grids])
            xs = np.mod(x - shift, 1.0)
            for v, wv in zip(self._y, self._w):
                out += wx[idx] * wv * self._base(xs, np.clip(u - v, -n, n))
        return out


class NoiseFamily:
    """Finite family of modes g^k(x, u) sharing the constant K."""

    def __init__(self, modes, K=1.0):
        self.modes = list(modes)
        self.K = float(K)

    @classmethod
    def zero(cls, K=1.0):
        return cls([NoiseMode("constant", amp=0.0)], K)

    @property
    def K_modes(self):
        return len(self.modes)

    def evaluate(self, x, u):
        """Stack of mode values with shape ``(K_modes, *u.shape)``."""
        return np.stack([np.broadcast_to(g(x, u), np.shape(u)) for g in self.modes])

    def evaluate_du(self, x, u):
        return np.stack([np.broadcast_to(g.du(x, u), np.shape(u)) for g in self.modes])

    def G(self, x, u):
        return np.sqrt(np.sum(self.evaluate(x, u) ** 2, axis=0))

    def padded(self, k):
        if k < self.K_modes:
            raise ValueError("cannot pad to fewer modes")
        extra = [NoiseMode("constant", amp=0.0)] * (k - self.K_modes)
        return NoiseFamily(self.modes + extra, self.K)

    def mollified(self, n):
        return NoiseFamily([g.mollified(n) for g in self.modes], self.K)

    def is_zero(self):
        return all(isinstance(g, NoiseMode) and g.amp == 0.0 for g in self.modes)

    def on_grid(self, grid):
        """Return ``(values(u), du(u))`` closures over the grid's cell centres."""
        x = grid.centers()
        return (lambda u: self.evaluate(x, u)), (lambda u: self.evaluate_du(x, u))

    def __repr__(self):
        return f"NoiseFamily(K_modes={self.K_modes}, K={self.K})"


# ---------------------------------------------------------------------------
# hypothesis check


@dataclass(frozen=True)
class SampleGrid:
    """Sampling of (x, u) used by the validator and the noise distance.

    ``r_max`` bounds the state samples, ``n_r`` is odd so 0 is included.
    """

    r_max: float = 12.0
    n_r: int = 2001
    n_x: int = 32
    dim: int = 1
    n_pairs: int = 301

    @classmethod
    def for_index(cls, n_max, **kw):
        return cls(r_max=3.0 * n_max, **kw)

    def r_values(self):
        n = self.n_r if self.n_r % 2 else self.n_r + 1
        r = np.linspace(-self.r_max, self.r_max, n)
        return np.union1d(r, [-1.0, 1.0])

    def pair_values(self):
        n = self.n_pairs if self.n_pairs % 2 else self.n_pairs + 1
        coarse = np.linspace(-self.r_max, self.r_max, n)
        near = np.linspace(-1.5, 1.5, n)
        return np.union1d(np.union1d(coarse, near), [-1.0, 0.0, 1.0])

    def x_points(self):
        c = (np.arange(self.n_x) + 0.5) / self.n_x
        mesh = np.meshgrid(*([c] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)


@dataclass
class ClauseResult:
    name: str
    passed: bool
    slack: float
    where: tuple
    subclause: str
    notes: dict = field(default_factory=dict)


@dataclass
class HypothesisReport:
    clauses: dict

    @property
    def passed(self):
        return all(c.passed for c in self.clauses.values())

    def as_dict(self):
        return {name: {"passed": c.passed, "slack": c.slack, "where": list(c.where),
                       "subclause": c.subclause, "notes": c.notes}
                for name, c in self.clauses.items()}


A_PRIME_CUTOFF = 1e-3


def check_hypothesis_H(nl, g, sample_grid=None, K=None):
    """Check the structural bounds on (A, g) at every sample.

    Clauses: ``a_bounds`` (|a(0)| <= K, |a'(r)| <= K r^((m-3)/2) for
    r >= 1e-3, K a(r) >= 1 for |r| >= 1), ``psi_coercivity``, ``g_growth``
    and ``g_lipschitz``. A clause passes when its minimum slack is >= 0.
    """
    K = nl.K if K is None else float(K)
    m = nl.m
    if not m > 1.0:
        raise PreconditionError(f"exponent m must exceed 1, got {m}")
    if not K >= 1.0:
        raise PreconditionError(f"constant K must be >= 1, got {K}")
    sg = sample_grid or SampleGrid()
    clauses = {}

    # a-bounds
    r = sg.r_values()
    subs = []
    a0 = float(np.abs(nl.a(np.array([0.0]))[0]))
    subs.append((K - a0, (0.0,), "|a(0)| <= K"))
    rp = r[r >= A_PRIME_CUTOFF]
    rp = np.union1d(rp, np.geomspace(A_PRIME_CUTOFF, 1.0, 200))
    bound = K * rp ** ((m - 3.0) / 2.0)
    slack = bound - np.abs(nl.da(rp))
    i = int(np.argmin(slack))
    subs.append((float(slack[i]), (float(rp[i]),), "|a'(r)| <= K r^((m-3)/2)"))
    near = np.geomspace(1e-8, A_PRIME_CUTOFF, 50)
    ratio_near = float(np.max(np.abs(nl.da(near)) / (K * near ** ((m - 3.0) / 2.0))))
    big = r[np.abs(r) >= 1.0]
    slack = K * nl.a(big) - 1.0
    i = int(np.argmin(slack))
    subs.append((float(slack[i]), (float(big[i]),), "K a(r) >= 1 for |r| >= 1"))
    worst = min(subs, key=lambda s: s[0])
    clauses["a_bounds"] = ClauseResult(
        "a_bounds", all(s[0] >= 0 for s in subs), worst[0], worst[1], worst[2],
        {"a_prime_ratio_below_cutoff": ratio_near})

    # Psi coercivity on pairs
    p = sg.pair_values()
    psi = nl.Psi(p)
    R, S = np.meshgrid(p, p, indexing="ij")
    P1, P2 = np.meshgrid(psi, psi, indexing="ij")
    off = R != S
    big_pair = np.maximum(np.abs(R), np.abs(S)) >= 1.0
    rhs = np.where(big_pair, np.abs(R - S), np.abs(R - S) ** ((m + 1.0) / 2.0))
    slack = np.where(off, K * np.abs(P1 - P2) - rhs, np.inf)
    idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
    s_min = float(slack[idx])
    clauses["psi_coercivity"] = ClauseResult(
        "psi_coercivity", s_min >= 0, s_min, (float(R[idx]), float(S[idx])),
        "K|Psi(r)-Psi(s)| >= |r-s| or |r-s|^((m+1)/2)")

    # g growth
    x = sg.x_points()
    X = x[:, None, :]
    U = r[None, :]
    G = g.G(np.broadcast_to(X, (x.shape[0], r.size, x.shape[1])),
            np.broadcast_to(U, (x.shape[0], r.size)))
    slack = K * (1.0 + np.abs(U)) - G
    idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
    clauses["g_growth"] = ClauseResult(
        "g_growth", float(slack[idx]) >= 0, float(slack[idx]),
        (tuple(float(v) for v in x[idx[0]]), float(r[idx[1]])),
        "G(x,u) <= K(1+|u|)")

    # g Lipschitz on pairs of (x, u)
    xs = sg.x_points()
    if xs.shape[0] > 16 ** sg.dim:
        step = int(round(xs.shape[0] ** (1.0 / sg.dim) / 16))
        sel = np.arange(sg.n_x)[::max(step, 1)]
        mesh = np.meshgrid(*([(sel + 0.5) / sg.n_x] * sg.dim), indexing="ij")
        xs = np.stack(mesh, axis=-1).reshape(-1, sg.dim)
    us = np.linspace(-sg.r_max, sg.r_max, 41)
    us = np.union1d(us, np.linspace(-2.0, 2.0, 21))
    pts_x = np.repeat(xs, us.size, axis=0)
    pts_u = np.tile(us, xs.shape[0])
    vals = g.evaluate(pts_x, pts_u)  # (K_modes, P)
    best = (np.inf, None)
    for i0 in range(pts_u.size):
        dxv = np.abs(pts_x[i0] - pts_x)
        dxv = np.minimum(dxv, 1.0 - dxv)
        dist = np.sqrt(np.sum(dxv ** 2, axis=1)) + np.abs(pts_u[i0] - pts_u)
        diff = np.sqrt(np.sum((vals[:, i0:i0 + 1] - vals) ** 2, axis=0))
        sl = K * dist - diff
        sl[i0] = np.inf
        j = int(np.argmin(sl))
        if sl[j] < best[0]:
            best = (float(sl[j]), (tuple(pts_x[i0]), float(pts_u[i0]),
                                   tuple(pts_x[j]), float(pts_u[j])))
    clauses["g_lipschitz"] = ClauseResult(
        "g_lipschitz", best[0] >= 0, best[0], best[1],
        "|g(x,u)-g(y,v)| <= K(|x-y|+|u-v|)")
    return HypothesisReport(clauses)


# ---------------------------------------------------------------------------
# mollification

THETA_RTOL = 1e-3
_CHUNK = 1 << 20


def _modulus_ok(nl, n, theta):
    """Whether |a(r)-a(z)| <= 1/n for |r| <= 3n, |z-r| <= 3 theta on the sample grid.

    a is even, so centres r in [0, 3n] suffice.
    """
    s = min(theta, 1.0 / n) / 4.0
    w = int(math.ceil(3.0 * theta / s - 1e-9))
    n_centres = int(math.floor(3.0 * n / s)) + 1
    limit = 1.0 / n
    start = 0
    while start < n_centres:
        stop = min(n_centres, start + _CHUNK)
        idx = np.arange(start - w, stop + w)
        vals = nl.a(idx * s)
        if kernels.window_oscillation(vals, w) > limit:
            return False
        start = stop
    return True


_theta_cache = {}


def mollifier_width(nl, n, rtol=THETA_RTOL):
    """theta_n: largest theta in (0, 1] passing the modulus test, by bisection."""
    key = (nl.cache_key, int(n), rtol)
    if key in _theta_cache:
        return _theta_cache[key]
    if _modulus_ok(nl, n, 1.0):
        theta = 1.0
    else:
        hi, lo = 1.0, 0.5
        while not _modulus_ok(nl, n, lo):
            hi, lo = lo, lo / 2.0
            if lo < 1e-14:
                raise RuntimeError("mollifier width underflow: a is not uniformly continuous")
        while hi / lo - 1.0 > rtol:
            mid = math.sqrt(lo * hi)
            if _modulus_ok(nl, n, mid):
                lo = mid
            else:
                hi = mid
        theta = lo
    _theta_cache[key] = theta
    return theta


def _clamped_a(nl, theta, n):
    lo, hi = 3.0 * theta, 3.0 * n
    return lambda r: nl.a(np.clip(np.abs(r), lo, hi))


def _shifted_part(nl, theta, n, r, tol=QUAD_TOL):
    """(rho_theta * a(3 theta v |r| ^ 3n))(r) and its derivative, by quadrature.

    Normalizing by the same rule's kernel mass makes the convolution of a
    constant exact.
    """
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    F = _clamped_a(nl, theta, n)

    def vals(y, sl):
        return bump(y)[None, :] * F(flat[sl][:, None] - theta * y[None, :])

    def slopes(y, sl):
        return bump_prime(y)[None, :] * F(flat[sl][:, None] - theta * y[None, :])

    mass = simpson(lambda y, sl: bump(y)[None, :], -1.0, 1.0, 1, tol=1e-14,
                   name="kernel mass")[0]
    b = simpson(vals, -1.0, 1.0, flat.size, tol=tol * BUMP_MASS, name="a_n convolution")
    db = simpson(slopes, -1.0, 1.0, flat.size, tol=tol * BUMP_MASS * theta,
                 name="a_n' convolution")
    return (b / mass).reshape(r.shape), (db / (theta * mass)).reshape(r.shape)


def _table_nodes(theta, n):
    fine = theta / 8.0
    near_zero = np.arange(0.0, 8.0 * theta + fine / 2, fine)
    pts = [near_zero]
    r = near_zero[-1]
    edge = 3.0 * n - 4.0 * theta
    grow = []
    while r < edge:
        r = r + min(max(fine, 0.02 * r), 0.1)
        grow.append(min(r, edge))
    pts.append(np.array(grow))
    pts.append(np.arange(edge, 3.0 * n + 2.0 * theta + fine / 2, fine))
    pos = np.unique(np.concatenate(pts))
    pos = pos[np.concatenate([[True], np.diff(pos) > 1e-3 * fine])]
    return pos


class MollifiedCoefficients:
    """Regularized coefficients at index n.

    ``a_n = 2/n + rho_theta * a(3 theta v |r| ^ 3n)`` is tabulated on a
    nonuniform node set and interpolated by cubic Hermite polynomials with
    quadrature slopes; ``A_n`` and ``Psi_n`` integrate the tabulated ``a_n``
    exactly piece by piece. ``a_n_exact`` evaluates the defining convolution
    directly.
    """

    def __init__(self, nl, g, u0, n):
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        self.n = int(n)
        self.nl = nl
        self.m = nl.m
        self.K = nl.K
        self.theta = mollifier_width(nl, self.n)
        self.shift = 2.0 / self.n
        pos = _table_nodes(self.theta, self.n)
        b, db = _shifted_part(nl, self.theta, self.n, pos)
        xs = np.concatenate([-pos[:0:-1], pos])
        bs = np.concatenate([b[:0:-1], b])
        dbs = np.concatenate([-db[:0:-1], db])
        dbs[pos.size - 1] = 0.0
        self._b = HermiteTable(xs, bs, dbs)
        origin = pos.size - 1
        shift = self.shift
        self._A = self._b.antiderivative(lambda v: (shift + np.maximum(v, 0.0)) ** 2, origin)
        self._Psi = self._b.antiderivative(lambda v: shift + np.maximum(v, 0.0), origin)
        self.g_n = g.mollified(self.n) if g is not None else None
        self.u0_n = mollify_field(u0, self.n) if u0 is not None else None

    def a_n(self, r):
        return self.shift + np.maximum(self._b(r), 0.0)

    def a_n_exact(self, r):
        return self.shift + np.maximum(_shifted_part(self.nl, self.theta, self.n, r)[0], 0.0)

    def da_n(self, r):
        return np.where(self._b(r) > 0.0, self._b.derivative(r), 0.0)

    def A_n(self, r):
        return self._A(r)

    def dA_n(self, r):
        return self._A.derivative(r)

    def Psi_n(self, r):
        return self._Psi(r)

    # uniform interface with Nonlinearity, used by the solvers
    A = A_n
    dA = dA_n
    a = a_n
    Psi = Psi_n

    @property
    def law(self):
        t = self._A
        return Law(kernels.LAW_HERMITE, self.m, t.xs, t.ys, t.dys)

    def __repr__(self):
        return f"MollifiedCoefficients(n={self.n}, theta={self.theta:.4g})"


_mollify_cache = {}


def mollify(nl, g, u0, n):
    """Build :class:`MollifiedCoefficients`; the A-part is cached per (nl, n)."""
    key = (nl.cache_key, int(n))
    base = _mollify_cache.get(key)
    if base is None:
        base = MollifiedCoefficients(nl, None, None, n)
        _mollify_cache[key] = base
    out = object.__new__(MollifiedCoefficients)
    out.__dict__.update(base.__dict__)
    out.g_n = g.mollified(int(n)) if g is not None else None
    out.u0_n = mollify_field(u0, int(n)) if u0 is not None else None
    return out


def _cell_weights(dx, eps):
    """Kernel mass of rho_eps over each cell offset, normalized to sum 1."""
    half = int(math.ceil(eps / dx - 0.5))
    if half == 0:
        return np.array([1.0])
    edges = (np.arange(-half, half + 2) - 0.5) * dx
    masses = np.diff(kernel_cdf(edges / eps))
    w = masses[: 2 * half + 1]
    w = 0.5 * (w + w[::-1])
    return w / w.sum()


def mollify_field(u0, n):
    """rho_{1/n} convolution of the field clipped at +-n (periodic, per axis)."""
    vals = np.clip(u0.values, -n, n)
    w = _cell_weights(u0.grid.dx, 1.0 / n)
    if w.size > 1:
        for axis in range(u0.grid.dim):
            vals = _wrap_convolve(vals, w, axis)
    return Field(u0.grid, vals)


def _wrap_convolve(vals, w, axis):
    if w.size <= vals.shape[axis]:
        return convolve1d(vals, w, axis=axis, mode="wrap")
    # kernel wider than the torus: fold weights onto the period
    M = vals.shape[axis]
    half = w.size // 2
    folded = np.zeros(M)
    for k, wk in enumerate(w):
        folded[(k - half) % M] += wk
    out = np.zeros_like(vals)
    for k, wk in enumerate(folded):
        if wk:
            out += wk * np.roll(vals, k, axis=axis)
    return out


# ---------------------------------------------------------------------------
# distance between noise families


def noise_distance(g, g2, sample_grid=None, m=2.0):
    """sup over samples of sum_k |g^k - g2^k|^2 / (1+|u|)^(m+1)."""
    sg = sample_grid or SampleGrid()
    k = max(g.K_modes, g2.K_modes)
    g, g2 = g.padded(k), g2.padded(k)
    x = sg.x_points()
    u = sg.r_values()
    X = np.broadcast_to(x[:, None, :], (x.shape[0], u.size, x.shape[1]))
    U = np.broadcast_to(u[None, :], (x.shape[0], u.size))
    diff = g.evaluate(X, U) - g2.evaluate(X, U)
    ratio = np.sum(diff ** 2, axis=0) / (1.0 + np.abs(U)) ** (m + 1.0)
    return float(np.max(ratio))
