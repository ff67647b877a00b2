"""Controlled (skeleton) equation solver and entropy diagnostics."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coefficients import MollifiedCoefficients, Nonlinearity, mollify
from .errors import PreconditionError
from .grid import Field, l1_path_distance
from .quadrature import _ramp_integral, kernel, kernel_cdf, simpson
from .stepping import integrate

# ---------------------------------------------------------------------------
# controls


class Control:
    """Piecewise-constant control h(t) = sum_k h_k(t) e_k on a uniform grid.

    ``values[j, k]`` is h_k on [t_j, t_{j+1}). ``energy`` is
    ``0.5 * sum h^2 dt_h``, computed once at construction.
    """

    def __init__(self, values, T):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("control values must have shape (intervals, K_modes)")
        if not np.all(np.isfinite(values)):
            raise ValueError("control values must be finite")
        if T <= 0:
            raise ValueError("horizon T must be positive")
        values.setflags(write=False)
        self.values = values
        self.T = float(T)
        self.energy = 0.5 * float(np.sum(values ** 2)) * self.dt_h

    @classmethod
    def zeros(cls, K_modes, T, intervals=1):
        return cls(np.zeros((intervals, K_modes)), T)

    @classmethod
    def constant(cls, levels, T, intervals=1):
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        return cls(np.tile(levels, (intervals, 1)), T)

    @classmethod
    def random(cls, seed, K_modes, T, intervals, energy=None):
        """Seeded Gaussian control, optionally rescaled to a given energy."""
        rng = np.random.Generator(np.random.Philox(seed))
        vals = rng.standard_normal((intervals, K_modes))
        out = cls(vals, T)
        if energy is not None:
            out = cls(vals * math.sqrt(energy / out.energy), T)
        return out

    @classmethod
    def from_function(cls, func, K_modes, T, intervals):
        """Interval averages of a vectorized ``func(t) -> (K, *t.shape)``."""
        edges = np.linspace(0.0, T, intervals + 1)
        vals = np.empty((intervals, K_modes))
        for k in range(K_modes):
            def integrand(s, sl, k=k):
                a, b = edges[:-1][sl], edges[1:][sl]
                tt = a[:, None] + (b - a)[:, None] * s[None, :]
                return np.asarray(func(tt))[k]
            vals[:, k] = simpson(integrand, 0.0, 1.0, intervals, tol=1e-12,
                                 name="control interval average")
        return cls(vals, T)

    @property
    def intervals(self):
        return self.values.shape[0]

    @property
    def K_modes(self):
        return self.values.shape[1]

    @property
    def dt_h(self):
        return self.T / self.intervals

    @property
    def time_grid(self):
        return np.linspace(0.0, self.T, self.intervals + 1)

    @property
    def l2_squared(self):
        """sum_k int_0^T h_k^2 ds."""
        return 2.0 * self.energy

    def recompute_energy(self):
        return 0.5 * float(np.sum(self.values ** 2)) * self.dt_h

    def in_ball(self, M):
        return self.l2_squared <= M

    def value_at(self, t):
        """Left-continuous sample h(t); ``t`` in [0, T)."""
        j = int(math.floor(t / self.dt_h * (1.0 + 1e-12) + 1e-9))
        return self.values[min(max(j, 0), self.intervals - 1)]

    def with_values(self, values):
        return Control(values, self.T)

    def resampled(self, intervals):
        """Same function on a finer uniform grid (intervals must be a multiple)."""
        if intervals % self.intervals:
            raise ValueError("new interval count must be a multiple of the old one")
        return Control(np.repeat(self.values, intervals // self.intervals, axis=0), self.T)

    def __repr__(self):
        return (f"Control(K_modes={self.K_modes}, intervals={self.intervals}, "
                f"T={self.T}, energy={self.energy:.6g})")


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    regularization_index: Optional[int] = None
    control_radius: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")


# ---------------------------------------------------------------------------
# solver


def resolve_coefficients(coeffs, g, u0, cfg):
    """Return ``(coefficient object, noise family, initial field)`` for a run.

    With a regularization index (or a :class:`MollifiedCoefficients` input)
    the mollified A_n, g_n and u0_n are used.
    """
    if isinstance(coeffs, MollifiedCoefficients):
        mc = coeffs
        g_n = mc.g_n if mc.g_n is not None else (g.mollified(mc.n) if g is not None else None)
        u0_n = mc.u0_n if mc.u0_n is not None else mollify(mc.nl, None, u0, mc.n).u0_n
        return mc, g_n, u0_n
    if cfg.regularization_index is not None:
        mc = mollify(coeffs, g, u0, cfg.regularization_index)
        return mc, mc.g_n, mc.u0_n
    return coeffs, g, u0


def steps_for(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon {T} is not an integer multiple of dt={dt}")
    return n


def check_guard(nl, g, h, cfg):
    """Explicit-drift stability guard for runs with the raw coefficients."""
    if g is None or h is None:
        return
    if cfg.dt > h.dt_h * (1.0 + 1e-9):
        raise PreconditionError(f"dt={cfg.dt} exceeds the control step {h.dt_h}")
    M = cfg.control_radius if cfg.control_radius is not None else h.l2_squared
    bound = cfg.dt * nl.K * math.sqrt(M) * math.sqrt(g.K_modes)
    if bound > 0.5:
        raise PreconditionError(f"dt*K*sqrt(M)*sqrt(K_modes) = {bound:.3g} > 0.5")


def solve_skeleton(coeffs, g, u0, h, cfg):
    """Solve du = Delta A(u) dt + sum_k g^k(x, u) h_k(t) dt on [0, h.T].

    ``coeffs`` is a :class:`Nonlinearity` or :class:`MollifiedCoefficients`.
    Raises :class:`SolverError` on Newton failure or non-finite states.
    """
    c, noise, start = resolve_coefficients(coeffs, g, u0, cfg)
    if isinstance(c, Nonlinearity):
        check_guard(c, noise, h, cfg)
    if noise is not None and h.K_modes != noise.K_modes:
        raise ValueError(f"control has {h.K_modes} modes, noise has {noise.K_modes}")
    n = steps_for(h.T, cfg.dt)
    return integrate(c.law, noise, start, cfg.dt, n, control=h,
                     tol=cfg.newton_tol, maxit=cfg.newton_max_iter)


def mass_identity_defect(traj):
    """Largest per-step |mass change - integrated forcing|."""
    d = traj.diagnostics.get("mass_defect", [])
    return float(np.max(np.abs(d))) if len(d) else 0.0


# ---------------------------------------------------------------------------
# entropy diagnostics


class Entropy:
    """Convex entropy eta with derivatives and the support of eta''."""

    def __init__(self, eta, d_eta, dd_eta, support=None):
        self.eta = eta
        self.d_eta = d_eta
        self.dd_eta = dd_eta
        self.support = support

    @classmethod
    def linear(cls, slope=1.0, offset=0.0):
        return cls(lambda r: slope * np.asarray(r) + offset,
                   lambda r: np.full(np.shape(r), float(slope)),
                   lambda r: np.zeros(np.shape(r)), None)

    @classmethod
    def smoothed_abs(cls, k=0.0, delta=0.1):
        """Smooth version of |r - k|: eta'' = 2 rho_delta(r - k)."""
        return cls(lambda r: delta * (2.0 * _ramp_integral((np.asarray(r) - k) / delta)
                                      - (np.asarray(r) - k) / delta),
                   lambda r: 2.0 * kernel_cdf((np.asarray(r) - k) / delta) - 1.0,
                   lambda r: 2.0 * kernel(np.asarray(r) - k, delta),
                   (k - delta, k + delta))

    def flux(self, A, u):
        """q(u) = eta'(u) A(u) - int_0^u eta''(s) A(s) ds (q' = eta' a^2, q(0)=0)."""
        u = np.asarray(u, dtype=float)
        q = self.d_eta(u) * A(u)
        if self.support is None:
            return q
        lo, hi = self.support
        flat = u.ravel()
        pts = np.unique(np.concatenate([flat, [0.0]]))
        top = np.clip(pts, lo, hi)
        span = top - lo

        def integrand(s, sl):
            x = lo + span[sl][:, None] * s[None, :]
            return self.dd_eta(x) * A(x) * span[sl][:, None]

        F = simpson(integrand, 0.0, 1.0, pts.size, name="entropy flux")
        F0 = F[np.searchsorted(pts, 0.0)]
        integral = np.interp(flat, pts, F) - F0
        return q - integral.reshape(u.shape)


def _periodic_lap(v, grid):
    out = np.zeros_like(v)
    for axis in range(grid.dim):
        out += (np.roll(v, -1, axis=axis) - 2.0 * v + np.roll(v, 1, axis=axis))
    return out / grid.dx ** 2


def _psi_function(coeffs):
    if isinstance(coeffs, Nonlinearity) and coeffs.kind == "canonical":
        return coeffs.Psi_closed_form
    return coeffs.Psi


def entropy_residual(traj, coeffs, g, h, eta, phi):
    """Discrete LHS - RHS of the entropy inequality for one (eta, phi) pair.

    ``phi(t, x)`` is a nonnegative test function vanishing at the final time,
    ``x`` the cell centres. The time derivative is paired backward with
    ``phi^{j+1}``, diffusion and dissipation use ``u^{j+1}`` and the forcing
    uses ``g(u^j) eta'(u^{j+1})``. Entropy admissibility means the result is
    <= 0 up to discretization error; for linear eta it is the weak-form
    residual of the scheme.
    """
    grid = traj.grid
    meas = grid.cell_measure
    x = grid.centers()
    U = traj.values
    times = traj.times
    Phi = np.stack([np.broadcast_to(phi(t, x), grid.shape) for t in times])
    dts = np.diff(times)
    A = coeffs.A

    t1 = -np.sum(eta.eta(U[:-1]) * (Phi[1:] - Phi[:-1])) * meas
    t2 = -np.sum(eta.eta(U[0]) * Phi[0]) * meas

    q = eta.flux(A, U[1:])
    lap_phi = np.stack([_periodic_lap(p, grid) for p in Phi[1:]])
    t3 = -np.sum(dts.reshape((-1,) + (1,) * grid.dim) * q * lap_phi) * meas

    t4 = 0.0
    dd = eta.dd_eta
    if eta.support is not None:
        psi = _psi_function(coeffs)
        for axis in range(grid.dim):
            ax = axis + 1
            un = U[1:]
            nb = np.roll(un, -1, axis=ax)
            face_u = 0.5 * (un + nb)
            w = dd(face_u)
            if not np.any(w):
                continue
            grad = (psi(nb) - psi(un)) / grid.dx
            pf = 0.5 * (Phi[1:] + np.roll(Phi[1:], -1, axis=ax))
            t4 += np.sum(dts.reshape((-1,) + (1,) * grid.dim) * pf * w * grad ** 2) * meas

    t5 = 0.0
    if g is not None and h is not None:
        gfun = g.on_grid(grid)[0]
        for j in range(len(times) - 1):
            hj = h.value_at(times[j])
            if not np.any(hj):
                continue
            drift = np.tensordot(hj, gfun(U[j]), axes=1)
            t5 -= dts[j] * np.sum(drift * Phi[j + 1] * eta.d_eta(U[j + 1])) * meas
    return float(t1 + t2 + t3 + t4 + t5)


# ---------------------------------------------------------------------------
# approximation study


def approximation_cauchy_study(nl, g, u0, h, n_list, cfg):
    """L^1(0,T; L^1) distances between consecutive regularization levels.

    Returns rows ``(n, n_next, distance)``.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ValueError("n_list needs at least 3 entries")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    runs = {}
    for n in n_list:
        mc = mollify(nl, g, u0, n)
        runs[n] = solve_skeleton(mc, g, u0, h, cfg)
    return [(a, b, l1_path_distance(runs[a], runs[b])) for a, b in zip(n_list, n_list[1:])]


def bump_field(grid, amplitude=1.0, center=0.5, width=0.25):
    """Compactly supported bump ``amplitude * max(0, 1 - (|x-c|/width)^2)``."""
    def f(x):
        d = np.abs(x - center)
        d = np.minimum(d, 1.0 - d)
        r2 = np.sum((d / width) ** 2, axis=-1)
        return amplitude * np.maximum(0.0, 1.0 - r2)
    return Field.from_function(grid, f)
