"""Semi-implicit time integrator shared by the skeleton and stochastic solvers.

One step reads

    u^{j+1} - dt * Delta A(u^{j+1}) = u^j + dt * sum_k g^k(u^j) h_k(t_j)
                                          + sqrt(eps) * sum_k g^k(u^j) dB_k^j

with the diffusion solved by Newton and both forcing terms explicit. A term
whose coefficients are all zero is skipped rather than added, so the
reductions eps = 0 and h = 0 are bitwise identical to the reduced solvers.
"""
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import kernels
from .errors import SolverError
from .grid import Trajectory


def _laplacian_matrix_2d(M):
    e = np.ones(M)
    L1 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(M, M), format="lil")
    L1[0, M - 1] = 1.0
    L1[M - 1, 0] = 1.0
    L1 = L1.tocsr()
    eye = sp.identity(M, format="csr")
    return (sp.kron(L1, eye) + sp.kron(eye, L1)).tocsr()


def _newton_2d(rhs, guess, c, law, L, tol, maxit):
    shape = rhs.shape
    r = rhs.ravel()
    u = guess.ravel().copy()

    def residual(v):
        f, df = law.both(v)
        return v - c * (L @ f) - r, df

    res, df = residual(u)
    rnorm = np.max(np.abs(res))
    it = 0
    eye = sp.identity(u.size, format="csr")
    while rnorm > tol and it < maxit:
        it += 1
        J = (eye - c * (L @ sp.diags(df))).tocsc()
        delta = spsolve(J, -res)
        step = 1.0
        for _ in range(12):
            trial = u + step * delta
            tres, tdf = residual(trial)
            tnorm = np.max(np.abs(tres))
            if tnorm < rnorm:
                break
            step *= 0.5
        u, res, df, rnorm = trial, tres, tdf, tnorm
        if not np.isfinite(rnorm):
            break
    return u.reshape(shape), it, float(rnorm)


class ImplicitDiffusion:
    """Solver for ``u - dt * Delta_h A(u) = rhs`` on a periodic grid."""

    def __init__(self, law, grid, dt, tol, maxit):
        self.law = law
        self.grid = grid
        self.dt = dt
        self.c = dt / grid.dx ** 2
        self.tol = tol
        self.maxit = maxit
        self._L = _laplacian_matrix_2d(grid.cells) if grid.dim == 2 else None

    def solve(self, rhs, guess):
        if self.grid.dim == 1:
            law = self.law
            return kernels.newton_periodic_1d(rhs, guess, self.c, law.kind, law.m,
                                              law.xs, law.ys, law.dys,
                                              self.tol, self.maxit)
        return _newton_2d(rhs, guess, self.c, self.law, self._L, self.tol, self.maxit)


def integrate(law, noise, u0, dt, n_steps, *, control=None, eps=0.0,
              increments=None, tol=1e-10, maxit=50, keep=True):
    """Run ``n_steps`` semi-implicit steps from the field ``u0``.

    ``noise`` is a :class:`NoiseFamily` (or None when no forcing is used),
    ``control`` anything with ``value_at(t) -> (K,)``, ``increments`` an
    array ``(n_steps, K)`` of Brownian increments. Returns a
    :class:`Trajectory` whose diagnostics carry the mass trace, the
    per-step mass-identity defect, Newton iteration counts and extrema.
    """
    grid = u0.grid
    stepper = ImplicitDiffusion(law, grid, dt, tol, maxit)
    gfun = noise.on_grid(grid)[0] if noise is not None else None
    use_noise = eps > 0.0 and increments is not None and gfun is not None
    sq = math.sqrt(eps)
    meas = grid.cell_measure
    u = np.array(u0.values, dtype=float)
    out = np.empty((n_steps + 1,) + grid.shape) if keep else None
    if keep:
        out[0] = u
    mass = [float(np.sum(u) * meas)]
    defects = []
    iters = []
    umin, umax = [float(u.min())], [float(u.max())]
    for j in range(n_steps):
        t = j * dt
        rhs = u
        G = None
        if control is not None and gfun is not None:
            hj = control.value_at(t)
            if np.any(hj != 0.0):
                G = gfun(u)
                rhs = rhs + dt * np.tensordot(hj, G, axes=1)
        if use_noise:
            if G is None:
                G = gfun(u)
            rhs = rhs + sq * np.tensordot(increments[j], G, axes=1)
        new, it, res = stepper.solve(rhs, u)
        if not np.isfinite(res) or not np.all(np.isfinite(new)):
            raise SolverError(f"non-finite state at step {j}", step=j, residual=res)
        if res > tol:
            raise SolverError(f"Newton did not converge at step {j}: residual "
                              f"{res:.3e} > {tol:.1e} after {it} iterations",
                              step=j, residual=res)
        defects.append(float(np.sum(new) * meas - np.sum(rhs) * meas))
        u = new
        if keep:
            out[j + 1] = u
        mass.append(float(np.sum(u) * meas))
        iters.append(it)
        umin.append(float(u.min()))
        umax.append(float(u.max()))
    times = dt * np.arange(n_steps + 1)
    diag = {"mass": mass, "mass_defect": defects, "newton_iterations": iters,
            "min": umin, "max": umax, "backend": kernels.BACKEND}
    if not keep:
        out = np.stack([u0.values, u])
        times = np.array([0.0, n_steps * dt])
    return Trajectory(grid, times, out, diag)
