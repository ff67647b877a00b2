"""Small-noise stochastic porous-medium solver with seeded Brownian drivers."""
import math

import numpy as np

from .grid import fmt, l1_path_distance, lp_norm
from .skeleton import resolve_coefficients, steps_for
from .stepping import integrate


def mode_key(seed, k):
    """Philox key for mode ``k`` of root ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) % (1 << 64), spawn_key=(int(k),))
    return ss.generate_state(2, dtype=np.uint64)


def derive_seed(root, *path):
    """Deterministic 64-bit child seed for (root, experiment, eps, sample, ...)."""
    ss = np.random.SeedSequence(entropy=int(root) % (1 << 64),
                                spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class BrownianPath:
    """Increments of K independent Brownian motions on a uniform grid.

    Mode k draws from its own counter-based Philox stream keyed by
    ``(seed, k)``; increment j of mode k is the j-th normal of that stream,
    so the values do not depend on how many steps or modes are requested.
    """

    def __init__(self, K_modes, dt, n_steps, seed):
        if K_modes < 1 or n_steps < 1 or not dt > 0:
            raise ValueError("need K_modes >= 1, n_steps >= 1 and dt > 0")
        self.K_modes = int(K_modes)
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.seed = int(seed)
        inc = np.empty((self.n_steps, self.K_modes))
        for k in range(self.K_modes):
            gen = np.random.Generator(np.random.Philox(key=mode_key(self.seed, k)))
            inc[:, k] = gen.standard_normal(self.n_steps)
        inc *= math.sqrt(self.dt)
        inc.setflags(write=False)
        self.increments = inc

    @classmethod
    def for_horizon(cls, K_modes, dt, T, seed):
        return cls(K_modes, dt, steps_for(T, dt), seed)

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def values(self):
        """W_k(t_j), shape ``(n_steps + 1, K_modes)``."""
        return np.vstack([np.zeros(self.K_modes), np.cumsum(self.increments, axis=0)])


def _check_path(path, cfg, noise):
    if abs(path.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise ValueError(f"path step {path.dt} does not match solver dt {cfg.dt}")
    if noise is not None and path.K_modes != noise.K_modes:
        raise ValueError(f"path has {path.K_modes} modes, noise has {noise.K_modes}")


def solve_spde(coeffs, g, u0, eps, path, cfg):
    """Semi-implicit Euler-Maruyama for du = Delta A(u) dt + sqrt(eps) g(u) dW."""
    return solve_controlled_spde(coeffs, g, u0, eps, None, path, cfg)


def solve_controlled_spde(coeffs, g, u0, eps, h, path, cfg):
    """Controlled SPDE: adds the drift sum_k g^k h_k dt to every noise step.

    ``h=None`` means no control. With eps = 0 the result is bitwise the
    skeleton solution; with h = 0 it is bitwise :func:`solve_spde`.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    c, noise, start = resolve_coefficients(coeffs, g, u0, cfg)
    _check_path(path, cfg, noise)
    if h is not None:
        if abs(h.T - path.n_steps * path.dt) > 1e-9 * max(1.0, h.T):
            raise ValueError("control horizon differs from the Brownian path horizon")
    return integrate(c.law, noise, start, cfg.dt, path.n_steps, control=h,
                     eps=float(eps), increments=path.increments,
                     tol=cfg.newton_tol, maxit=cfg.newton_max_iter)


def moment_bound_holds(traj, m, u0, factor=10.0, offset=1.0):
    """sup_t ||u(t)||_{L^{m+1}} <= factor * ||u0||_{L^{m+1}} + offset."""
    p = m + 1.0
    sup = max(lp_norm(traj.state(j), p) for j in range(len(traj)))
    return sup <= factor * lp_norm(u0, p) + offset, sup


def ensemble_rows(coeffs, g, u0, eps_list, seeds, cfg, reference, h=None):
    """One record per (eps, seed): terminal L1 norm, path L1 distance, mass checksum."""
    rows = []
    T = reference.horizon
    for eps in eps_list:
        for seed in seeds:
            path = BrownianPath.for_horizon(g.K_modes, cfg.dt, T, seed)
            traj = solve_controlled_spde(coeffs, g, u0, eps, h, path, cfg)
            rows.append({
                "eps": eps, "seed": seed,
                "terminal_L1": lp_norm(traj.final, 1),
                "path_L1_to_reference": l1_path_distance(traj, reference),
                "mass_checksum": float(np.sum(traj.diagnostics["mass"])),
            })
    return rows


ENSEMBLE_COLUMNS = ("eps", "seed", "terminal_L1", "path_L1_to_reference", "mass_checksum")


def ensemble_csv(rows):
    lines = [",".join(ENSEMBLE_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c == "seed" else fmt(r[c]) for c in ENSEMBLE_COLUMNS))
    return "\n".join(lines) + "\n"

