"""Rate-function estimation and the small-noise / weak-continuity experiments."""
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import spsolve

from . import kernels
from .grid import Trajectory, fmt, l1_path_distance, lp_norm
from .skeleton import Control, resolve_coefficients, solve_skeleton, steps_for
from .spde import BrownianPath, derive_seed, solve_controlled_spde
from .stepping import _laplacian_matrix_2d, integrate

EXP_SMALL_NOISE = 7
FD_LIMIT = 64


@dataclass
class RateProblem:
    """Penalized rate problem: minimize energy(h) + lambda * dist(G0(h), target)^2.

    ``target`` is a terminal :class:`Field` or a path :class:`Trajectory`.
    The penalty is continued over ``rounds`` rounds, multiplying by 10 each
    time.
    """

    target: object
    penalty_weight: float = 1e3
    T: float = 0.25
    K_modes: int = 1
    intervals: int = 8
    max_iter: int = 200
    misfit_tol: float = 1e-2
    rounds: int = 3
    gradient: str = "auto"
    fd_step: float = 1e-6

    def __post_init__(self):
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if self.gradient not in ("auto", "fd", "adjoint"):
            raise ValueError("gradient must be 'auto', 'fd' or 'adjoint'")

    @property
    def n_coefficients(self):
        return self.K_modes * self.intervals

    @property
    def path_target(self):
        return isinstance(self.target, Trajectory)


@dataclass
class RateEstimate:
    I_est: float
    h_opt: Control
    misfit: float
    converged: bool
    log: list = field(default_factory=list)

    def to_json(self):
        return json.dumps({
            "I_est": self.I_est, "misfit": self.misfit, "converged": self.converged,
            "control": {"T": self.h_opt.T, "values": self.h_opt.values.tolist()},
            "iteration_log": self.log,
        }, indent=2, sort_keys=True)


class _Forward:
    """Skeleton map h -> trajectory plus misfit/gradient machinery."""

    def __init__(self, problem, coeffs, g, u0, cfg):
        self.problem = problem
        self.cfg = cfg
        c, noise, start = resolve_coefficients(coeffs, g, u0, cfg)
        self.coeffs, self.noise, self.u0 = c, noise, start
        self.law = c.law
        self.n_steps = steps_for(problem.T, cfg.dt)
        tgt = problem.target
        if tgt.grid != start.grid:
            raise ValueError("target grid does not match the solver grid")
        if problem.path_target and len(tgt) != self.n_steps + 1:
            raise ValueError("path target must have one state per solver step")
        self.evaluations = 0

    def control(self, x):
        p = self.problem
        return Control(np.asarray(x).reshape(p.intervals, p.K_modes), p.T)

    def run(self, h, keep=None):
        keep = self.problem.path_target if keep is None else keep
        self.evaluations += 1
        return integrate(self.law, self.noise, self.u0, self.cfg.dt, self.n_steps,
                         control=h, tol=self.cfg.newton_tol,
                         maxit=self.cfg.newton_max_iter, keep=keep)

    def distance(self, traj):
        tgt = self.problem.target
        if self.problem.path_target:
            return l1_path_distance(traj, tgt)
        return lp_norm(traj.final - tgt, 1)

    def objective(self, x, lam):
        h = self.control(x)
        d = self.distance(self.run(h))
        return h.energy + lam * d * d, d

    def fd_gradient(self, x, lam):
        step = self.problem.fd_step
        grad = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = step * max(1.0, abs(x[i]))
            fp = self.objective(x + e, lam)[0]
            fm = self.objective(x - e, lam)[0]
            grad[i] = (fp - fm) / (2.0 * e[i])
        return grad

    def adjoint_gradient(self, x, lam):
        """Discrete adjoint of the semi-implicit stepper."""
        p = self.problem
        h = self.control(x)
        traj = self.run(h, keep=True)
        grid = traj.grid
        meas = grid.cell_measure
        dt = self.cfg.dt
        c = dt / grid.dx ** 2
        U = traj.values
        d = self.distance(traj)
        gfun, dgfun = self.noise.on_grid(grid)
        if p.path_target:
            tv = p.target.values
            dphi = [2.0 * lam * d * np.sign(U[j] - tv[j]) * meas * dt
                    for j in range(self.n_steps)] + [np.zeros(grid.shape)]
        else:
            dphi = [np.zeros(grid.shape)] * self.n_steps
            dphi.append(2.0 * lam * d * np.sign(U[-1] - p.target.values) * meas)
        L2 = _laplacian_matrix_2d(grid.cells) if grid.dim == 2 else None
        grad = np.zeros((p.intervals, p.K_modes))
        adj = dphi[-1]
        for j in range(self.n_steps - 1, -1, -1):
            s = self.law.both(U[j + 1])[1]
            mu = self._transpose_solve(adj, s, c, grid, L2)
            t = j * dt
            G = gfun(U[j])
            idx = min(int(math.floor(t / h.dt_h * (1.0 + 1e-12) + 1e-9)), p.intervals - 1)
            grad[idx] += dt * np.tensordot(G, mu, axes=(tuple(range(1, G.ndim)),
                                                        tuple(range(mu.ndim))))
            hj = h.value_at(t)
            adj = dphi[j] + mu + dt * np.tensordot(hj, dgfun(U[j]), axes=1) * mu
        grad += h.values * h.dt_h
        return grad.ravel()

    @staticmethod
    def _transpose_solve(rhs, s, c, grid, L2):
        if grid.dim == 1:
            off = -c * s
            return kernels.periodic_tridiag_solve(off, 1.0 + 2.0 * c * s, off, rhs)
        Jt = (sp.identity(s.size) - c * (sp.diags(s.ravel()) @ L2)).tocsc()
        return spsolve(Jt, rhs.ravel()).reshape(grid.shape)


def estimate_rate(problem, coeffs, g, u0, cfg, x0=None):
    """Upper estimate of the rate of reaching ``problem.target``.

    Runs L-BFGS (scipy) on the penalized objective with finite-difference
    gradients for at most 64 coefficients and the discrete adjoint above
    that. Budget exhaustion is reported through ``converged=False``.
    """
    fwd = _Forward(problem, coeffs, g, u0, cfg)
    use_fd = problem.gradient == "fd" or (
        problem.gradient == "auto" and problem.n_coefficients <= FD_LIMIT)
    grad_fn = fwd.fd_gradient if use_fd else fwd.adjoint_gradient
    x = np.zeros(problem.n_coefficients) if x0 is None else np.asarray(x0, float).ravel()
    log = []
    lam = problem.penalty_weight
    for rnd in range(problem.rounds):
        def fun(z, lam=lam):
            return fwd.objective(z, lam)[0]

        def jac(z, lam=lam):
            return grad_fn(z, lam)

        round_log = [fun(x)]
        res = minimize(fun, x, jac=jac, method="L-BFGS-B",
                       callback=lambda z: round_log.append(fun(z)),
                       options={"maxiter": problem.max_iter, "gtol": 1e-12,
                                "ftol": 1e-15, "maxcor": 20})
        if res.fun <= round_log[0]:
            x = res.x
        log.append({"round": rnd, "penalty": lam, "objective": round_log,
                    "status": int(res.status), "message": str(res.message)})
        lam *= 10.0
    h_opt = fwd.control(x)
    misfit = fwd.distance(fwd.run(h_opt))
    return RateEstimate(h_opt.energy, h_opt, misfit, misfit <= problem.misfit_tol, log)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentTable:
    columns: tuple
    rows: list

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self):
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(_cell(r[c]) for c in self.columns))
        return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt(v)


def monotone_nonincreasing(values, slack=0.1):
    return all(b <= a * (1.0 + slack) for a, b in zip(values, values[1:]))


def oscillating_control(h, eps, amplitude, intervals):
    """h + amplitude * sin(2 pi t / eps) e_1, averaged over each interval."""
    base = h.resampled(intervals)
    edges = np.linspace(0.0, h.T, intervals + 1)
    a, b = edges[:-1], edges[1:]
    w = 2.0 * np.pi / eps
    osc = (np.cos(w * a) - np.cos(w * b)) / (w * (b - a))
    vals = np.array(base.values)
    vals[:, 0] += amplitude * osc
    return Control(vals, h.T)


def weak_continuity_experiment(nl, g, u0, h, eps_list, cfg, amplitude=1.0):
    """Distances ||u^{h_eps} - u^h||_{L^1(0,T;L^1)} for oscillatory h_eps."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("eps_list needs at least 3 entries")
    intervals = steps_for(h.T, cfg.dt)
    if intervals % h.intervals:
        raise ValueError("solver steps must refine the control grid")
    base = h.resampled(intervals)
    ref = solve_skeleton(nl, g, u0, base, cfg)
    rows = []
    for eps in eps_list:
        he = oscillating_control(h, eps, amplitude, intervals)
        traj = solve_skeleton(nl, g, u0, he, cfg)
        rows.append({"eps": eps, "distance_L1": l1_path_distance(traj, ref),
                     "energy": he.energy})
    return ExperimentTable(("eps", "distance_L1", "energy"), rows)


def small_noise_experiment(nl, g, u0, h_family, eps_list, samples_per_eps, cfg,
                           root_seed=0, common_random_numbers=True):
    """Median and 90th percentile of ||Y^eps - Z||_{L^1(0,T;L^1)} per eps.

    ``h_family`` is a :class:`Control` or a callable ``seed -> Control``.
    Sample s uses the seed ``derive_seed(root, 7, s)`` for every eps when
    ``common_random_numbers`` is set, else ``derive_seed(root, 7, i_eps, s)``.
    """
    if samples_per_eps < 8:
        raise ValueError("samples_per_eps must be >= 8")
    rows = []
    cache = {}
    for i, eps in enumerate(eps_list):
        dists = []
        for s in range(samples_per_eps):
            key = (EXP_SMALL_NOISE, s) if common_random_numbers else (EXP_SMALL_NOISE, i, s)
            seed = derive_seed(root_seed, *key)
            h = h_family(seed) if callable(h_family) else h_family
            zkey = id(h) if not callable(h_family) else seed
            if zkey not in cache:
                cache[zkey] = solve_skeleton(nl, g, u0, h, cfg)
            Z = cache[zkey]
            path = BrownianPath.for_horizon(g.K_modes, cfg.dt, h.T, seed)
            Y = solve_controlled_spde(nl, g, u0, eps, h, path, cfg)
            dists.append(l1_path_distance(Y, Z))
        rows.append({"eps": float(eps), "median_L1": float(np.median(dists)),
                     "p90_L1": float(np.percentile(dists, 90)),
                     "samples": samples_per_eps, "seed_base": int(root_seed)})
    return ExperimentTable(("eps", "median_L1", "p90_L1", "samples", "seed_base"), rows)

