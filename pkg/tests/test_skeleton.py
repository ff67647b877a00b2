import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spmlab import (Control, Entropy, Field, NoiseFamily, NoiseMode, PeriodicGrid,
                    SolverConfig, SolverError, approximation_cauchy_study, bump_field,
                    entropy_residual, laplacian_of_A, lp_norm, solve_skeleton)
from spmlab.errors import PreconditionError
from spmlab.skeleton import mass_identity_defect
from spmlab.spde import moment_bound_holds

SMOOTH_T = 0.1


def smooth_phi(t, x):
    return (1 - t / SMOOTH_T) * (1 + 0.5 * np.cos(2 * np.pi * x[..., 0]))


# --- Control ---------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 30), st.floats(0.1, 3.0), st.integers(0, 2**32))
def test_control_energy_consistent(K, J, T, seed):
    h = Control.random(seed, K, T, J)
    assert abs(h.recompute_energy() - h.energy) <= 1e-12 * max(1.0, h.energy)
    assert h.energy == pytest.approx(0.5 * h.l2_squared, rel=1e-14)
    assert h.in_ball(h.l2_squared) and not h.in_ball(0.99 * h.l2_squared)


def test_control_random_energy_and_sampling():
    h = Control.random(3, 2, 0.5, 10, energy=0.7)
    assert h.energy == pytest.approx(0.7, rel=1e-12)
    assert np.array_equal(h.value_at(0.0), h.values[0])
    assert np.array_equal(h.value_at(0.05), h.values[1])  # left-continuous
    assert np.array_equal(h.value_at(0.0499999), h.values[0])
    assert np.array_equal(h.resampled(20).value_at(0.07), h.value_at(0.07))


def test_control_from_function_averages():
    h = Control.from_function(lambda t: np.stack([t, 2 * t]), 2, 1.0, 4)
    np.testing.assert_allclose(h.values[:, 0], [0.125, 0.375, 0.625, 0.875], atol=1e-12)
    np.testing.assert_allclose(h.values[:, 1], 2 * h.values[:, 0], atol=1e-12)


def test_solver_config_rejects():
    with pytest.raises(ValueError):
        SolverConfig(dt=0)
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=-1)


# --- basic solutions ---------------------------------------------------------

@pytest.mark.parametrize("dim,M", [(1, 32), (2, 12)])
def test_constant_preserved(dim, M, nl2, g_sin):
    grid = PeriodicGrid(dim, M)
    u0 = Field.constant(grid, 0.8)
    tr = solve_skeleton(nl2, g_sin, u0, Control.zeros(1, 0.1, 4), SolverConfig(dt=0.01))
    assert np.all(tr.values == 0.8)


def test_constant_mode_gives_u_equals_t(nl2):
    g = NoiseFamily([NoiseMode("constant", amp=1.0)], K=2)
    grid = PeriodicGrid(1, 16)
    tr = solve_skeleton(nl2, g, Field.constant(grid, 0.0), Control.constant([1.0], 0.5, 5),
                        SolverConfig(dt=0.01))
    np.testing.assert_allclose(tr.values, tr.times[:, None] * np.ones((1, 16)), atol=1e-13)


def test_mass_identity_and_laplacian_conservation(nl2, g_sin, bump128, cfg):
    h = Control.random(1, 1, 0.5, 10, energy=0.5)
    tr = solve_skeleton(nl2, g_sin, bump128, h, cfg)
    assert mass_identity_defect(tr) <= cfg.newton_tol
    # discrete mass change equals the integrated forcing
    gfun = g_sin.on_grid(bump128.grid)[0]
    meas = bump128.grid.cell_measure
    for j in range(0, 500, 37):
        forcing = cfg.dt * np.sum(np.tensordot(h.value_at(tr.times[j]), gfun(tr.values[j]), 1))
        change = np.sum(tr.values[j + 1] - tr.values[j])
        assert abs(change - forcing) * meas <= cfg.newton_tol
        lap = laplacian_of_A(tr.state(j), nl2.A).values
        assert abs(lap.sum()) <= 1e-12 * np.abs(lap).sum()


def test_contraction_two_bumps(nl2, g_sin, cfg):
    grid = PeriodicGrid(1, 128)
    u0, v0 = bump_field(grid), bump_field(grid, 0.7, 0.4, 0.2)
    h = Control.random(5, 1, 0.5, 10, energy=0.5)
    assert h.energy <= 1.0
    a = solve_skeleton(nl2, g_sin, u0, h, cfg)
    b = solve_skeleton(nl2, g_sin, v0, h, cfg)
    bound = math.exp(nl2.K * (0.5 + 1.0)) * lp_norm(u0 - v0, 1) * 1.05
    for j in (100, 250, 500):
        assert lp_norm(a.state(j) - b.state(j), 1) <= bound


def test_energy_bound_along_run(nl2, g_sin, bump128, cfg):
    tr = solve_skeleton(nl2, g_sin, bump128, Control.constant([1.0], 0.5, 1), cfg)
    ok, sup = moment_bound_holds(tr, 2.0, bump128)
    assert ok and sup > 0


def test_two_dimensional_run(nl2, g_sin):
    grid = PeriodicGrid(2, 16)
    u0 = bump_field(grid)
    cfg = SolverConfig(dt=5e-3)
    tr = solve_skeleton(nl2, g_sin, u0, Control.constant([0.5], 0.1, 2), cfg)
    assert mass_identity_defect(tr) <= cfg.newton_tol
    # radially symmetric data stays symmetric under the x-only forcing in y
    np.testing.assert_allclose(tr.final.values, tr.final.values[:, ::-1],
                               atol=1e-10)


def test_guard_rejects_large_step(nl2, g_sin, bump128):
    h = Control.constant([40.0], 0.5, 10)
    with pytest.raises(PreconditionError):
        solve_skeleton(nl2, g_sin, bump128, h, SolverConfig(dt=0.01))
    with pytest.raises(PreconditionError):
        solve_skeleton(nl2, g_sin, bump128, Control.zeros(1, 0.5, 100), SolverConfig(dt=0.01))


def test_newton_failure_reports_step(nl2, g_sin, bump128):
    with pytest.raises(SolverError) as err:
        solve_skeleton(nl2, g_sin, bump128, Control.zeros(1, 0.01, 1),
                       SolverConfig(dt=1e-3, newton_max_iter=1))
    assert err.value.step == 0 and err.value.residual > 0


def test_mode_count_mismatch(nl2, g_sin, bump128, cfg):
    with pytest.raises(ValueError):
        solve_skeleton(nl2, g_sin, bump128, Control.zeros(2, 0.1, 1), cfg)


def test_regularized_run_uses_mollified_data(nl2, g_sin, bump128):
    cfg = SolverConfig(dt=1e-3, regularization_index=8)
    tr = solve_skeleton(nl2, g_sin, bump128, Control.zeros(1, 0.05, 1), cfg)
    assert np.max(tr.values[0]) < np.max(bump128.values)
    assert np.min(tr.final.values) > 0  # nondegenerate diffusion spreads the support


# --- entropy residual --------------------------------------------------------

def _smooth_run(M, dt, nl2, g_sin):
    grid = PeriodicGrid(1, M)
    u0 = Field.from_function(grid, lambda x: 1.2 + 0.5 * np.sin(2 * np.pi * x[..., 0]))
    h = Control.constant([0.5], SMOOTH_T, 10)
    return solve_skeleton(nl2, g_sin, u0, h, SolverConfig(dt=dt)), h


def test_entropy_linear_is_weak_form(nl2, g_sin, bump128, cfg):
    h = Control.random(2, 1, 0.1, 10, energy=0.3)
    tr = solve_skeleton(nl2, g_sin, bump128, h, cfg)
    phi = lambda t, x: (1 - t / 0.1) * (1 + np.sin(2 * np.pi * x[..., 0]) ** 2)
    res = entropy_residual(tr, nl2, g_sin, h, Entropy.linear(), phi)
    assert abs(res) <= 10 * cfg.newton_tol


def test_entropy_constant_trajectory(nl2, g_sin):
    grid = PeriodicGrid(1, 32)
    tr = solve_skeleton(nl2, g_sin, Field.constant(grid, 0.4), Control.zeros(1, 0.1, 1),
                        SolverConfig(dt=0.01))
    for eta in (Entropy.linear(2.0, 1.0), Entropy.smoothed_abs(0.35, 0.1)):
        res = entropy_residual(tr, nl2, g_sin, None, eta, smooth_phi)
        assert abs(res) <= 1e-12


def test_entropy_smooth_run_admissible_and_refines(nl2, g_sin):
    eta = Entropy.smoothed_abs(1.2, 0.2)
    coarse, h = _smooth_run(128, 1e-3, nl2, g_sin)
    fine, _ = _smooth_run(512, 2.5e-4, nl2, g_sin)
    r_coarse = entropy_residual(coarse, nl2, g_sin, h, eta, smooth_phi)
    r_fine = entropy_residual(fine, nl2, g_sin, h, eta, smooth_phi)
    assert r_coarse <= 1e-2 and r_fine <= 1e-2
    assert abs(r_fine) < abs(r_coarse)


def test_entropy_flux_derivative(nl2):
    eta = Entropy.smoothed_abs(0.5, 0.2)
    u = np.linspace(-1, 2, 61)
    hstep = 1e-5
    dq = (eta.flux(nl2.A, u + hstep) - eta.flux(nl2.A, u - hstep)) / (2 * hstep)
    np.testing.assert_allclose(dq, eta.d_eta(u) * nl2.dA(u), atol=2 * hstep)
    assert eta.flux(nl2.A, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-14)


# --- approximation study -----------------------------------------------------

def test_cauchy_trivial(nl2):
    grid = PeriodicGrid(1, 32)
    rows = approximation_cauchy_study(nl2, NoiseFamily.zero(K=2), Field.constant(grid, 0.6),
                                      Control.zeros(1, 0.1, 1), (4, 8, 16), SolverConfig(dt=0.01))
    assert all(d == pytest.approx(0.0, abs=1e-14) for _, _, d in rows)


def test_cauchy_decreasing_and_sup_over_controls(nl2, g_sin, bump128, cfg):
    T = 0.5
    base = approximation_cauchy_study(nl2, g_sin, bump128, Control.zeros(1, T, 10),
                                      (4, 8, 16, 32), cfg)
    d = [r[2] for r in base]
    assert d[0] > d[1] > d[2] > 0
    controls = [Control.random(s, 1, T, 10, energy=0.5) for s in (1, 2, 3)]
    sup = max(approximation_cauchy_study(nl2, g_sin, bump128, h, (16, 32, 64), cfg)[0][2]
              for h in controls)
    assert sup < 2 * d[2]


def test_cauchy_rejects_short_list(nl2, g_sin, bump128, cfg):
    with pytest.raises(ValueError):
        approximation_cauchy_study(nl2, g_sin, bump128, Control.zeros(1, 0.1, 1), (4, 8), cfg)
