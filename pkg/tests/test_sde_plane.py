"""Solver exactness, mesh order, derivative fields, and reweighting checks."""

import math

import numpy as np
import pytest

from sheetsde.brownian_sheet import (
    cameron_martin_shift,
    coarsen,
    derive_seed,
    sample,
    values,
)
from sheetsde.plane_geometry import uniform_grid
from sheetsde.sde_plane import (
    DoleansFactor,
    MissingJacobianError,
    NonConvergenceError,
    SolutionField,
    constant_drift,
    doleans_exponential,
    euler_weak_expectation,
    flow_derivative,
    girsanov_weak_expectation,
    malliavin_series,
    malliavin_solve,
    sign_drift,
    solve_euler,
    solve_picard,
    tanh_drift,
    zero_drift,
)


class TestDriftFields:
    def test_zero(self):
        d = zero_drift(2)
        x = np.ones((3, 2))
        assert np.all(d.eval(0.5, 0.5, x) == 0.0)
        assert np.all(d.jacobian(0.5, 0.5, x) == 0.0)
        assert d.sup_norm == 0.0

    def test_constant_broadcast(self):
        d = constant_drift(0.7, dim=3)
        x = np.zeros((4, 3))
        out = d.eval(0.0, 0.0, x)
        assert out.shape == (4, 3)
        assert np.all(out == 0.7)
        assert d.sup_norm == pytest.approx(0.7 * math.sqrt(3.0))

    def test_sign_has_no_jacobian(self):
        d = sign_drift()
        assert np.all(d.eval(0.0, 0.0, np.array([[-2.0], [3.0]])) == [[-1.0], [1.0]])
        with pytest.raises(MissingJacobianError):
            d.require_jacobian()

    def test_tanh_jacobian_matches_fd(self):
        d = tanh_drift(amplitude=0.8, rate=1.3, dim=2)
        x = np.array([[0.2, -0.5], [1.1, 0.05]])
        h = 1e-6
        jac = d.jacobian(0.1, 0.2, x)
        for c in range(2):
            e = np.zeros(2)
            e[c] = h
            fd = (d.eval(0.1, 0.2, x + e) - d.eval(0.1, 0.2, x - e)) / (2 * h)
            assert np.max(np.abs(jac[..., :, c] - fd)) <= 1e-8

    def test_tanh_bounded(self):
        d = tanh_drift(amplitude=0.8, rate=2.0, dim=1)
        x = np.linspace(-50, 50, 101)[:, None]
        assert np.max(np.linalg.norm(d.eval(0, 0, x), axis=-1)) <= d.sup_norm + 1e-15


class TestSolverExactness:
    def test_zero_drift_is_shifted_sheet(self):
        grid = uniform_grid(12, 9, 1.0, 1.5)
        sheet = sample(grid, dim=1, seed=4)
        sol = solve_euler(grid, zero_drift(1), 0.3, sheet)
        want = 0.3 + values(sheet)
        assert np.max(np.abs(sol.values - want)) <= 1e-13
        assert np.all(sol.values[0, :, :] == 0.3)
        assert np.all(sol.values[:, 0, :] == 0.3)

    def test_constant_drift_closed_form(self):
        # the corner sum telescopes: X(s_i, t_j) = x0 + c s_i t_j + W(s_i, t_j)
        grid = uniform_grid(7, 11, 1.3, 0.8)
        sheet = sample(grid, dim=1, seed=9)
        c = -0.6
        sol = solve_euler(grid, constant_drift(c), 0.1, sheet)
        st = np.outer(grid.s_knots, grid.t_knots)[:, :, None]
        want = 0.1 + c * st + values(sheet)
        assert np.max(np.abs(sol.values - want)) <= 1e-12

    def test_dim_two_shapes(self):
        grid = uniform_grid(5, 6, 1.0, 1.0)
        sheet = sample(grid, dim=2, seed=1)
        sol = solve_euler(grid, tanh_drift(1.0, 1.0, 2), [0.1, -0.2], sheet)
        assert sol.values.shape == (6, 7, 2)
        assert sol.dim == 2
        assert np.all(sol.values[0] == [0.1, -0.2])

    def test_discontinuous_drift_runs(self):
        grid = uniform_grid(16, 16, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=2)
        sol = solve_euler(grid, sign_drift(), 0.0, sheet)
        assert np.all(np.isfinite(sol.values))
        assert np.max(np.abs(sol.values - values(sheet))) <= grid.s_max * grid.t_max


class TestPicard:
    def test_zero_drift_single_sweep(self):
        grid = uniform_grid(8, 8, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=5)
        sol, sweeps = solve_picard(grid, zero_drift(1), 0.2, sheet)
        assert sweeps == 1
        assert np.max(np.abs(sol.values - (0.2 + values(sheet)))) == 0.0

    def test_initial_guess_irrelevant(self):
        grid = uniform_grid(10, 10, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=6)
        drift = tanh_drift(0.9, 1.1, 1)
        tol = 1e-11
        a, _ = solve_picard(grid, drift, 0.1, sheet, tol=tol)
        w = values(sheet)
        cold = SolutionField(grid, np.array([0.1]), np.full_like(w, 0.1))
        b, _ = solve_picard(grid, drift, 0.1, sheet, tol=tol, initial=cold)
        assert np.max(np.abs(a.values - b.values)) <= 2.0 * tol

    def test_initial_shape_guard(self):
        grid = uniform_grid(4, 4, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=0)
        bad = SolutionField(grid, np.array([0.0]), np.zeros((3, 3, 1)))
        with pytest.raises(ValueError):
            solve_picard(grid, zero_drift(1), 0.0, sheet, initial=bad)

    def test_non_convergence_raises(self):
        grid = uniform_grid(6, 6, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=7)
        with pytest.raises(NonConvergenceError):
            solve_picard(grid, tanh_drift(1.0, 1.0, 1), 0.0, sheet, tol=1e-30, max_iter=4)

    def test_matches_euler_at_first_order(self):
        # the two schemes read the drift at opposite cell corners; their gap
        # vanishes with the mesh
        fine = sample(uniform_grid(64, 64, 1.0, 1.0), dim=1, seed=23)
        drift = tanh_drift(0.8, 1.3, 1)
        gaps = []
        for factor in (8, 2):
            sheet = coarsen(fine, factor)
            grid = sheet.grid
            e = solve_euler(grid, drift, 0.1, sheet)
            p, _ = solve_picard(grid, drift, 0.1, sheet)
            gaps.append(float(np.max(np.abs(e.values - p.values))))
        assert gaps[1] < 0.45 * gaps[0]


class TestMeshOrder:
    def test_scheme_gap_slope(self):
        fine = sample(uniform_grid(64, 64, 1.0, 1.0), dim=1, seed=23)
        drift = tanh_drift(0.8, 1.3, 1)
        hs, errs = [], []
        for factor in (4, 2, 1):
            sheet = coarsen(fine, factor)
            grid = sheet.grid
            e = solve_euler(grid, drift, 0.1, sheet)
            p, _ = solve_picard(grid, drift, 0.1, sheet)
            hs.append(1.0 / grid.n_s)
            errs.append(float(np.max(np.abs(e.values - p.values))))
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        assert slope >= 0.7


class TestMalliavin:
    def test_zero_drift_identity_field(self):
        grid = uniform_grid(6, 5, 1.0, 1.0)
        sheet = sample(grid, dim=2, seed=3)
        sol = solve_euler(grid, zero_drift(2), 0.0, sheet)
        field = malliavin_solve(grid, zero_drift(2), sol, base=(2, 3))
        eye = np.eye(2)
        for i in range(7):
            for j in range(6):
                want = eye if (i >= 2 and j >= 3) else np.zeros((2, 2))
                assert np.array_equal(field.values[i, j], want), (i, j)

    def test_base_guard(self):
        grid = uniform_grid(4, 4, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=0)
        sol = solve_euler(grid, zero_drift(1), 0.0, sheet)
        with pytest.raises(ValueError):
            malliavin_solve(grid, zero_drift(1), sol, base=(5, 0))

    def test_requires_jacobian(self):
        grid = uniform_grid(4, 4, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=0)
        sol = solve_euler(grid, sign_drift(), 0.0, sheet)
        with pytest.raises(MissingJacobianError):
            malliavin_solve(grid, sign_drift(), sol)

    def test_directional_derivative_identity(self):
        # sum of per-cell derivative kernels against the shift density equals
        # the finite-difference Gateaux derivative of the solution map
        grid = uniform_grid(10, 10, 1.0, 1.0)
        drift = tanh_drift(0.9, 1.1, 1)
        sheet = sample(grid, dim=1, seed=3)
        sol = solve_euler(grid, drift, 0.2, sheet)
        s = np.asarray(grid.s_knots)
        t = np.asarray(grid.t_knots)
        hdot = (np.cos(2.1 * s[1:])[:, None] * np.sin(1.7 * t[1:] + 0.3)[None, :])[:, :, None]
        eps = 1e-4
        up = solve_euler(grid, drift, 0.2, cameron_martin_shift(sheet, hdot, eps))
        dn = solve_euler(grid, drift, 0.2, cameron_martin_shift(sheet, hdot, -eps))
        fd = float((up.values[-1, -1, 0] - dn.values[-1, -1, 0]) / (2.0 * eps))
        areas = np.outer(grid.s_gaps(), grid.t_gaps())
        predicted = 0.0
        for a in range(grid.n_s):
            for b in range(grid.n_t):
                deriv = malliavin_solve(grid, drift, sol, base=(a + 1, b + 1))
                predicted += float(deriv.values[-1, -1, 0, 0]) * hdot[a, b, 0] * areas[a, b]
        assert abs(predicted - fd) <= 1e-2 * abs(fd)

    def test_series_matches_recursion(self):
        grid = uniform_grid(8, 8, 1.0, 1.0)
        drift = tanh_drift(0.8, 1.2, 1)
        sheet = sample(grid, dim=1, seed=11)
        sol = solve_euler(grid, drift, 0.1, sheet)
        exact = malliavin_solve(grid, drift, sol, base=(1, 2))
        approx, tail = malliavin_series(grid, drift, sol, base=(1, 2), depth=8)
        assert tail <= 1e-10
        assert np.max(np.abs(approx.values - exact.values)) <= tail + 1e-10

    def test_series_tail_decreases(self):
        grid = uniform_grid(6, 6, 1.0, 1.0)
        drift = tanh_drift(1.0, 1.0, 1)
        sheet = sample(grid, dim=1, seed=1)
        sol = solve_euler(grid, drift, 0.0, sheet)
        _, t2 = malliavin_series(grid, drift, sol, depth=2)
        _, t5 = malliavin_series(grid, drift, sol, depth=5)
        assert t5 < t2


class TestFlowDerivative:
    def test_zero_drift_identity(self):
        grid = uniform_grid(5, 5, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=2)
        sol = solve_euler(grid, zero_drift(1), 0.4, sheet)
        field = flow_derivative(grid, zero_drift(1), sol)
        assert np.all(field.values == 1.0)

    def test_matches_fd_in_x0(self):
        grid = uniform_grid(12, 12, 1.0, 1.0)
        drift = tanh_drift(0.9, 1.1, 1)
        sheet = sample(grid, dim=1, seed=8)
        sol = solve_euler(grid, drift, 0.3, sheet)
        field = flow_derivative(grid, drift, sol)
        h = 1e-5
        up = solve_euler(grid, drift, 0.3 + h, sheet)
        dn = solve_euler(grid, drift, 0.3 - h, sheet)
        fd = (up.values[-1, -1, 0] - dn.values[-1, -1, 0]) / (2.0 * h)
        assert field.values[-1, -1, 0, 0] == pytest.approx(fd, rel=1e-5)

    def test_mesh_stability(self):
        fine = sample(uniform_grid(32, 32, 1.0, 1.0), dim=1, seed=13)
        drift = tanh_drift(0.9, 1.1, 1)
        vals = []
        for factor in (2, 1):
            sheet = coarsen(fine, factor)
            grid = sheet.grid
            sol = solve_euler(grid, drift, 0.2, sheet)
            vals.append(float(flow_derivative(grid, drift, sol).values[-1, -1, 0, 0]))
        assert 0.8 <= vals[1] / vals[0] <= 1.25


class TestDoleans:
    def test_zero_drift_is_one(self):
        grid = uniform_grid(6, 6, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=0)
        m = doleans_exponential(zero_drift(1), sheet, 0.0 + values(sheet))
        assert m.value == 1.0
        assert m.log_value == 0.0

    def test_positive_guard(self):
        with pytest.raises(ValueError):
            DoleansFactor(0.0, -math.inf)

    def test_constant_drift_log_moments(self):
        # frozen constant drift gives log M = c W(smax, tmax) - c^2 A / 2,
        # a Gaussian with mean -c^2 A / 2 and variance c^2 A
        grid = uniform_grid(8, 8, 1.0, 1.0)
        drift = constant_drift(0.7)
        c2a = 0.49
        n = 4000
        logs = np.empty(n)
        for k in range(n):
            sheet = sample(grid, dim=1, seed=derive_seed(17, k))
            logs[k] = doleans_exponential(drift, sheet, values(sheet)).log_value
        mean_se = logs.std(ddof=1) / math.sqrt(n)
        assert abs(logs.mean() + 0.5 * c2a) <= 4.0 * mean_se
        var = logs.var(ddof=1)
        var_se = var * math.sqrt(2.0 / (n - 1))
        assert abs(var - c2a) <= 4.0 * var_se
        weights = np.exp(logs)
        w_se = weights.std(ddof=1) / math.sqrt(n)
        assert abs(weights.mean() - 1.0) <= 4.0 * w_se


class TestWeakExpectations:
    PHI = staticmethod(lambda x: np.tanh(x[..., 0]))

    def test_zero_drift_routes_agree(self):
        grid = uniform_grid(8, 8, 1.0, 1.0)
        g = girsanov_weak_expectation(self.PHI, zero_drift(1), 0.1, grid, 4000, 5)
        e = euler_weak_expectation(self.PHI, zero_drift(1), 0.1, grid, 4000, 5)
        assert g.mean == pytest.approx(e.mean, abs=1e-12)
        assert g.std_error == pytest.approx(e.std_error, abs=1e-12)

    def test_reproducible(self):
        grid = uniform_grid(6, 6, 1.0, 1.0)
        a = girsanov_weak_expectation(self.PHI, tanh_drift(1, 1, 1), 0.0, grid, 2000, 9)
        b = girsanov_weak_expectation(self.PHI, tanh_drift(1, 1, 1), 0.0, grid, 2000, 9)
        assert a == b

    def test_smooth_drift_two_estimators(self):
        grid = uniform_grid(12, 12, 1.0, 1.0)
        drift = tanh_drift(1.0, 1.0, 1)
        g = girsanov_weak_expectation(self.PHI, drift, 0.0, grid, 20_000, 3)
        e = euler_weak_expectation(self.PHI, drift, 0.0, grid, 20_000, derive_seed(3, 0xE0))
        gap = abs(g.mean - e.mean)
        assert gap <= 4.0 * math.hypot(g.std_error, e.std_error)

    def test_weight_mean_one_nonsmooth(self):
        grid = uniform_grid(12, 12, 1.0, 1.0)
        ones = lambda x: np.ones(x.shape[:-1])
        w = girsanov_weak_expectation(ones, sign_drift(), 0.0, grid, 20_000, 21)
        assert abs(w.mean - 1.0) <= 4.0 * w.std_error
