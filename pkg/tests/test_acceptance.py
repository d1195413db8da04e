"""End-to-end acceptance runs, one test per criterion.

Each test exercises the stated configuration at the stated budget and
records a single PASS/FAIL line via the terminal-summary hook.  Budgets are
wall-clock ceilings; the statistical tolerances are fixed in-line.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import scipy.integrate

from conftest import record_criterion
from sheetsde.brownian_sheet import coarsen, derive_seed, sample, values
from sheetsde.cli_runner import ExperimentConfig, run
from sheetsde.estimate_lab import bump_factor, verify_identity
from sheetsde.ibp_engine import PermutationSpec, crossing_set, expand, uniform_spec
from sheetsde.integrators import simplex_dirichlet_oracle, simplex_singular_integral
from sheetsde.kernels import DEFAULT_C0, KernelCell, abs_gradient_l1, gradient_component
from sheetsde.plane_geometry import Cell, geometric_grid, uniform_grid
from sheetsde.sde_plane import (
    constant_drift,
    euler_weak_expectation,
    girsanov_weak_expectation,
    malliavin_solve,
    sign_drift,
    solve_euler,
    solve_picard,
    tanh_drift,
    zero_drift,
)
from sheetsde.shuffle_combinatorics import (
    RegionDescriptor,
    enumerate_block_increasing,
    partition_report,
    product_identity_check,
)

BUMP = bump_factor(scale=1.0, width=2.5, center=0.25)


@contextmanager
def criterion(num: int, label: str, budget_s: float):
    state = {"ok": False, "detail": "no result"}
    start = time.perf_counter()
    try:
        yield state
    finally:
        elapsed = time.perf_counter() - start
        status = "PASS" if (state["ok"] and elapsed < budget_s) else "FAIL"
        record_criterion(
            f"criterion {num:2d} {status} [{elapsed:6.1f}s/{budget_s:.0f}s] {label}: {state['detail']}"
        )
    assert state["ok"], f"criterion {num} ({label}): {state['detail']}"
    assert elapsed < budget_s, f"criterion {num} over budget: {elapsed:.1f}s >= {budget_s}s"


def _b_cells(term) -> list:
    return sorted((c.row, c.col) for c in term.b_cells)


def test_criterion_01_golden_term_lists():
    with criterion(1, "golden expansions for n=3", 1.0) as state:
        golden_213 = [
            ((1, 2), -1, [(1, 2), (2, 1), (3, 3)]),
            ((1,), 1, [(1, 2), (2, 3), (3, 1)]),
            ((2,), 1, [(1, 3), (2, 1), (3, 2)]),
            ((), -1, [(1, 3), (2, 2), (3, 1)]),
        ]
        terms = expand(uniform_spec((2, 1, 3)))
        got = [(tuple(t.K), t.sign, _b_cells(t)) for t in terms]
        ok_213 = got == golden_213
        terms_312 = expand(uniform_spec((3, 1, 2)))
        ok_312 = len(terms_312) == 2
        state["ok"] = ok_213 and ok_312
        state["detail"] = (
            f"sigma=(2,1,3): {len(terms)} terms, signs "
            f"{tuple(t.sign for t in terms)}; sigma=(3,1,2): {len(terms_312)} terms"
        )


def test_criterion_02_selection_non_overlap_exhaustive():
    with criterion(2, "all n<=6, all sigma, all K", 60.0) as state:
        n_specs = 0
        n_terms = 0
        for n in range(1, 7):
            for sigma in itertools.permutations(range(1, n + 1)):
                spec = uniform_spec(sigma)
                terms = expand(spec)
                n_specs += 1
                n_terms += len(terms)
                assert len(terms) == 2 ** len(crossing_set(spec).members), sigma
                for term in terms:
                    rows = sorted(c.row for c in term.b_cells)
                    cols = {c.col for c in term.b_cells}
                    assert rows == list(range(1, n + 1)), (sigma, term.K)
                    assert len(cols) == n, (sigma, term.K)
        state["ok"] = True
        state["detail"] = f"{n_specs} schemes, {n_terms} terms, all column-disjoint"


def test_criterion_03_ibp_identity_quadrature_and_mc():
    with criterion(3, "direct vs expanded expectation", 600.0) as state:
        worst_rel = 0.0
        for make_grid in (uniform_grid, geometric_grid):
            grid = make_grid(2, 2, 0.25, 0.25)
            times = tuple(grid.s_knots[1:3])
            for sigma in ((1, 2), (2, 1)):
                spec = PermutationSpec(2, sigma, times, times)
                rep = verify_identity(spec, BUMP, method="quadrature", budget=30)
                assert rep.identity_ok and rep.bound_ok, (sigma, rep)
                worst_rel = max(worst_rel, rep.identity_gap / abs(rep.direct.mean))
        worst_se = 0.0
        for make_grid in (uniform_grid, geometric_grid):
            grid = make_grid(3, 3, 1.0, 1.0)
            times = tuple(grid.s_knots[1:4])
            for pos, sigma in enumerate(itertools.permutations((1, 2, 3))):
                spec = PermutationSpec(3, sigma, times, times)
                rep = verify_identity(spec, BUMP, method="mc", budget=1_000_000,
                                      seed=derive_seed(29, 10 * grid.n_s + pos))
                assert rep.identity_ok and rep.bound_ok, (sigma, rep)
                worst_se = max(worst_se, 4.0 * rep.identity_gap / rep.identity_tol)
        state["ok"] = True
        state["detail"] = (
            f"n=2 quadrature(30 nodes) worst rel gap {worst_rel:.2e} <= 1e-6; "
            f"n=3 MC(1e6) worst gap {worst_se:.2f} SE <= 4"
        )


def test_criterion_04_product_bound_random_sweep():
    with criterion(4, "bound domination on 50 random configs", 600.0) as state:
        rec = run(ExperimentConfig("verify-bound", {
            "trials": 50, "n_set": "2,3", "samples": 100_000,
            "allowed_failures": 1, "seed": 0,
        }))
        n_bad = rec.outputs["n_violations"]
        state["ok"] = rec.passed is True and n_bad <= 1
        state["detail"] = f"{50 - n_bad}/50 configs dominated (|est|+4SE <= bound)"


def test_criterion_05_gradient_l1_oracle():
    with criterion(5, "kernel gradient L1 closed form", 1.0) as state:
        worst = 0.0
        for v in (1e-4, 1e-2, 1.0, 1e2, 1e4):
            closed = abs_gradient_l1(KernelCell(v), 0)
            half, _ = scipy.integrate.quad(
                lambda z: abs(gradient_component(KernelCell(v), z, 0)),
                0.0, 20.0 * math.sqrt(v), epsabs=1e-15, epsrel=1e-13, limit=200,
            )
            worst = max(worst, abs(closed - 2.0 * half) / max(1.0, closed))
            assert closed <= DEFAULT_C0 / math.sqrt(v) + 1e-15
        state["ok"] = worst <= 1e-10
        state["detail"] = f"worst oracle gap {worst:.2e} <= 1e-10, bound 2*sqrt(2/pi) <= 2*sqrt(2)"


def test_criterion_06_shuffle_partition_and_identity():
    with criterion(6, "shuffle partition, cell-sum identity, counts", 300.0) as state:
        regions = [
            (RegionDescriptor("nabla", 1), 2),
            (RegionDescriptor("nabla", 2), 2),
            (RegionDescriptor("nabla", 1), 3),
            (RegionDescriptor("lambda", 1, 1, s_mid=0.5, t_mid=0.5), 2),
        ]
        for region, m in regions:
            rep = partition_report(region, m, 100_000, seed=5)
            assert rep.ok, (region.kind, m, rep)
            assert rep.uncovered == 0 and rep.multiply_covered == 0
        f1 = lambda s, t: 1.0 + 0.5 * np.sin(2 * np.pi * s) * np.cos(np.pi * t)
        f2 = lambda s, t: np.exp(-s * t)
        idrep = product_identity_check(2, [f1, f2], budget=1_000_000, seed=12)
        assert idrep.within(4.0), idrep
        for k in (1, 2, 3):
            fam = enumerate_block_increasing(4, k)
            assert len(fam.members) == fam.expected_count
            assert fam.expected_count <= 2 ** (9 * k)
        state["ok"] = True
        state["detail"] = (
            f"4 region families clean at 1e5 points; "
            f"cell-sum gap {idrep.gap_se:.2f} SE <= 4; m=4 counts within 2^(9k)"
        )


def test_criterion_07_simplex_gamma_formula():
    with criterion(7, "singular simplex integrals", 60.0) as state:
        closed1 = simplex_singular_integral(1, 0.0, 1.0)
        oracle1, _ = scipy.integrate.quad(
            lambda x: 1.0, 0.0, 1.0, weight="alg", wvar=(-0.5, -0.5), epsabs=1e-13,
        )
        gap1 = abs(closed1 - oracle1)
        assert gap1 <= 1e-10 and abs(closed1 - math.pi) <= 1e-12
        zs = []
        for n, want in ((2, 2.0 * math.pi), (3, math.pi ** 2)):
            closed = simplex_singular_integral(n, 0.0, 1.0)
            assert abs(closed - want) <= 1e-12
            est = simplex_dirichlet_oracle(n, 0.0, 1.0, 400_000, seed=n)
            zs.append(abs(closed - est.mean) / est.std_error)
            assert zs[-1] <= 4.0, (n, closed, est)
        state["ok"] = True
        state["detail"] = (
            f"n=1 quadrature gap {gap1:.1e} <= 1e-10; "
            f"n=2,3 Dirichlet z = {zs[0]:.2f}, {zs[1]:.2f} <= 4"
        )


def test_criterion_08_solver_exactness_and_mesh_order():
    with criterion(8, "solver exactness and mesh order", 120.0) as state:
        grid = uniform_grid(16, 16, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=6)
        free = solve_euler(grid, zero_drift(1), 0.25, sheet)
        err_zero = float(np.max(np.abs(free.values - (0.25 + values(sheet)))))
        assert err_zero == 0.0 or err_zero <= 1e-13
        c = 0.8
        const = solve_euler(grid, constant_drift(c), 0.1, sheet)
        st = np.outer(grid.s_knots, grid.t_knots)[:, :, None]
        err_const = float(np.max(np.abs(const.values - (0.1 + c * st + values(sheet)))))
        assert err_const <= 1e-12

        fine = sample(uniform_grid(128, 128, 1.0, 1.0), dim=1, seed=23)
        drift = tanh_drift(0.8, 1.3, 1)
        hs, errs = [], []
        for factor in (8, 4, 2, 1):
            piece = coarsen(fine, factor)
            g = piece.grid
            e = solve_euler(g, drift, 0.1, piece)
            p, _ = solve_picard(g, drift, 0.1, piece)
            hs.append(1.0 / g.n_s)
            errs.append(float(np.max(np.abs(e.values - p.values))))
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        state["ok"] = slope >= 0.9
        state["detail"] = (
            f"driftless error {err_zero:.1e}, constant-drift error {err_const:.1e}, "
            f"scheme-gap mesh order {slope:.3f} >= 0.9"
        )


def test_criterion_09_malliavin_identity_and_direction():
    with criterion(9, "derivative field checks", 120.0) as state:
        grid = uniform_grid(8, 8, 1.0, 1.0)
        sheet = sample(grid, dim=1, seed=1)
        sol = solve_euler(grid, zero_drift(1), 0.0, sheet)
        field = malliavin_solve(grid, zero_drift(1), sol, base=(3, 2))
        quadrant = field.values[3:, 2:, 0, 0]
        exact = (
            np.all(quadrant == 1.0)
            and np.all(field.values[:3, :, 0, 0] == 0.0)
            and np.all(field.values[:, :2, 0, 0] == 0.0)
        )
        assert exact
        rec = run(ExperimentConfig("malliavin-check", {
            "grid": "32x32", "seed": 3, "drift": "tanh",
            "amplitude": 0.9, "rate": 1.1, "eps": 1e-4, "tolerance": 1e-2,
        }))
        rel = rec.outputs["rel_err"]
        state["ok"] = exact and rec.passed is True and rel <= 1e-2
        state["detail"] = (
            f"driftless field exactly the indicator; 32x32 directional "
            f"derivative rel err {rel:.2e} <= 1e-2"
        )


def test_criterion_10_girsanov_weak_agreement():
    with criterion(10, "reweighted vs simulated weak solution", 600.0) as state:
        samples = 100_000
        phi = lambda x: np.tanh(x[..., 0])
        ones = lambda x: np.ones(x.shape[:-1])
        details = []
        ok = True
        for drift_idx, drift in enumerate((tanh_drift(1.0, 1.0, 1), sign_drift())):
            ext = {}
            for kind, fn, seed0 in (("girsanov", girsanov_weak_expectation, 101),
                                    ("euler", euler_weak_expectation, 202)):
                per_mesh = {}
                for mesh in (32, 64):
                    grid = uniform_grid(mesh, mesh, 1.0, 1.0)
                    per_mesh[mesh] = fn(phi, drift, 0.1, grid, samples,
                                        derive_seed(seed0, mesh))
                mean = 2.0 * per_mesh[64].mean - per_mesh[32].mean
                se = math.sqrt(4.0 * per_mesh[64].std_error ** 2
                               + per_mesh[32].std_error ** 2)
                ext[kind] = (mean, se)
            gap = abs(ext["girsanov"][0] - ext["euler"][0])
            combined = math.hypot(ext["girsanov"][1], ext["euler"][1])
            w = girsanov_weak_expectation(ones, drift, 0.1,
                                          uniform_grid(64, 64, 1.0, 1.0),
                                          samples, derive_seed(303, drift_idx))
            weight_z = abs(w.mean - 1.0) / w.std_error
            ok = ok and gap <= 4.0 * combined and weight_z <= 4.0
            details.append(f"{drift.name}: gap {gap / combined:.2f} SE, "
                           f"E[M] z {weight_z:.2f}")
        state["ok"] = ok
        state["detail"] = "; ".join(details) + " (all <= 4 SE, extrapolated 32->64)"
