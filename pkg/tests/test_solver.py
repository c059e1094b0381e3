import numpy as np
import pytest

from striplab.contact import StructureField
from striplab.errors import ChartExceeded, MaxIterationsExceeded, SingularNormalEquations
from striplab.exact import strip_end_grid
from striplab.solver import (
    SolverConfig,
    assemble_jacobian,
    assemble_residual,
    boundary_violation,
    gauss_newton_solve,
)

EPS = 0.2


def oracle(cfg):
    return strip_end_grid(EPS, cfg.s_range, cfg.n_s, cfg.n_t)


def noisy(grid, seed=0, amp=1e-2):
    rng = np.random.default_rng(seed)
    v = grid.values * (1 + amp * rng.standard_normal(grid.values.shape))
    return grid.with_values(v)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"residual_tol": 0.0},
            {"n_s": 4},
            {"step_damping": 0.0},
            {"step_damping": 1.5},
            {"boundary_weight": -1.0},
            {"end_condition": "periodic"},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.n_s, cfg.n_t, cfg.max_iterations, cfg.residual_tol) == (120, 16, 25, 1e-8)


class TestAssembly:
    def test_square_with_dirichlet_ends(self, strip_field):
        cfg = SolverConfig(n_s=20, n_t=10)
        Jm = assemble_jacobian(oracle(cfg), strip_field, cfg)
        assert Jm.shape == (20 * 10 * 4, 20 * 10 * 4)

    def test_zero_field_has_zero_residual(self, strip_field):
        cfg = SolverConfig(n_s=10, n_t=8)
        g = oracle(cfg).with_values(np.zeros((10, 8, 4)))
        r = assemble_residual(g, strip_field, cfg, dirichlet=np.zeros((10, 8, 4)))
        assert np.abs(r).max() == 0.0

    def test_oracle_residual_is_second_order(self, strip_field):
        def cell_residual(n_s, n_t):
            cfg = SolverConfig(n_s=n_s, n_t=n_t, boundary_weight=0.0)
            g = oracle(cfg)
            return np.abs(assemble_residual(g, strip_field, cfg)).max()

        ratio = cell_residual(41, 11) / cell_residual(81, 21)
        assert 3.5 < ratio < 4.5

    def test_boundary_rows_vanish_on_oracle(self, strip_field):
        cfg = SolverConfig(n_s=20, n_t=10)
        g = oracle(cfg)
        r = assemble_residual(g, strip_field, cfg, dirichlet=g.values)
        n_cells = 19 * 9 * 4
        assert np.abs(r[n_cells:]).max() < 1e-15
        assert boundary_violation(g) < 1e-15

    def test_jacobian_matches_finite_differences(self, strip_field):
        cfg = SolverConfig(n_s=12, n_t=8)
        g = noisy(oracle(cfg))
        d = np.random.default_rng(1).standard_normal(g.values.shape)
        h = 1e-7
        rp = assemble_residual(g.with_values(g.values + h * d), strip_field, cfg, g.values)
        rm = assemble_residual(g.with_values(g.values - h * d), strip_field, cfg, g.values)
        fd = (rp - rm) / (2 * h)
        an = assemble_jacobian(g, strip_field, cfg) @ d.ravel()
        assert np.abs(fd - an).max() < 1e-6 * np.abs(an).max()

    def test_chart_exceeded(self, strip_field):
        cfg = SolverConfig(n_s=10, n_t=8)
        g = oracle(cfg)
        v = g.values.copy()
        v[3, 3, 2] = 0.5
        with pytest.raises(ChartExceeded):
            assemble_residual(g.with_values(v), strip_field, cfg, g.values)

    def test_dirichlet_needs_data(self, strip_field):
        cfg = SolverConfig(n_s=10, n_t=8)
        with pytest.raises(ValueError):
            assemble_residual(oracle(cfg), strip_field, cfg)


class TestGaussNewton:
    def test_from_oracle(self, strip_field):
        cfg = SolverConfig()
        g = oracle(cfg)
        sol, hist = gauss_newton_solve(g, strip_field, cfg, dirichlet=g.values)
        assert len(hist) - 1 <= 2
        assert hist[-1]["residual"] <= 1e-8
        assert np.abs(sol.values - g.values).max() <= 1e-5

    def test_from_noise_small_grid(self, strip_field):
        cfg = SolverConfig(n_s=40, n_t=10)
        g = oracle(cfg)
        sol, hist = gauss_newton_solve(noisy(g), strip_field, cfg, dirichlet=g.values)
        res = [h["residual"] for h in hist]
        assert all(b < a for a, b in zip(res, res[1:]))
        assert res[-1] <= 1e-8
        assert boundary_violation(sol) < 1e-9

    def test_discretisation_error_shrinks(self, strip_field):
        errs = []
        for n_s, n_t in ((30, 8), (60, 15)):
            cfg = SolverConfig(n_s=n_s, n_t=n_t)
            g = oracle(cfg)
            sol, _ = gauss_newton_solve(g, strip_field, cfg, dirichlet=g.values)
            errs.append(np.abs(sol.values - g.values).max())
        assert errs[1] < errs[0] / 2

    def test_max_iterations(self, strip_field):
        cfg = SolverConfig(n_s=20, n_t=8, max_iterations=1, residual_tol=1e-14)
        g = oracle(cfg)
        with pytest.raises(MaxIterationsExceeded) as info:
            gauss_newton_solve(noisy(g), strip_field, cfg, dirichlet=g.values)
        assert info.value.grid is not None
        assert len(info.value.log) == 2

    def test_free_ends_are_underdetermined(self, strip_field):
        cfg = SolverConfig(n_s=8, n_t=8, end_condition="free")
        with pytest.raises(SingularNormalEquations):
            gauss_newton_solve(noisy(oracle(cfg)), strip_field, cfg)

    def test_sparse_and_dense_paths_agree(self, strip_field):
        base = SolverConfig(n_s=24, n_t=8)
        g = oracle(base)
        start = noisy(g, seed=3)
        a, _ = gauss_newton_solve(start, strip_field, base, dirichlet=g.values)
        sparse = SolverConfig(n_s=24, n_t=8, dense_limit=0)
        b, _ = gauss_newton_solve(start, strip_field, sparse, dirichlet=g.values)
        assert np.abs(a.values - b.values).max() < 1e-9
