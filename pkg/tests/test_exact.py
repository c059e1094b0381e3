import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from striplab.contact import StructureField, eval_Jhat, eval_J_simple
from striplab.errors import ChartExceeded, NonMonotoneProfile, OutsideDomain
from striplab.exact import (
    Sigmoid,
    cr_residual,
    energy_dlambda,
    energy_hofer,
    family_separation_check,
    halfdisk_polar_grid,
    halfdisk_solution,
    second_derivative_bound,
    sigmoid_dictionary,
    strip_end_grid,
    strip_grid,
    strip_solution,
    strip_to_halfdisk,
    surface_flattened,
)
from striplab.grid import FieldGrid

EPS = 0.2


def halfdisk_derivatives(eps, s, t):
    """Hand-differentiated ∂s v and ∂t v of the half-disk solution."""
    e2 = eps * eps
    ds = np.array([0.5 * e2 * s, eps, 0.0, 0.5 * e2 * t])
    dt = np.array([0.5 * e2 * t, 0.0, -eps, 0.5 * e2 * s])
    return ds, dt


class TestClosedForms:
    def test_map_examples(self):
        assert strip_to_halfdisk(0.0, 0.0) == 0
        assert strip_to_halfdisk(0.0, 1.0) == pytest.approx(1j, abs=1e-15)
        assert abs(strip_to_halfdisk(50.0, 0.5) - 1) < 1e-15

    def test_halfdisk_examples(self):
        assert halfdisk_solution(EPS, 0.0, 0.0) == pytest.approx((-0.01, 0, 0, 0), abs=1e-17)
        assert halfdisk_solution(EPS, 1.0, 0.0) == pytest.approx((0, 0.2, 0, 0), abs=1e-17)
        assert halfdisk_solution(EPS, 0.0, 1.0) == pytest.approx((0, 0, -0.2, 0), abs=1e-17)

    def test_outside_domain(self):
        with pytest.raises(OutsideDomain):
            halfdisk_solution(EPS, 0.9, 0.9)
        with pytest.raises(OutsideDomain):
            halfdisk_solution(EPS, 0.0, -0.5)

    def test_strip_at_centre(self):
        # z = tanh(0) = 0
        assert strip_solution(EPS, 0.0, 0.0) == pytest.approx((-0.01, 0, 0, 0), abs=1e-17)

    def test_strip_far_end_is_finite(self):
        v = strip_solution(EPS, 1e3, 0.5)
        assert np.all(np.isfinite(v))
        assert v == pytest.approx((0, EPS, 0, 0), abs=1e-15)

    @given(s=st.floats(-8, 8), t=st.floats(0, 1))
    def test_strip_is_halfdisk_after_map(self, s, t):
        z = strip_to_halfdisk(s, t)
        expected = halfdisk_solution(EPS, z.real, min(z.imag, 1.0), tol=1e-9)
        np.testing.assert_allclose(strip_solution(EPS, s, t), expected, atol=1e-14)

    @given(s=st.floats(-1, 1), t=st.floats(0, 1), eps=st.floats(-0.5, 0.5))
    def test_halfdisk_is_holomorphic(self, s, t, eps):
        ds, dt = halfdisk_derivatives(eps, s, t)
        v = np.array(halfdisk_solution(eps, s, t, tol=np.inf))
        np.testing.assert_allclose(ds + eval_J_simple(v) @ dt, 0.0, atol=1e-15)

    @given(s=st.floats(-1, 1), eps=st.floats(-0.5, 0.5))
    def test_halfdisk_boundary_conditions(self, s, eps):
        # real segment on the knot (x = y = 0), arc in {τ = 0, y = -θx/2}
        v = halfdisk_solution(eps, s, 0.0)
        assert v.x == 0 and v.y == 0
        phi = np.pi * (s + 1) / 2
        w = halfdisk_solution(eps, np.cos(phi), np.sin(phi), tol=1e-12)
        assert abs(w.tau) < 1e-15 and abs(w.y + w.theta * w.x / 2) < 1e-15


class TestResidual:
    def test_constant_grid(self):
        g = FieldGrid.from_function(lambda S, T: np.zeros(S.shape + (4,)), (0, 1), 9, 5)
        rep = cr_residual(g)
        assert rep.max_norm == 0.0 and rep.bc_max == 0.0

    def test_order_two(self):
        coarse = cr_residual(strip_grid(EPS, (-5, 5), 200, 20)).max_norm
        fine = cr_residual(strip_grid(EPS, (-5, 5), 399, 39)).max_norm
        assert 3.5 < coarse / fine < 4.5

    def test_bounded_by_curvature(self):
        g = strip_grid(EPS, (-5, 5), 200, 20)
        rep = cr_residual(g)
        h = max(g.h_s, g.h_t)
        assert rep.max_norm <= 5 * h * h * second_derivative_bound(g)
        assert rep.bc_max <= 1e-13

    def test_flattened_residual(self):
        g = strip_end_grid(EPS, (3, 8), 120, 16)
        f = StructureField.strip_end(EPS)
        rep = cr_residual(g, J=lambda v: eval_Jhat(v, f), surface=surface_flattened)
        assert rep.bc_max < 1e-15
        assert rep.max_norm < 1e-3

    def test_broken_boundary_detected(self):
        g = strip_grid(EPS, (-5, 5), 50, 10)
        v = g.values.copy()
        v[:, 0, 2] += 1e-3
        assert cr_residual(g.with_values(v)).bc_t0_x == pytest.approx(1e-3)

    def test_chart_bound(self):
        with pytest.raises(ChartExceeded):
            cr_residual(strip_grid(EPS, (-5, 5), 50, 10), chart_bound=0.01)


class TestEnergy:
    def test_halfdisk_energy(self):
        e = energy_dlambda(halfdisk_polar_grid(EPS, 400, 400))
        assert abs(e - EPS**2 * np.pi / 2) < 1e-6

    def test_energy_converges_at_second_order(self):
        exact = EPS**2 * np.pi / 2
        e1 = abs(energy_dlambda(halfdisk_polar_grid(EPS, 51, 51)) - exact)
        e2 = abs(energy_dlambda(halfdisk_polar_grid(EPS, 101, 101)) - exact)
        assert 3.5 < e1 / e2 < 4.5

    def test_strip_energy_close_to_halfdisk(self):
        exact = EPS**2 * np.pi / 2
        coarse = abs(energy_dlambda(strip_grid(EPS, (-12, 12), 961, 41), order=4) - exact)
        fine = abs(energy_dlambda(strip_grid(EPS, (-12, 12), 961, 81), order=4) - exact)
        assert coarse < 1e-3 * exact
        assert 3.5 < coarse / fine < 4.5

    def test_hofer_bound_dominates_dlambda(self):
        g = halfdisk_polar_grid(EPS, 101, 101)
        tau = g.values[..., 0]
        budget = energy_hofer(g, sigmoid_dictionary(tau.min(), tau.max()))
        assert budget.hofer_energy_lb >= budget.dlambda_energy
        assert len(budget.values) == 28
        # φ ≡ 1 reproduces the dλ energy
        assert budget.values[0] == pytest.approx(budget.dlambda_energy, rel=1e-12)

    def test_non_monotone(self):
        g = halfdisk_polar_grid(EPS, 21, 21)
        with pytest.raises(NonMonotoneProfile):
            energy_hofer(g, [Sigmoid(0.0, -1.0)])

    def test_plain_callable_is_differentiated(self):
        g = halfdisk_polar_grid(EPS, 41, 41)
        phi = Sigmoid(0.0, 0.01)
        plain = lambda tau: phi(tau)
        a = energy_hofer(g, [phi]).values[0]
        b = energy_hofer(g, [plain]).values[0]
        assert a == pytest.approx(b, rel=1e-6)


class TestSeparation:
    def test_three_members(self):
        rep = family_separation_check([0.1, 0.15, 0.2])
        assert rep.passed
        assert rep.min_separation > 0
        assert rep.sup_norms == sorted(rep.sup_norms)
        assert rep.linear_constant < 2

    def test_rejects_mixed_sign(self):
        with pytest.raises(ValueError):
            family_separation_check([0.1, -0.1])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            family_separation_check([0.1, 0.1])

    def test_strip_end_converges_to_origin(self):
        g = strip_end_grid(EPS, (3, 10), 50, 9)
        sup = np.abs(g.values).max(axis=(1, 2))
        assert np.all(np.diff(sup) < 0)
        rates = np.diff(np.log(sup)) / g.h_s
        assert rates[-1] == pytest.approx(-np.pi / 2, abs=0.01)


def test_grid_csv_round_trip(tmp_path):
    g = strip_grid(EPS, (-1, 1), 7, 4)
    path = tmp_path / "g.csv"
    g.to_csv(path)
    back = FieldGrid.from_csv(path)
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.s, g.s)
