import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from striplab.contact import StructureField
from striplab.decay import (
    KERNEL_DIRECTION,
    WeightedInner,
    alpha_trace,
    convexity_check,
    decay_fit,
    direction_error,
    inner_s,
    norm_s,
    project_kernel,
    snap_to_spectrum,
    theta_operator,
)
from striplab.errors import GridMismatch, GridTooShort, NoSpectrumMatch, SingularOmega, ZeroNorm
from striplab.exact import strip_end_grid
from striplab.fd import trapezoid_weights
from striplab.grid import FieldGrid
from striplab.spectral import analytic_eigenvector

HALF_PI = np.pi / 2
Q0 = -10.0


def mode_grid(lam, q0, kappa, s_range=(4, 10), n_s=97, n_t=33):
    """κ e^{λs} e(t): an exact solution of the constant-coefficient problem."""
    e = analytic_eigenvector(lam, q0)
    return FieldGrid.from_function(lambda S, T: kappa * np.exp(lam * S)[..., None] * e(T), s_range, n_s, n_t)


def zero_row_inner(n_t, f):
    return WeightedInner.from_values(np.zeros((n_t, 4)), f, 1.0 / (n_t - 1))


class TestInnerProduct:
    def test_identity_metric(self):
        w = zero_row_inner(11, StructureField.constant(0.0, C=1.0))
        np.testing.assert_allclose(w.G, np.broadcast_to(np.eye(4), (11, 4, 4)))
        g = np.zeros((11, 4))
        g[:, 0] = 1.0
        assert inner_s(w, g, g) == pytest.approx(1.0)

    def test_weighted_example(self):
        w = zero_row_inner(11, StructureField.constant(Q0, C=250.0))
        a = np.zeros((11, 4))
        a[:, 0] = 1.0
        b = np.zeros((11, 4))
        b[:, 1] = 1.0
        assert inner_s(w, a, a) == pytest.approx(250.0)
        assert inner_s(w, a, b) == pytest.approx(-10.0)
        assert norm_s(w, b) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        w = zero_row_inner(11, StructureField.constant(0.0))
        with pytest.raises(GridMismatch):
            inner_s(w, np.zeros((10, 4)), np.zeros((10, 4)))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_symmetric_positive_and_equivalent(self, seed):
        rng = np.random.default_rng(seed)
        g = strip_end_grid(0.2, (3, 6), 20, 17)
        w = WeightedInner.from_grid(g, StructureField.strip_end(0.2)).row(rng.integers(20))
        a, b = rng.normal(size=(2, 17, 4))
        assert inner_s(w, a, b) == pytest.approx(inner_s(w, b, a), rel=1e-12)
        assert inner_s(w, a, a) > 0
        l2 = np.sqrt(np.einsum("ti,ti,t->", a, a, w.weights))
        assert w.c0 * l2 <= norm_s(w, a) * (1 + 1e-12)
        assert norm_s(w, a) <= w.c1 * l2 * (1 + 1e-12)


class TestTheta:
    def test_vanishes_on_constant_rows(self):
        w = zero_row_inner(9, StructureField.constant(Q0))
        g = np.random.default_rng(0).normal(size=(9, 4))
        np.testing.assert_array_equal(theta_operator(w, g), 0.0)

    def test_singular(self):
        w = zero_row_inner(9, StructureField.constant(2.0, C=4.0))
        with pytest.raises(SingularOmega):
            theta_operator(w, np.ones((9, 4)))

    def test_needs_derivative(self):
        w = zero_row_inner(9, StructureField.constant(Q0))
        w = WeightedInner(w.Omega, w.M, w.weights)
        with pytest.raises(ValueError):
            theta_operator(w, np.ones((9, 4)))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_skew_adjoint(self, seed):
        rng = np.random.default_rng(seed)
        g = strip_end_grid(0.2, (3, 6), 20, 17)
        w = WeightedInner.from_grid(g, StructureField.strip_end(0.2)).row(rng.integers(20))
        a, b = rng.normal(size=(2, 17, 4))
        lhs = inner_s(w, theta_operator(w, a), b)
        rhs = -inner_s(w, a, theta_operator(w, b))
        scale = norm_s(w, a) * norm_s(w, b)
        assert abs(lhs - rhs) <= 1e-9 * scale

    def test_decays_along_strip(self, strip_field):
        g = strip_end_grid(0.2, (3, 10), 30, 17)
        w = WeightedInner.from_grid(g, strip_field)
        x = np.ones((17, 4))
        norms = [norm_s(w.row(i), theta_operator(w.row(i), x)) for i in range(30)]
        assert norms[-1] < 1e-3 * norms[0]


class TestProjection:
    def test_kernel_direction_fixed(self):
        w = zero_row_inner(9, StructureField.constant(Q0))
        e = np.broadcast_to(KERNEL_DIRECTION, (9, 4))
        P, Q = project_kernel(w, np.array(e), e)
        np.testing.assert_allclose(P, e)
        np.testing.assert_allclose(Q, 0.0, atol=1e-15)

    def test_complement_orthogonal(self, rng):
        w = zero_row_inner(9, StructureField.constant(Q0))
        e = np.broadcast_to(KERNEL_DIRECTION, (9, 4))
        _, Q = project_kernel(w, rng.normal(size=(9, 4)), e)
        assert abs(inner_s(w, Q, e)) < 1e-12

    def test_zero_kernel(self):
        w = zero_row_inner(9, StructureField.constant(Q0))
        with pytest.raises(ZeroNorm):
            project_kernel(w, np.ones((9, 4)), np.zeros(4))


class TestAlpha:
    def test_single_mode(self):
        # a tiny amplitude keeps the coefficients at their limit values
        g = mode_grid(-HALF_PI, Q0, 1e-6, n_s=97, n_t=33)
        tr = alpha_trace(g, StructureField.constant(Q0))
        assert tr.lambda_snapped == -HALF_PI
        assert abs(tr.lambda_fit + HALF_PI) < 1e-6
        assert tr.discrepancy.max() < 1e-5

    def test_two_modes_converge_to_slowest(self):
        e1 = analytic_eigenvector(-HALF_PI, Q0)
        e2 = analytic_eigenvector(-np.pi, Q0)
        fn = lambda S, T: 1e-6 * (np.exp(-HALF_PI * S)[..., None] * e1(T) + np.exp(-np.pi * S)[..., None] * e2(T))
        g = FieldGrid.from_function(fn, (4, 12), 129, 33)
        tr = alpha_trace(g, StructureField.constant(Q0), burn_in=6)
        assert tr.lambda_snapped == -HALF_PI
        # α - λ decays like e^{-(π/2)s}, the distance to the next eigenvalue
        assert tr.delta_fit == pytest.approx(HALF_PI, abs=0.05)

    def test_zero_field(self):
        g = FieldGrid.uniform((0, 1), 9, 9)
        with pytest.raises(ZeroNorm):
            alpha_trace(g, StructureField.constant(Q0))

    def test_too_short(self):
        with pytest.raises(GridTooShort):
            alpha_trace(mode_grid(-HALF_PI, Q0, 1e-6, n_s=4, n_t=9), StructureField.constant(Q0))

    def test_snap(self):
        assert snap_to_spectrum(-1.5) == -HALF_PI
        with pytest.raises(NoSpectrumMatch):
            snap_to_spectrum(0.8)

    def test_rows(self):
        tr = alpha_trace(mode_grid(-HALF_PI, Q0, 1e-6, n_s=9, n_t=9), StructureField.constant(Q0))
        rows = tr.to_rows()
        assert len(rows) == 9 and set(rows[0]) == {"s", "alpha_logderiv", "alpha_formula"}


class TestConvexity:
    def test_single_mode_ratio(self):
        # g ∝ e^{2λs}, so g''/g = 4λ² = π²; the second difference of e^{πs}
        # with step h is exactly 4 sinh²(πh/2)/h² times the function
        g = mode_grid(-HALF_PI, Q0, 1e-12)
        rep = convexity_check(g, StructureField.constant(Q0))
        h = g.h_s
        assert rep.ratio_min == pytest.approx(4 * np.sinh(np.pi * h / 2) ** 2 / h**2, rel=1e-9)
        assert rep.ratio_min == pytest.approx(np.pi**2, rel=1e-2)
        assert rep.delta_fit == pytest.approx(np.pi * np.sqrt(2), rel=1e-9)
        # a pure exponential sits exactly on the envelope
        assert rep.envelope_ok
        assert rep.envelope_worst == pytest.approx(1.0, abs=1e-9)

    def test_degenerate(self):
        rep = convexity_check(FieldGrid.uniform((0, 1), 9, 9), StructureField.constant(Q0))
        assert rep.degenerate and rep.ratio_min is None

    def test_kernel_only_is_degenerate(self):
        fn = lambda S, T: np.broadcast_to(KERNEL_DIRECTION, S.shape + (4,)) * 1e-3
        rep = convexity_check(FieldGrid.from_function(fn, (0, 1), 9, 9), StructureField.constant(Q0))
        assert rep.degenerate

    def test_too_short(self):
        with pytest.raises(GridTooShort):
            convexity_check(FieldGrid.uniform((0, 1), 4, 9), StructureField.constant(Q0))


class TestDecayFit:
    def test_single_mode(self):
        kappa = 1e-6
        g = mode_grid(-HALF_PI, Q0, kappa)
        rep = decay_fit(g, StructureField.constant(Q0))
        assert rep.lam == -HALF_PI
        assert rep.q0_used == Q0
        assert rep.rho_v == pytest.approx(HALF_PI, abs=1e-6)
        # e^{∫α} starts at s = 4, so κ absorbs e^{λ·4}
        assert rep.kappa == pytest.approx(kappa * np.exp(-HALF_PI * 4), rel=1e-6)
        assert rep.remainder_sup.max() < 1e-6 * abs(rep.kappa)

    def test_strip_coarse(self, strip_field):
        g = strip_end_grid(0.2, (4, 10), 193, 33)
        rep = decay_fit(g, strip_field)
        assert rep.lam == -HALF_PI
        assert rep.q0_used == -10.0
        assert rep.delta_alpha == pytest.approx(HALF_PI, abs=0.1)
        assert rep.delta_remainder > 0 and rep.rho > 0
        assert set(rep.to_dict()) >= {"lambda", "rho", "kappa", "q0"}


def test_direction_error_examples():
    w = trapezoid_weights(5, 0.25)
    a = np.ones((5, 4))
    assert direction_error(a, 3 * a, w) == 0.0
    assert direction_error(a, -a, w) == 0.0
    b = np.zeros((5, 4))
    b[:, 0] = 1
    c = np.zeros((5, 4))
    c[:, 1] = 1
    assert direction_error(b, c, w) == pytest.approx(np.sqrt(2))
