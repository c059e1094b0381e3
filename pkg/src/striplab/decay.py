"""Weighted inner products along a strip solution and decay-rate extraction.

Rows of a :class:`~striplab.grid.FieldGrid` are paths ``t ↦ v(s, t)``. Each
row carries the inner product ``(γ1, γ2)_s = ∫ ⟨γ1, Ω(v) M(v) γ2⟩ dt`` with
``M = Ĵ``. The decay exponent ``α(s)`` is the logarithmic derivative of
``‖v(s)‖_s``; it converges to an eigenvalue of the asymptotic operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fd
from .contact import eval_Jhat, eval_Omega, eval_Omega_tangent
from .errors import GridMismatch, GridTooShort, NoSpectrumMatch, SingularOmega, ZeroNorm
from .spectral import HALF_PI, analytic_eigenvector

FD_ORDER = 4


@dataclass
class WeightedInner:
    """Pointwise data of the s-inner products on one or many rows.

    Arrays have shape ``(..., n_t, 4, 4)``; leading axes index rows.
    """

    Omega: np.ndarray
    M: np.ndarray
    weights: np.ndarray
    dOmega_dt: np.ndarray | None = None

    def __post_init__(self):
        G = self.Omega @ self.M
        self.G = 0.5 * (G + np.swapaxes(G, -1, -2))
        ev = np.linalg.eigvalsh(self.G)
        # equivalence constants with the unweighted L2 norm
        self.c0 = np.sqrt(np.maximum(ev[..., 0].min(axis=-1), 0.0))
        self.c1 = np.sqrt(ev[..., -1].max(axis=-1))

    @classmethod
    def from_values(cls, values, f, h_t, order=FD_ORDER):
        values = np.asarray(values, dtype=float)
        dv = fd.derivative(values, h_t, axis=-2, order=order)
        return cls(
            eval_Omega(values, f),
            eval_Jhat(values, f),
            fd.trapezoid_weights(values.shape[-2], h_t),
            eval_Omega_tangent(values, dv, f),
        )

    @classmethod
    def from_grid(cls, grid, f, order=FD_ORDER):
        return cls.from_values(grid.values, f, grid.h_t, order)

    @property
    def n_t(self):
        return self.weights.size

    def row(self, i):
        return WeightedInner(
            self.Omega[i], self.M[i], self.weights, None if self.dOmega_dt is None else self.dOmega_dt[i]
        )

    def _check(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-2:] != (self.n_t, 4):
            raise GridMismatch(f"path has shape {g.shape}, expected (..., {self.n_t}, 4)")
        return g


def inner_s(w, g1, g2):
    """Trapezoidal ``∫ ⟨γ1, ΩM γ2⟩ dt``; broadcasts over rows."""
    g1, g2 = w._check(g1), w._check(g2)
    return np.einsum("...ti,...tij,...tj,t->...", g1, w.G, g2, w.weights)


def norm_s(w, g):
    return np.sqrt(inner_s(w, g, g))


def theta_operator(w, g, tol=1e-12):
    """``Θγ = M Ω⁻¹ ∂tΩ γ``; skew-adjoint for the s-inner product."""
    g = w._check(g)
    if w.dOmega_dt is None:
        raise ValueError("the inner-product data carries no t-derivative of Ω")
    det = np.linalg.det(w.Omega)
    if np.any(np.abs(det) < tol):
        raise SingularOmega("Ω is singular on this row")
    X = np.linalg.solve(w.Omega, w.dOmega_dt @ g[..., None])[..., 0]
    return np.einsum("...ij,...j->...i", w.M, X)


def project_kernel(w, g, e):
    """Rank-one projection ``P g = (g, e)/‖e‖² e`` and its complement ``Q g = g - P g``."""
    g, e = w._check(g), w._check(np.broadcast_to(e, np.shape(g)))
    ee = inner_s(w, e, e)
    if np.any(ee <= 0):
        raise ZeroNorm("kernel path has zero s-norm")
    P = (inner_s(w, g, e) / ee)[..., None, None] * e
    return P, g - P


@dataclass
class AlphaTrace:
    s: np.ndarray
    alpha_logderiv: np.ndarray
    alpha_formula: np.ndarray
    norms: np.ndarray
    lambda_fit: float
    lambda_snapped: float
    delta_fit: float | None
    window: tuple

    @property
    def discrepancy(self):
        return np.abs(self.alpha_logderiv - self.alpha_formula)

    def to_rows(self):
        return [
            {"s": float(a), "alpha_logderiv": float(b), "alpha_formula": float(c)}
            for a, b, c in zip(self.s, self.alpha_logderiv, self.alpha_formula)
        ]


def _loglinear_rate(x, y, floor=1e-13):
    """Rate ``ρ`` in ``y ≈ c e^{-ρx}`` by least squares on ``log y``; None below floor."""
    x, y = np.asarray(x), np.abs(np.asarray(y))
    ok = y > floor
    if ok.sum() < 3:
        return None
    slope = np.polyfit(x[ok], np.log(y[ok]), 1)[0]
    return float(-slope)


def snap_to_spectrum(lam, tol=0.1):
    k = round(lam / HALF_PI)
    if abs(lam - k * HALF_PI) > tol:
        raise NoSpectrumMatch(f"α tends to {lam:.6g}, more than {tol} from (π/2)Z")
    return k * HALF_PI


def _window(s, burn_in, end_trim):
    lo = burn_in if burn_in is not None else 0.5 * (s[0] + s[-1])
    hi = s[-1] - end_trim
    mask = (s >= lo - 1e-12) & (s <= hi + 1e-12)
    if mask.sum() < 3:
        raise GridTooShort("regression window holds fewer than 3 samples")
    return mask, (float(lo), float(hi))


def alpha_trace(grid, f, order=FD_ORDER, burn_in=None, tail_fraction=0.25, floor=1e-10):
    """``α(s)`` from the log-derivative of ``‖v(s)‖_s²`` and from the operator formula.

    The formula evaluates ``(ξ, Γ1 ξ)_s + (ξ, A ξ)_s`` with ``ξ = v/‖v‖_s``,
    ``A ξ = -M ∂tξ`` and ``Γ1 = -½ M Ω⁻¹ ∂s(ΩM)``. ``λ`` is the mean of the
    log-derivative over the last ``tail_fraction`` of the rows.
    """
    if grid.n_s < 5 or grid.n_t < 5:
        raise GridTooShort("α needs at least 5 samples in each direction")
    w = WeightedInner.from_grid(grid, f, order)
    v = grid.values
    n2 = inner_s(w, v, v)
    if np.any(n2 <= 0.0):
        i = int(np.argmin(n2))
        raise ZeroNorm(f"‖v(s)‖_s vanishes at s = {grid.s[i]:.6g}; the solution is constant")
    a_log = 0.5 * fd.derivative(np.log(n2), grid.h_s, order=order)
    xi = v / np.sqrt(n2)[:, None, None]
    A_xi = -np.einsum("...ij,...j->...i", w.M, fd.derivative(xi, grid.h_t, axis=1, order=order))
    dG = fd.derivative(w.G, grid.h_s, axis=0, order=order)
    # Γ1ξ = -½ M Ω⁻¹ ∂s(ΩM) ξ
    gam = -0.5 * np.einsum(
        "...ij,...j->...i", w.M, np.linalg.solve(w.Omega, (dG @ xi[..., None]))[..., 0]
    )
    a_form = inner_s(w, xi, gam) + inner_s(w, xi, A_xi)
    n_tail = max(3, int(round(tail_fraction * grid.n_s)))
    lam_fit = float(np.mean(a_log[-n_tail:]))
    lam = snap_to_spectrum(lam_fit)
    mask, win = _window(grid.s, burn_in, end_trim=0.0)
    delta = _loglinear_rate(grid.s[mask], a_log[mask] - lam, floor)
    return AlphaTrace(grid.s.copy(), a_log, a_form, np.sqrt(n2), lam_fit, lam, delta, win)


@dataclass
class ConvexityReport:
    s: np.ndarray
    g: np.ndarray
    g2: np.ndarray
    ratio_min: float | None
    delta_fit: float | None
    envelope_ok: bool | None
    envelope_worst: float | None
    degenerate: bool
    burn_in: float

    def to_dict(self):
        return {
            "ratio_min": self.ratio_min,
            "delta_fit": self.delta_fit,
            "envelope_ok": self.envelope_ok,
            "envelope_worst": self.envelope_worst,
            "degenerate": self.degenerate,
            "burn_in": self.burn_in,
        }


KERNEL_DIRECTION = np.array([0.0, 1.0, 0.0, 0.0])


def convexity_check(grid, f, burn_in=None, kernel=KERNEL_DIRECTION, rtol=1e-9, zero_tol=1e-300):
    """Convexity of ``g(s) = ½‖Q_s v(s)‖_s²`` and the exponential envelope it implies.

    ``δ`` is fitted as ``sqrt(2 min g''/g)`` over interior samples past the
    burn-in, with ``g''/g`` read off the second difference through the exact
    exponential relation; the envelope ``g(s) ≤ g(s1) e^{-δ(s-s1)/√2}`` is then checked for
    every ordered pair of samples in that range.
    """
    if grid.n_s < 5:
        raise GridTooShort("convexity needs at least 5 samples in s")
    w = WeightedInner.from_grid(grid, f)
    e = np.broadcast_to(np.asarray(kernel, dtype=float), grid.values.shape[1:])
    _, Qv = project_kernel(w, grid.values, e)
    g = 0.5 * inner_s(w, Qv, Qv)
    g2 = np.full_like(g, np.nan)
    g2[1:-1] = fd.second_derivative(g, grid.h_s)
    burn = grid.s[0] if burn_in is None else float(burn_in)
    if np.all(np.abs(g) <= zero_tol):
        return ConvexityReport(grid.s.copy(), g, g2, None, None, None, None, True, burn)
    mask = np.zeros(grid.n_s, bool)
    mask[1:-1] = grid.s[1:-1] >= burn - 1e-12
    ratio = g2[mask] / g[mask]
    rmin = float(ratio.min())
    if rmin <= 0.0:
        return ConvexityReport(grid.s.copy(), g, g2, rmin, None, False, None, False, burn)
    # invert 4 sinh²(ah/2)/h² = rmin, which is exact when g is an exponential;
    # the raw second difference overstates the rate by a factor sinh(x)/x
    h = grid.h_s
    rate = 2.0 / h * np.arcsinh(0.5 * h * np.sqrt(rmin))
    delta = float(np.sqrt(2.0) * rate)
    sel = grid.s >= burn - 1e-12
    ss, gg = grid.s[sel], g[sel]
    k = delta / np.sqrt(2.0)
    # pairwise ratios g(s)/(g(s1) e^{-k(s-s1)}) for s >= s1
    logq = (np.log(gg)[None, :] - np.log(gg)[:, None]) + k * (ss[None, :] - ss[:, None])
    upper = np.triu(np.ones_like(logq, dtype=bool))
    worst = float(np.exp(logq[upper].max()))
    return ConvexityReport(grid.s.copy(), g, g2, rmin, delta, worst <= 1.0 + rtol, worst, False, burn)


@dataclass
class DecayReport:
    lam: float
    lambda_fit: float
    rho: float | None
    rho_v: float | None
    rho_derivatives: dict
    delta_alpha: float | None
    delta_remainder: float | None
    kappa: float
    q0_used: float
    alpha_discrepancy_max: float
    remainder_sup: np.ndarray = field(repr=False, default=None)
    alpha_error: np.ndarray = field(repr=False, default=None)
    eigenvector: object = field(repr=False, default=None)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "lambda_fit": self.lambda_fit,
            "rho": self.rho,
            "rho_v": self.rho_v,
            "delta_alpha": self.delta_alpha,
            "delta_remainder": self.delta_remainder,
            "kappa": self.kappa,
            "q0": self.q0_used,
            "alpha_discrepancy_max": self.alpha_discrepancy_max,
        }


def _cumtrapz(y, h):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return out


def decay_fit(grid, f, e=None, burn_in=None, end_trim=None, floor=1e-13, trace=None):
    """Asymptotic formula ``v = e^{∫α}(e(t) + r(s,t))`` and fitted decay rates.

    ``e`` defaults to the closed-form eigenvector of the snapped ``λ`` with
    ``q0 = q(0)`` of the field; ``κ`` is the least-squares scale at the last row.
    Rates come from log-linear fits over ``[burn_in, s_max - end_trim]``
    (defaults: the middle of the range and one unit of s).
    """
    trace = alpha_trace(grid, f, burn_in=burn_in) if trace is None else trace
    lam = trace.lambda_snapped
    q0 = float(f.q(0.0))
    if e is None:
        e = analytic_eigenvector(lam, q0, 1.0)
    I = _cumtrapz(trace.alpha_logderiv, grid.h_s)
    scaled = grid.values * np.exp(-I)[:, None, None]
    base = e(grid.t)
    wt = fd.trapezoid_weights(grid.n_t, grid.h_t)
    last = scaled[-1]
    kappa_rel = float(np.einsum("ti,ti,t->", last, base, wt) / np.einsum("ti,ti,t->", base, base, wt))
    kappa = kappa_rel * getattr(e, "kappa", 1.0)
    r = scaled - kappa_rel * base
    r_sup = np.abs(r).max(axis=(1, 2))
    end_trim = min(1.0, 0.25 * (grid.s[-1] - grid.s[0])) if end_trim is None else end_trim
    mask, _ = _window(grid.s, burn_in, end_trim)
    s_w = grid.s[mask]
    v = grid.values
    sup = lambda a: np.abs(a).max(axis=tuple(range(1, a.ndim)))
    derivs = {
        "v": v,
        "ds": fd.derivative(v, grid.h_s, axis=0, order=FD_ORDER),
        "dt": fd.derivative(v, grid.h_t, axis=1, order=FD_ORDER),
    }
    derivs["dss"] = fd.derivative(derivs["ds"], grid.h_s, axis=0, order=FD_ORDER)
    derivs["dst"] = fd.derivative(derivs["ds"], grid.h_t, axis=1, order=FD_ORDER)
    derivs["dtt"] = fd.derivative(derivs["dt"], grid.h_t, axis=1, order=FD_ORDER)
    rates = {k: _loglinear_rate(s_w, sup(a)[mask], floor) for k, a in derivs.items()}
    finite = [x for x in rates.values() if x is not None]
    alpha_err = trace.alpha_logderiv - lam
    return DecayReport(
        lam=lam,
        lambda_fit=trace.lambda_fit,
        rho=min(finite) if finite else None,
        rho_v=rates["v"],
        rho_derivatives=rates,
        delta_alpha=_loglinear_rate(s_w, alpha_err[mask], max(floor, 1e-10)),
        delta_remainder=_loglinear_rate(s_w, r_sup[mask], floor),
        kappa=kappa,
        q0_used=q0,
        alpha_discrepancy_max=float(trace.discrepancy.max()),
        remainder_sup=r_sup,
        alpha_error=alpha_err,
        eigenvector=analytic_eigenvector(lam, q0, kappa) if hasattr(e, "kappa") else e,
    )


def direction_error(values_row, e_values, weights):
    """L2 distance between the unit directions of a row and of ``e``, sign-aligned."""
    def unit(a):
        return a / np.sqrt(np.einsum("ti,ti,t->", a, a, weights))

    u, w = unit(values_row), unit(e_values)
    if np.einsum("ti,ti,t->", u, w, weights) < 0:
        w = -w
    d = u - w
    return float(np.sqrt(np.einsum("ti,ti,t->", d, d, weights)))
