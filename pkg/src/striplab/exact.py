"""Closed-form pseudoholomorphic half disks and strips near an elliptic point.

The solutions live in the unflattened chart with contact form
``λ = dy + x dθ``. The surface through the knot is ``y = -θx/2`` there, the
elliptic normal form with ``c = -1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from . import fd
from .contact import eval_J_simple
from .errors import ChartExceeded, NonMonotoneProfile, OutsideDomain
from .geometry import ChartPoint
from .grid import FieldGrid


def strip_to_halfdisk(s, t):
    """Biholomorphism ``tanh(π(s+it)/4)`` from the strip onto the upper half disk."""
    return np.tanh(np.pi * (np.asarray(s) + 1j * np.asarray(t)) / 4.0)


def _halfdisk_values(eps, s, t):
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    e2 = eps * eps
    return np.stack([0.25 * e2 * (s * s + t * t - 1.0), eps * s, -eps * t, 0.5 * e2 * s * t], axis=-1)


def halfdisk_solution(eps, s, t, tol=1e-12):
    """Value at ``z = s + it`` of the half-disk solution with parameter ``eps``.

    Scalars return a :class:`ChartPoint`; arrays return shape ``(..., 4)``.
    """
    s_arr, t_arr = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any(s_arr**2 + t_arr**2 > 1.0 + tol) or np.any(t_arr < -tol):
        raise OutsideDomain("the half-disk solution is defined for |z| <= 1, Im z >= 0")
    v = _halfdisk_values(eps, s_arr, t_arr)
    if v.ndim == 1:
        return ChartPoint(*map(float, v))
    return v


def strip_solution(eps, s, t):
    """Strip parameterisation of the same solution (no corners)."""
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    a = 0.5 * np.pi * s
    b = 0.5 * np.pi * t
    # divide by cosh to keep large |s| finite; 1/cosh written with exp(-|a|)
    ea = np.exp(-np.abs(a))
    sech = 2.0 * ea / (1.0 + ea * ea)
    c = np.cos(b) * sech
    sn = np.sin(b) * sech
    th = np.tanh(a)
    d = c + 1.0
    e2 = eps * eps
    v = np.stack([-e2 * c / (2.0 * d), eps * th / d, -eps * sn / d, e2 * sn * th / (2.0 * d * d)], axis=-1)
    if v.ndim == 1:
        return ChartPoint(*map(float, v))
    return v


def strip_grid(eps, s_range, n_s, n_t):
    g = FieldGrid.from_function(lambda S, T: strip_solution(eps, S, T), s_range, n_s, n_t)
    g.meta["eps"] = eps
    return g


def strip_end_grid(eps, s_range, n_s, n_t):
    """Strip solution in the flattened chart recentred at its positive end.

    As ``s → ∞`` the strip tends to ``(0, ε, 0, 0)``. Shifting ``θ`` by ``-ε``
    and flattening with ``q(θ) = -2/(θ+ε)`` puts that point at the origin
    with boundary data ``x = y = 0`` at ``t = 0`` and ``τ = x = 0`` at ``t = 1``.
    """

    def fn(S, T):
        v = strip_solution(eps, S, T)
        th = v[..., 1] - eps
        out = v.copy()
        out[..., 1] = th
        out[..., 2] = v[..., 2] + 2.0 / (th + eps) * v[..., 3]
        return out

    g = FieldGrid.from_function(fn, s_range, n_s, n_t)
    g.meta["eps"] = eps
    return g


def halfdisk_polar_grid(eps, n_r, n_phi):
    """Half-disk solution on polar parameters ``(r, φ/π) ∈ [0,1]²``."""

    def fn(R, P):
        return _halfdisk_values(eps, R * np.cos(np.pi * P), R * np.sin(np.pi * P))

    g = FieldGrid.from_function(fn, (0.0, 1.0), n_r, n_phi)
    g.meta["eps"] = eps
    return g


def surface_unflattened(v):
    """Residual of the surface condition ``y + θx/2 = 0``."""
    return v[..., 3] + 0.5 * v[..., 1] * v[..., 2]


def surface_flattened(v):
    return v[..., 2]


@dataclass
class ResidualReport:
    max_norm: float
    l2_norm: float
    bc_t0_x: float
    bc_t0_y: float
    bc_t1_tau: float
    bc_t1_surface: float
    field: np.ndarray = field(repr=False, default=None)

    @property
    def bc_max(self):
        return max(self.bc_t0_x, self.bc_t0_y, self.bc_t1_tau, self.bc_t1_surface)

    def to_dict(self):
        return {
            "max_norm": self.max_norm,
            "l2_norm": self.l2_norm,
            "bc_t0_x": self.bc_t0_x,
            "bc_t0_y": self.bc_t0_y,
            "bc_t1_tau": self.bc_t1_tau,
            "bc_t1_surface": self.bc_t1_surface,
        }


def cr_residual(grid, J=eval_J_simple, surface=surface_unflattened, chart_bound=None):
    """Discrete Cauchy-Riemann residual ``∂s v + J(v) ∂t v`` and boundary violations.

    Derivatives are second-order central differences with second-order
    one-sided stencils on the edges. ``chart_bound`` limits ``|x|, |y|``.
    """
    v = grid.values
    if chart_bound is not None:
        worst = float(np.abs(v[..., 2:]).max())
        if worst > chart_bound:
            raise ChartExceeded(f"|x|,|y| reaches {worst:.3e} > chart bound {chart_bound}")
    ds = fd.derivative(v, grid.h_s, axis=0)
    dt = fd.derivative(v, grid.h_t, axis=1)
    R = ds + np.einsum("...ij,...j->...i", J(v), dt)
    norms = np.linalg.norm(R, axis=-1)
    w = np.outer(fd.trapezoid_weights(grid.n_s, grid.h_s), fd.trapezoid_weights(grid.n_t, grid.h_t))
    return ResidualReport(
        max_norm=float(norms.max()),
        l2_norm=float(np.sqrt((w * norms**2).sum())),
        bc_t0_x=float(np.abs(v[:, 0, 2]).max()),
        bc_t0_y=float(np.abs(v[:, 0, 3]).max()),
        bc_t1_tau=float(np.abs(v[:, -1, 0]).max()),
        bc_t1_surface=float(np.abs(surface(v[:, -1])).max()),
        field=R,
    )


def second_derivative_bound(grid):
    """Sup of the pure second differences of ``v`` in both directions."""
    v = grid.values
    dss = fd.second_derivative(v, grid.h_s, axis=0)
    dtt = fd.second_derivative(v, grid.h_t, axis=1)
    return float(max(np.abs(dss).max(), np.abs(dtt).max()))


def _quad(grid, integrand):
    w = np.outer(fd.trapezoid_weights(grid.n_s, grid.h_s), fd.trapezoid_weights(grid.n_t, grid.h_t))
    return float((w * integrand).sum())


def dlambda_density(grid, order=2):
    """Pull-back of ``dλ = dx∧dθ`` as a density on the parameter grid."""
    v = grid.values
    ds = fd.derivative(v, grid.h_s, axis=0, order=order)
    dt = fd.derivative(v, grid.h_t, axis=1, order=order)
    return ds[..., 2] * dt[..., 1] - dt[..., 2] * ds[..., 1]


def energy_dlambda(grid, order=2):
    """``∫ u*dλ`` by trapezoidal quadrature over the parameter grid."""
    return _quad(grid, dlambda_density(grid, order))


@dataclass(frozen=True)
class Sigmoid:
    """``φ(τ) = 1 / (1 + exp(-(τ - center)/width))``; constants via ``level``."""

    center: float = 0.0
    width: float = 1.0
    level: float | None = None

    def __call__(self, tau):
        if self.level is not None:
            return np.full(np.shape(tau), float(self.level))
        return 0.5 * (1.0 + np.tanh(0.5 * (np.asarray(tau) - self.center) / self.width))

    def derivative(self, tau):
        if self.level is not None:
            return np.zeros(np.shape(tau))
        z = 0.5 * (np.asarray(tau) - self.center) / self.width
        return 0.25 / self.width / np.cosh(z) ** 2


def sigmoid_dictionary(tau_min, tau_max, n_centers=9, widths=(0.25, 1.0, 4.0)):
    """Shifted and scaled sigmoids covering ``[tau_min, tau_max]``, plus φ ≡ 1."""
    span = max(tau_max - tau_min, 1e-12)
    centers = np.linspace(tau_min, tau_max, n_centers)
    out = [Sigmoid(level=1.0)]
    for w in widths:
        out.extend(Sigmoid(float(c), float(w) * span) for c in centers)
    return out


@dataclass
class EnergyBudget:
    dlambda_energy: float
    hofer_energy_lb: float
    values: list

    def to_dict(self):
        return {"dlambda_energy": self.dlambda_energy, "hofer_energy_lb": self.hofer_energy_lb}


def _check_monotone(phi, tau):
    vals = np.asarray(phi(tau), dtype=float)
    dv = np.asarray(phi.derivative(tau), dtype=float) if hasattr(phi, "derivative") else None
    order = np.argsort(tau)
    if (
        vals.min() < -1e-12
        or vals.max() > 1.0 + 1e-12
        or np.any(np.diff(vals[order]) < -1e-12)
        or (dv is not None and dv.min() < -1e-12)
    ):
        raise NonMonotoneProfile(f"{phi!r} is not a non-decreasing map into [0, 1]")


def energy_hofer(grid, dictionary, order=2):
    """Lower bound for the Hofer energy over a finite dictionary of φ.

    For each φ evaluates ``∫ u*d(φ(τ)λ) = ∫ φ'(τ) dτ∧λ + φ(τ) dλ``. Members
    without a ``derivative`` method are differentiated by central differences.
    """
    v = grid.values
    ds = fd.derivative(v, grid.h_s, axis=0, order=order)
    dt = fd.derivative(v, grid.h_t, axis=1, order=order)
    tau, x = v[..., 0], v[..., 2]
    lam_s = ds[..., 3] + x * ds[..., 1]
    lam_t = dt[..., 3] + x * dt[..., 1]
    dtau_lam = ds[..., 0] * lam_t - dt[..., 0] * lam_s
    dlam = ds[..., 2] * dt[..., 1] - dt[..., 2] * ds[..., 1]
    values = []
    for phi in dictionary:
        _check_monotone(phi, tau.ravel())
        if hasattr(phi, "derivative"):
            dphi = phi.derivative(tau)
        else:
            h = 1e-6
            dphi = (np.asarray(phi(tau + h)) - np.asarray(phi(tau - h))) / (2 * h)
        values.append(_quad(grid, dphi * dtau_lam + np.asarray(phi(tau)) * dlam))
    return EnergyBudget(_quad(grid, dlam), float(max(values)) if values else 0.0, values)


@dataclass
class SeparationReport:
    eps: list
    pair_distances: dict
    sup_norms: list
    min_separation: float
    monotone_shrink: bool
    linear_constant: float

    @property
    def passed(self):
        return self.min_separation > 0.0 and self.monotone_shrink

    def to_dict(self):
        return {
            "eps": self.eps,
            "pair_distances": {f"{a},{b}": d for (a, b), d in self.pair_distances.items()},
            "sup_norms": self.sup_norms,
            "min_separation": self.min_separation,
            "monotone_shrink": self.monotone_shrink,
            "linear_constant": self.linear_constant,
        }


def family_separation_check(eps_list, s_range=(-6.0, 6.0), n_s=241, n_t=21):
    """Pairwise distances between images of strip solutions for distinct ε.

    All ε must be non-zero, distinct and of one sign. Also reports the sup
    norms, which must shrink with |ε| and stay below ``c|ε|``.
    """
    eps_list = [float(e) for e in eps_list]
    if len(set(eps_list)) != len(eps_list) or 0.0 in eps_list:
        raise ValueError("ε values must be distinct and non-zero")
    if len({np.sign(e) for e in eps_list}) > 1:
        raise ValueError("ε values must share one sign")
    clouds = {}
    sups = []
    for e in eps_list:
        pts = strip_grid(e, s_range, n_s, n_t).values.reshape(-1, 4)
        clouds[e] = pts
        sups.append(float(np.abs(pts).max()))
    dists = {}
    for a, b in combinations(eps_list, 2):
        d, _ = cKDTree(clouds[b]).query(clouds[a], k=1)
        dists[(a, b)] = float(d.min())
    order = np.argsort(np.abs(eps_list))
    sorted_sups = np.array(sups)[order]
    return SeparationReport(
        eps=eps_list,
        pair_distances=dists,
        sup_norms=sups,
        min_separation=min(dists.values()) if dists else float("inf"),
        monotone_shrink=bool(np.all(np.diff(sorted_sups) > 0.0)),
        linear_constant=float(max(s / abs(e) for s, e in zip(sups, eps_list))),
    )
