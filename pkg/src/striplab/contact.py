"""Contact form, Reeb field, almost complex structure and compatible 2-form.

All evaluators work in the flattened chart ``(τ, θ, x, y)`` where the knot
boundary is ``{x = y = 0}`` and the surface boundary is ``{τ = 0, x = 0}``.
They are vectorised: a point argument may be a single 4-vector or an array
of shape ``(..., 4)``, and matrices come back with shape ``(..., 4, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PositivityFailure

DEFAULT_CHART_BOUND = 0.1

# Complex structure of C^2 = R^4 in (Re z1, Im z1, Re z2, Im z2) order.
J0 = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)


def _const(value):
    return lambda th: np.full(np.shape(th), float(value))


@dataclass(frozen=True)
class StructureField:
    """Slope function ``q = a/b`` with derivatives, and the constant ``C``.

    ``theta_range`` is the working interval over which ``C`` was chosen.
    """

    q: Callable
    q_prime: Callable
    q_second: Callable
    C: float
    theta_range: tuple = (0.0, 1.0)

    @staticmethod
    def default_C(q, theta_range, n=2001):
        th = np.linspace(theta_range[0], theta_range[1], n)
        return 1.0 + 2.0 * float(np.max(np.asarray(q(th)) ** 2))

    @classmethod
    def constant(cls, q0, C=None):
        C = 1.0 + 2.0 * q0 * q0 if C is None else C
        return cls(_const(q0), _const(0.0), _const(0.0), float(C), (-np.inf, np.inf))

    @classmethod
    def from_functions(cls, q, q_prime, q_second=None, C=None, theta_range=(0.0, 1.0)):
        if q_second is None:
            h = 1e-5
            q_second = lambda th: (q_prime(np.asarray(th) + h) - q_prime(np.asarray(th) - h)) / (2 * h)
        if C is None:
            C = cls.default_C(q, theta_range)
        return cls(q, q_prime, q_second, float(C), tuple(theta_range))

    @classmethod
    def from_profile(cls, profile, theta_range, C=None):
        """Field of a surface profile on a θ-interval where ``b`` has no zero."""
        return cls.from_functions(profile.q, profile.q_prime, None, C, theta_range)

    @classmethod
    def strip_end(cls, eps, C=None, theta_range=None):
        """Field around the asymptotic point of the explicit strip.

        The strip bounds the surface ``y = -θx/2``; recentring the angle at
        ``θ = ε`` gives ``q(θ) = -2/(θ+ε)``, so ``q(0) = -2/ε``.
        """
        eps = float(eps)
        if theta_range is None:
            theta_range = (-0.2 * abs(eps), 0.2 * abs(eps))
        q = lambda th: -2.0 / (np.asarray(th) + eps)
        qp = lambda th: 2.0 / (np.asarray(th) + eps) ** 2
        qpp = lambda th: -4.0 / (np.asarray(th) + eps) ** 3
        if C is None:
            C = cls.default_C(q, theta_range)
        return cls(q, qp, qpp, float(C), tuple(theta_range))


def _split(p):
    p = np.asarray(p, dtype=float)
    return p, p[..., 1], p[..., 2], p[..., 3]


def eval_lambda_hat(p, f):
    """Covector of the flattened contact form: ``(0, x + qy, 0, 1)``."""
    p, th, x, y = _split(p)
    out = np.zeros(p.shape)
    out[..., 1] = x + f.q(th) * y
    out[..., 3] = 1.0
    return out


def eval_reeb(p, f):
    p, th, _, _ = _split(p)
    out = np.zeros(p.shape)
    out[..., 2] = -f.q(th)
    out[..., 3] = 1.0
    return out


def contact_frame(p, f):
    """Frame ``(ê1, ê2)`` of the contact plane with ``Ĵê1 = -ê2``."""
    p, th, x, y = _split(p)
    Q, P = f.q(th), f.q_prime(th)
    w = x + Q * y
    e1 = np.zeros(p.shape)
    e1[..., 1] = 1.0
    e1[..., 2] = -P * y + Q * w
    e1[..., 3] = -w
    e2 = np.zeros(p.shape)
    e2[..., 2] = 1.0
    return e1, e2


def _jhat_from(x, y, Q, P):
    w = x + Q * y
    m = w * Q - y * P
    yP = y * P
    J = np.zeros(np.shape(x) + (4, 4))
    J[..., 0, 1] = -w
    J[..., 0, 3] = -1.0
    J[..., 1, 1] = yP
    J[..., 1, 2] = 1.0
    J[..., 1, 3] = Q
    J[..., 2, 0] = -Q
    J[..., 2, 1] = -1.0 + yP * m
    J[..., 2, 2] = m
    J[..., 2, 3] = Q * m
    J[..., 3, 0] = 1.0
    J[..., 3, 1] = -w * yP
    J[..., 3, 2] = -w
    J[..., 3, 3] = -w * Q
    return J


def eval_Jhat(p, f):
    """Almost complex structure in the flattened chart.

    It is the push-forward of :func:`eval_J_simple` under the flattening
    map, so it sends ``∂τ`` to the Reeb field and ``ê1`` to ``-ê2``.
    """
    _, th, x, y = _split(p)
    return _jhat_from(x, y, f.q(th), f.q_prime(th))


def eval_Jhat_tangent(p, dp, f):
    """Directional derivative of :func:`eval_Jhat` at ``p`` along ``dp``.

    Forward-mode: the entries are polynomials in ``(x, y, q, q')`` and the
    tangents propagate through them by the product rule.
    """
    _, th, x, y = _split(p)
    dp = np.asarray(dp, dtype=float)
    dth, dx, dy = dp[..., 1], dp[..., 2], dp[..., 3]
    Q, P = f.q(th), f.q_prime(th)
    dQ = f.q_prime(th) * dth
    dP = f.q_second(th) * dth
    w = x + Q * y
    dw = dx + dQ * y + Q * dy
    m = w * Q - y * P
    dm = dw * Q + w * dQ - dy * P - y * dP
    yP = y * P
    dyP = dy * P + y * dP
    dJ = np.zeros(np.broadcast(x, dx).shape + (4, 4))
    dJ[..., 0, 1] = -dw
    dJ[..., 1, 1] = dyP
    dJ[..., 1, 3] = dQ
    dJ[..., 2, 0] = -dQ
    dJ[..., 2, 1] = dyP * m + yP * dm
    dJ[..., 2, 2] = dm
    dJ[..., 2, 3] = dQ * m + Q * dm
    dJ[..., 3, 1] = -(dw * yP + w * dyP)
    dJ[..., 3, 2] = -dw
    dJ[..., 3, 3] = -(dw * Q + w * dQ)
    return dJ


def eval_Jhat_partials(p, f):
    """Stack of partial derivatives ``∂Ĵ/∂v_k``, shape ``(..., 4, 4, 4)`` with k last."""
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(4):
        e = np.zeros(p.shape)
        e[..., k] = 1.0
        cols.append(eval_Jhat_tangent(p, e, f))
    return np.stack(cols, axis=-1)


def eval_Omega(p, f):
    """Compatible skew form for :func:`eval_Jhat` in the flattened chart.

    Upper-triangle entries: ``Ω12 = C(x+qy) - q q' y``, ``Ω13 = -q``,
    ``Ω14 = C - q²``, ``Ω23 = -1``, ``Ω24 = Ω34 = 0``. At ``x = y = 0`` the
    product ``ΩĴ`` is ``[[C, q], [q, 1]] ⊕ [[1, 0], [0, C - q²]]``.
    """
    _, th, x, y = _split(p)
    Q, P = f.q(th), f.q_prime(th)
    C = f.C
    O = np.zeros(np.shape(x) + (4, 4))
    O[..., 0, 1] = C * (x + Q * y) - Q * P * y
    O[..., 0, 2] = -Q
    O[..., 0, 3] = C - Q * Q
    O[..., 1, 2] = -1.0
    return O - np.swapaxes(O, -1, -2)


def eval_Omega_tangent(p, dp, f):
    """Directional derivative of :func:`eval_Omega`."""
    _, th, x, y = _split(p)
    dp = np.asarray(dp, dtype=float)
    dth, dx, dy = dp[..., 1], dp[..., 2], dp[..., 3]
    Q, P, PP = f.q(th), f.q_prime(th), f.q_second(th)
    dQ, dP = P * dth, PP * dth
    C = f.C
    O = np.zeros(np.broadcast(x, dx).shape + (4, 4))
    O[..., 0, 1] = C * (dx + dQ * y + Q * dy) - (dQ * P * y + Q * dP * y + Q * P * dy)
    O[..., 0, 2] = -dQ
    O[..., 0, 3] = -2.0 * Q * dQ
    return O - np.swapaxes(O, -1, -2)


def eval_Omega_unflattened(p, C, q_value):
    """The same form written in the unflattened chart.

    ``Ω12 = Cx``, ``Ω13 = -q``, ``Ω14 = C``, ``Ω23 = -1``, ``Ω24 = q``,
    ``Ω34 = 0``; it is compatible with :func:`eval_J_simple`.
    """
    p = np.asarray(p, dtype=float)
    x = p[..., 2]
    Q = np.broadcast_to(np.asarray(q_value, dtype=float), np.shape(x))
    O = np.zeros(np.shape(x) + (4, 4))
    O[..., 0, 1] = C * x
    O[..., 0, 2] = -Q
    O[..., 0, 3] = C
    O[..., 1, 2] = -1.0
    O[..., 1, 3] = Q
    return O - np.swapaxes(O, -1, -2)


def eval_J_simple(p):
    """Almost complex structure in the unflattened chart (λ = dy + x dθ)."""
    p = np.asarray(p, dtype=float)
    x = p[..., 2]
    J = np.zeros(np.shape(x) + (4, 4))
    J[..., 0, 1] = -x
    J[..., 0, 3] = -1.0
    J[..., 1, 2] = 1.0
    J[..., 2, 1] = -1.0
    J[..., 3, 0] = 1.0
    J[..., 3, 2] = -x
    return J


@dataclass
class CompatibilityReport:
    n_points: int
    square_error: float
    symmetry_error: float
    invariance_error: float
    min_eigenvalue: float
    lagrangian_knot: float
    lagrangian_surface: float
    witness: np.ndarray | None = None

    def passed(self, tol=1e-12, margin=1e-8):
        return (
            max(self.square_error, self.symmetry_error, self.invariance_error) <= tol
            and self.min_eigenvalue > margin
            and max(self.lagrangian_knot, self.lagrangian_surface) <= tol
        )

    def to_dict(self):
        return {
            "n_points": self.n_points,
            "square_error": self.square_error,
            "symmetry_error": self.symmetry_error,
            "invariance_error": self.invariance_error,
            "min_eigenvalue": self.min_eigenvalue,
            "lagrangian_knot": self.lagrangian_knot,
            "lagrangian_surface": self.lagrangian_surface,
        }


def _rel(err, scale):
    return float(np.max(err / np.maximum(1.0, scale)))


def compatibility_report(f, points, raise_on_failure=True):
    """Check Ĵ² = -1, ΩĴ symmetric and positive, ĴᵀΩĴ = Ω, and the two Lagrangian conditions.

    Errors are measured entrywise, relative to the size of the matrices
    involved (``max(1, |entry scale|)``), since ``C`` can be large.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    J = eval_Jhat(pts, f)
    O = eval_Omega(pts, f)
    eye = np.eye(4)
    scaleJ = np.abs(J).max(axis=(-2, -1))
    scaleO = np.abs(O).max(axis=(-2, -1))
    sq = np.abs(J @ J + eye).max(axis=(-2, -1))
    G = O @ J
    sym = np.abs(G - np.swapaxes(G, -1, -2)).max(axis=(-2, -1))
    inv = np.abs(np.swapaxes(J, -1, -2) @ O @ J - O).max(axis=(-2, -1))
    Gs = 0.5 * (G + np.swapaxes(G, -1, -2))
    eig = np.linalg.eigvalsh(Gs)[..., 0]
    # Lagrangian checks on the two boundary pieces through each sample angle
    th = pts[:, 1]
    knot = np.zeros_like(pts)
    knot[:, 0], knot[:, 1] = pts[:, 0], th
    surf = np.zeros_like(pts)
    surf[:, 1], surf[:, 3] = th, pts[:, 3]
    lk = np.abs(eval_Omega(knot, f)[:, 0, 1])
    ls = np.abs(eval_Omega(surf, f)[:, 1, 3])
    i = int(np.argmin(eig))
    rep = CompatibilityReport(
        n_points=len(pts),
        square_error=_rel(sq, scaleJ**2),
        symmetry_error=_rel(sym, scaleJ * scaleO),
        invariance_error=_rel(inv, scaleJ**2 * scaleO),
        min_eigenvalue=float(eig[i]),
        lagrangian_knot=float(lk.max()),
        lagrangian_surface=float(ls.max()),
        witness=pts[i].copy(),
    )
    if raise_on_failure and rep.min_eigenvalue <= 0.0:
        raise PositivityFailure(
            f"ΩĴ not positive definite at {pts[i].tolist()} (min eigenvalue {rep.min_eigenvalue:.3e})",
            witness=pts[i].copy(),
            min_eigenvalue=rep.min_eigenvalue,
        )
    return rep


def sample_chart_points(rng, n, f, bound=DEFAULT_CHART_BOUND, tau_range=(-1.0, 1.0)):
    """Uniform samples of the working chart: θ in the field's range, |x|,|y| ≤ bound."""
    lo, hi = f.theta_range
    if not np.isfinite(lo) or not np.isfinite(hi):
        lo, hi = 0.0, 1.0
    pts = np.empty((n, 4))
    pts[:, 0] = rng.uniform(*tau_range, n)
    pts[:, 1] = rng.uniform(lo, hi, n)
    pts[:, 2] = rng.uniform(-bound, bound, n)
    pts[:, 3] = rng.uniform(-bound, bound, n)
    return pts
