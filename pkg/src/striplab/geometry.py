"""Normal-form profiles of the spanning surface near a Legendrian knot.

Near the knot the surface is ``{(θ, a(θ) r, b(θ) r)}`` in coordinates where the
contact form is ``dy + x dθ``. The pair ``(a, b)`` is a 1-periodic loop that
avoids the origin; zeros of ``b`` are the boundary singular points of the
characteristic foliation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import (
    Degenerate,
    LoopThroughOrigin,
    NotASingularPoint,
    SingularAngle,
    TangentZero,
)

ZERO_TOL = 1e-9


class ChartPoint(NamedTuple):
    """A point ``(τ, θ, x, y)`` of the symplectisation chart."""

    tau: float
    theta: float
    x: float
    y: float

    def as_array(self):
        return np.array(self, dtype=float)


class _TrigInterpolant:
    """Band-limited interpolant of uniform samples on [0, 1)."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        n = values.size
        coef = np.fft.fft(values) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real
            nyq = n // 2
            coef = np.append(coef, 0.5 * coef[nyq])
            coef[nyq] *= 0.5
            k = np.append(k, float(nyq))
        self._coef = coef
        self._k = k

    def __call__(self, theta, deriv=0):
        theta = np.asarray(theta, dtype=float)
        phase = np.exp(2j * np.pi * np.multiply.outer(theta, self._k))
        factor = (2j * np.pi * self._k) ** deriv
        return np.real(phase @ (self._coef * factor))


def _numeric_derivative(fn, h=1e-6):
    def d(theta):
        theta = np.asarray(theta, dtype=float)
        return (fn(theta + h) - fn(theta - h)) / (2.0 * h)

    return d


@dataclass(frozen=True)
class SurfaceProfile:
    """Periodic pair ``(a(θ), b(θ))`` with derivative evaluators.

    Evaluators accept scalars or arrays. Build one with :meth:`from_functions`
    for closed forms or :meth:`from_samples` for a uniform table.
    """

    a: Callable
    b: Callable
    da: Callable
    db: Callable

    @classmethod
    def from_functions(cls, a, b, da=None, db=None):
        return cls(
            a=a,
            b=b,
            da=da if da is not None else _numeric_derivative(a),
            db=db if db is not None else _numeric_derivative(b),
        )

    @classmethod
    def from_samples(cls, a_values, b_values):
        ia = _TrigInterpolant(a_values)
        ib = _TrigInterpolant(b_values)
        return cls(
            a=lambda th: ia(th),
            b=lambda th: ib(th),
            da=lambda th: ia(th, 1),
            db=lambda th: ib(th, 1),
        )

    @classmethod
    def from_csv(cls, path):
        """Read a ``theta,a,b`` table on a uniform grid over [0, 1)."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"theta", "a", "b"}:
            raise ValueError(f"{path}: expected header theta,a,b")
        if len(rows) < 16:
            raise ValueError(f"{path}: need at least 16 rows, got {len(rows)}")
        theta = np.array([float(r["theta"]) for r in rows])
        expected = np.arange(len(rows)) / len(rows)
        if not np.allclose(theta, expected, atol=1e-9):
            raise ValueError(f"{path}: theta must be the uniform grid k/N on [0,1)")
        return cls.from_samples([float(r["a"]) for r in rows], [float(r["b"]) for r in rows])

    def q(self, theta):
        return self.a(theta) / self.b(theta)

    def q_prime(self, theta):
        a, b = self.a(theta), self.b(theta)
        return (self.da(theta) * b - a * self.db(theta)) / (b * b)


def circle_profile(orientation=1):
    """``(cos 2πθ, ±sin 2πθ)``: winding number ``orientation``."""
    w = 2.0 * np.pi
    s = float(orientation)
    return SurfaceProfile(
        a=lambda th: np.cos(w * np.asarray(th)),
        b=lambda th: s * np.sin(w * np.asarray(th)),
        da=lambda th: -w * np.sin(w * np.asarray(th)),
        db=lambda th: s * w * np.cos(w * np.asarray(th)),
    )


def constant_profile(a0, b0):
    return SurfaceProfile(
        a=lambda th: np.full(np.shape(th), float(a0)),
        b=lambda th: np.full(np.shape(th), float(b0)),
        da=lambda th: np.zeros(np.shape(th)),
        db=lambda th: np.zeros(np.shape(th)),
    )


def trig_profile(a_coef, b_coef):
    """Profile from real Fourier coefficients.

    Each coefficient array has rows ``(k, cos_k, sin_k)`` meaning
    ``Σ cos_k cos 2πkθ + sin_k sin 2πkθ``.
    """

    def make(coef):
        coef = np.asarray(coef, dtype=float).reshape(-1, 3)
        k, c, s = coef[:, 0], coef[:, 1], coef[:, 2]

        def f(th, deriv=0):
            arg = 2.0 * np.pi * np.multiply.outer(np.asarray(th, dtype=float), k)
            w = (2.0 * np.pi * k) ** deriv
            # d/dθ cycles cos -> -sin -> -cos -> sin
            if deriv % 4 == 0:
                val = np.cos(arg) * c + np.sin(arg) * s
            elif deriv % 4 == 1:
                val = -np.sin(arg) * c + np.cos(arg) * s
            elif deriv % 4 == 2:
                val = -np.cos(arg) * c - np.sin(arg) * s
            else:
                val = np.sin(arg) * c - np.cos(arg) * s
            return (val * w).sum(axis=-1)

        return f

    fa, fb = make(a_coef), make(b_coef)
    return SurfaceProfile(
        a=lambda th: fa(th),
        b=lambda th: fb(th),
        da=lambda th: fa(th, 1),
        db=lambda th: fb(th, 1),
    )


class SingularityInfo(NamedTuple):
    theta0: float
    sign: str  # "positive" | "negative"
    kind: str  # "elliptic" | "hyperbolic"
    c: float


def classify_singularity(profile, theta0, tol=ZERO_TOL):
    """Sign and type of the boundary singular point at ``theta0``."""
    theta0 = float(theta0) % 1.0
    b0 = float(profile.b(theta0))
    if abs(b0) > tol:
        raise NotASingularPoint(f"b({theta0}) = {b0:.3e} is not zero")
    a0 = float(profile.a(theta0))
    if abs(a0) <= tol:
        raise Degenerate(f"a({theta0}) vanishes together with b")
    c = float(profile.db(theta0)) / a0
    if abs(c) <= tol or abs(c + 1.0) <= tol:
        raise Degenerate(f"c = {c:.6g} lies on the boundary of the classification")
    kind = "elliptic" if -1.0 < c < 0.0 else "hyperbolic"
    sign = "positive" if a0 < 0.0 else "negative"
    return SingularityInfo(theta0, sign, kind, c)


def linearization_matrix(b_coeff, c):
    """Linearized characteristic vector field at a singular point.

    The product of its eigenvalues is ``-c(1+c)``; the point is elliptic iff
    ``c(c+1) < 0``.
    """
    return np.array([[-c, -b_coeff], [0.0, 1.0 + c]], dtype=float)


def singular_points(profile, n_samples=1024, tol=ZERO_TOL):
    """All zeros of ``b`` on [0, 1), classified."""
    return [classify_singularity(profile, th, tol=max(tol, 1e-12)) for th in _zeros(profile.b, n_samples)]


def _zeros(fn, n_samples):
    theta = np.arange(n_samples + 1) / n_samples
    vals = np.asarray(fn(theta), dtype=float)
    roots = []
    for i in range(n_samples):
        lo, hi = vals[i], vals[i + 1]
        if lo == 0.0:
            roots.append(theta[i])
        elif lo * hi < 0.0:
            roots.append(brentq(lambda th: float(fn(th)), theta[i], theta[i + 1], xtol=1e-15, rtol=1e-15))
    return [r % 1.0 for r in roots]


def _angle(profile, theta):
    return np.arctan2(profile.b(theta), profile.a(theta))


def _wrap(d):
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _accumulate(profile, th0, th1, ang0, ang1, depth=0):
    d = _wrap(ang1 - ang0)
    if abs(d) <= np.pi / 2 or depth > 40:
        return d
    mid = 0.5 * (th0 + th1)
    angm = float(_angle(profile, mid))
    return _accumulate(profile, th0, mid, ang0, angm, depth + 1) + _accumulate(
        profile, mid, th1, angm, ang1, depth + 1
    )


def winding_angle(profile, n_samples=256, tol=ZERO_TOL):
    """Total angle swept by θ ↦ (a, b) over one period, in units of 2π."""
    theta = np.arange(n_samples + 1) / n_samples
    a, b = profile.a(theta), profile.b(theta)
    r = np.hypot(a, b)
    if r.min() < tol:
        i = int(r.argmin())
        raise LoopThroughOrigin(f"|(a,b)| = {r[i]:.3e} at theta = {theta[i]:.6f}")
    ang = np.arctan2(b, a)
    total = 0.0
    for i in range(n_samples):
        total += _accumulate(profile, theta[i], theta[i + 1], ang[i], ang[i + 1])
    return total / (2.0 * np.pi)


def tb_degree(profile, n_samples=256, tol=ZERO_TOL):
    """Winding number of the profile loop about the origin."""
    turns = winding_angle(profile, n_samples, tol)
    degree = round(turns)
    if abs(turns - degree) >= 0.1:
        # unresolved loop: refine once before giving up
        turns = winding_angle(profile, 4 * n_samples, tol)
        degree = round(turns)
        if abs(turns - degree) >= 0.1:
            raise LoopThroughOrigin(f"winding residual {abs(turns - degree):.3f} too large")
    return int(degree)


def tb_signed_count(profile, delta_sign, n_samples=2048, tol=ZERO_TOL):
    """Signed count of Reeb-tangency points ``Σ sign(-δ a'(θ))``.

    Sums over the zeros of ``a`` where ``b`` has the sign of δ.
    """
    delta = 1.0 if delta_sign in ("+", 1, 1.0, "positive") or (isinstance(delta_sign, (int, float)) and delta_sign > 0) else -1.0
    theta = np.arange(n_samples) / n_samples
    da = np.asarray(profile.da(theta), dtype=float)
    a = np.asarray(profile.a(theta), dtype=float)
    # a grazing zero hides from the sign-change scan; catch it via |a| and |a'| both small
    h = 1.0 / n_samples
    grazing = (np.abs(a) < 2.0 * np.abs(da) * h + tol) & (np.abs(da) < np.sqrt(tol))
    if grazing.any():
        raise TangentZero(f"a and a' both nearly vanish near theta = {theta[grazing][0]:.6f}")
    total = 0
    for th in _zeros(profile.a, n_samples):
        slope = float(profile.da(th))
        if abs(slope) <= tol:
            raise TangentZero(f"a'({th:.6f}) = {slope:.3e}")
        if np.sign(float(profile.b(th))) == delta:
            total += int(np.sign(-delta * slope))
    return total


def elliptic_normal_profile(theta_k, a, window, base_b=None, da=None, db_base=None):
    """Profile with ``b = -a(θ)(θ-θ_k)/2`` on ``|θ-θ_k| <= window``.

    Outside ``2*window`` the profile uses ``base_b``; in between the two are
    blended with a smooth cutoff. Without ``base_b`` the periodic extension
    ``-a(θ) sin(2π(θ-θ_k)) / (4π)`` is used, which agrees with the normal form
    to first order. ``b(θ_k) = 0`` always.
    """
    da = da if da is not None else _numeric_derivative(a)
    if base_b is None:
        def base_b(th):
            return -0.5 * a(th) * np.sin(2.0 * np.pi * (np.asarray(th) - theta_k)) / (2.0 * np.pi)

        def db_base(th):
            d = np.asarray(th) - theta_k
            return -0.5 * (
                da(th) * np.sin(2.0 * np.pi * d) / (2.0 * np.pi) + a(th) * np.cos(2.0 * np.pi * d)
            )
    elif db_base is None:
        db_base = _numeric_derivative(base_b)

    def offset(th):
        return (np.asarray(th, dtype=float) - theta_k + 0.5) % 1.0 - 0.5

    def normal(th):
        return -0.5 * a(th) * offset(th)

    def dnormal(th):
        return -0.5 * (da(th) * offset(th) + a(th))

    def blend(th):
        if window <= 0.0:
            return np.zeros(np.shape(th))
        u = np.abs(offset(th)) / window
        return _smooth_step(2.0 - u)

    def dblend(th):
        if window <= 0.0:
            return np.zeros(np.shape(th))
        d = offset(th)
        u = np.abs(d) / window
        return -_smooth_step_prime(2.0 - u) * np.sign(d) / window

    def b(th):
        w = blend(th)
        val = w * normal(th) + (1.0 - w) * base_b(th)
        return np.where(np.abs(offset(th)) == 0.0, 0.0, val)

    def db(th):
        w = blend(th)
        return dblend(th) * (normal(th) - base_b(th)) + w * dnormal(th) + (1.0 - w) * db_base(th)

    return SurfaceProfile(a=a, b=b, da=da, db=db)


def _smooth_step(u):
    """C^∞ step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    f = lambda z: np.where(z > 0.0, np.exp(-1.0 / np.where(z > 0.0, z, 1.0)), 0.0)
    num = f(u)
    return num / (num + f(1.0 - u))


def _smooth_step_prime(u, h=1e-7):
    return (_smooth_step(np.asarray(u) + h) - _smooth_step(np.asarray(u) - h)) / (2.0 * h)


def _q_at(profile, theta, tol):
    b = float(profile.b(theta))
    if abs(b) < tol:
        raise SingularAngle(f"b({theta}) = {b:.3e}: flattening undefined at a singular angle")
    return float(profile.a(theta)) / b


def flatten_point(p, profile, tol=ZERO_TOL):
    """``(τ, θ, x, y) ↦ (τ, θ, x - q(θ) y, y)`` with ``q = a/b``."""
    p = ChartPoint(*p)
    q = _q_at(profile, p.theta, tol)
    return ChartPoint(p.tau, p.theta, p.x - q * p.y, p.y)


def unflatten_point(p, profile, tol=ZERO_TOL):
    p = ChartPoint(*p)
    q = _q_at(profile, p.theta, tol)
    return ChartPoint(p.tau, p.theta, p.x + q * p.y, p.y)


def flatten_values(values, q):
    """Vectorized flattening of ``(..., 4)`` arrays with a callable ``q(θ)``."""
    v = np.array(values, dtype=float, copy=True)
    v[..., 2] = v[..., 2] - q(v[..., 1]) * v[..., 3]
    return v


def unflatten_values(values, q):
    v = np.array(values, dtype=float, copy=True)
    v[..., 2] = v[..., 2] + q(v[..., 1]) * v[..., 3]
    return v


def flattening_jacobian(theta, y, q, q_prime):
    """Derivative of the flattening map at an unflattened point."""
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -q_prime(theta) * y, 1.0, -q(theta)],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def random_trig_profile(rng, degree=3, min_radius=0.3, max_tries=1000):
    """Random trigonometric loop that stays away from the origin.

    Zeros of ``a`` are required to be transversal (|a'| bounded below) and
    pairwise separated, so the signed count is well conditioned.
    """
    theta = np.arange(4096) / 4096
    for _ in range(max_tries):
        ks = np.arange(1, degree + 1, dtype=float)
        scale = 1.0 / ks
        a_coef = np.column_stack([np.r_[0.0, ks], rng.normal(size=degree + 1) * np.r_[0.5, scale], np.r_[0.0, rng.normal(size=degree) * scale]])
        b_coef = np.column_stack([np.r_[0.0, ks], rng.normal(size=degree + 1) * np.r_[0.5, scale], np.r_[0.0, rng.normal(size=degree) * scale]])
        prof = trig_profile(a_coef, b_coef)
        a, b = prof.a(theta), prof.b(theta)
        if np.hypot(a, b).min() < min_radius:
            continue
        zeros = _zeros(prof.a, 4096)
        if any(abs(float(prof.da(z))) < 0.5 for z in zeros):
            continue
        if len(zeros) > 1:
            z = np.sort(zeros)
            gaps = np.diff(np.r_[z, z[0] + 1.0])
            if gaps.min() < 0.02:
                continue
        return prof, a_coef, b_coef
    raise RuntimeError("could not draw an admissible profile")


def profile_to_csv(profile, path, n=64):
    theta = np.arange(n) / n
    a, b = profile.a(theta), profile.b(theta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "a", "b"])
        for row in zip(theta, a, b):
            w.writerow([format(float(v), ".17g") for v in row])


def principal_angle_gap(profile, n_samples):
    """Largest principal-branch angle step between consecutive samples."""
    theta = np.arange(n_samples + 1) / n_samples
    ang = _angle(profile, theta)
    return float(np.abs(_wrap(np.diff(ang))).max())


__all__ = [
    "ChartPoint",
    "SurfaceProfile",
    "SingularityInfo",
    "circle_profile",
    "constant_profile",
    "trig_profile",
    "random_trig_profile",
    "classify_singularity",
    "linearization_matrix",
    "singular_points",
    "winding_angle",
    "tb_degree",
    "tb_signed_count",
    "elliptic_normal_profile",
    "flatten_point",
    "unflatten_point",
    "flatten_values",
    "unflatten_values",
    "flattening_jacobian",
    "profile_to_csv",
    "principal_angle_gap",
]
