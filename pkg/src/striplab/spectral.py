"""Spectrum of the asymptotic operator ``A∞ = -M∞ d/dt`` with mixed boundary data.

Paths ``γ: [0,1] → R^4`` satisfy ``γ(0) ∈ L0 = span{e1, e2}`` and
``γ(1) ∈ L1 = span{e2, e4}``. The eigen-equation ``-M∞γ' = λγ`` integrates to
``γ(t) = exp(λtM∞)γ(0)`` because ``M∞⁻¹ = -M∞``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .contact import J0, contact_frame, eval_Jhat, eval_Omega
from .errors import FrameDegenerate, NoGap, NotInSpectrum, NotSymmetric, RangeTooCoarse

HALF_PI = 0.5 * np.pi

L0_BASIS = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
L1_BASIS = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
# components that must vanish at each end
_ZERO_AT_0 = (2, 3)
_ZERO_AT_1 = (0, 2)


def build_Minf(q0):
    """``Ĵ`` at the origin of the flattened chart for ``q(0) = q0``."""
    q0 = float(q0)
    return np.array(
        [
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, q0],
            [-q0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    )


@dataclass(frozen=True)
class AsymptoticOperator:
    q0: float
    M_inf: np.ndarray = field(repr=False)

    @classmethod
    def from_q0(cls, q0):
        return cls(float(q0), build_Minf(q0))


@dataclass
class SpectrumReport:
    method: str
    q0: float
    eigenvalues: list
    multiplicities: list
    n: int | None = None
    gaps: list = field(default_factory=list)
    imag_parts: list = field(default_factory=list)
    discarded: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "method": self.method,
            "q0": self.q0,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "multiplicities": [int(m) for m in self.multiplicities],
            "gaps": [[float(a), float(b)] for a, b in self.gaps],
        }
        if self.n is not None:
            out["n"] = int(self.n)
        return out


def shooting_determinant(lam, M):
    """``det`` of the end-point components {τ, x} of ``exp(λM)`` applied to L0."""
    E = sla.expm(lam * M)
    Y = E @ L0_BASIS.T
    return float(np.linalg.det(Y[list(_ZERO_AT_1), :]))


def spectrum_shooting(op, search_range, step=0.05, xtol=1e-12):
    """Eigenvalues in ``search_range`` as sign changes of the shooting determinant."""
    lo, hi = map(float, search_range)
    if not lo < hi:
        raise ValueError("search_range must satisfy lo < hi")
    n = max(int(np.ceil((hi - lo) / step)), 1)
    grid = np.linspace(lo, hi, n + 1)
    D = np.array([shooting_determinant(x, op.M_inf) for x in grid])
    f = lambda x: shooting_determinant(x, op.M_inf)
    roots = []
    floor = 1e-14
    for i in range(n):
        a, b, da, db = grid[i], grid[i + 1], D[i], D[i + 1]
        if abs(da) <= floor:
            roots.append(a)
        elif da * db < 0.0:
            roots.append(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    if abs(D[-1]) <= floor:
        roots.append(hi)
    roots = sorted(set(float(r) for r in roots))
    # multiplicity from the slope at the root: a simple zero has D' != 0
    mult = []
    h = 1e-6
    for r in roots:
        slope = (f(r + h) - f(r - h)) / (2 * h)
        mult.append(1 if abs(slope) > 1e-6 else 2)
    k_lo, k_hi = int(np.ceil(lo / HALF_PI - 1e-12)), int(np.floor(hi / HALF_PI + 1e-12))
    for k in range(k_lo, k_hi + 1):
        if not any(abs(r - k * HALF_PI) < 1e-8 for r in roots):
            raise RangeTooCoarse(f"bracketing with step {step} missed the candidate {k}·π/2")
    return SpectrumReport("shooting", op.q0, roots, mult)


def _fd_matrices(M, n):
    """Box-scheme pencil ``(A, B)`` on ``n`` nodes with the boundary data eliminated.

    Cell ``j`` carries ``-M(γ_{j+1} - γ_j)/h = λ(γ_{j+1} + γ_j)/2``. Node 0 keeps
    the L0 components, node ``n-1`` keeps the L1 components.
    """
    h = 1.0 / (n - 1)
    keep = [[0, 1]] + [[0, 1, 2, 3]] * (n - 2) + [[1, 3]]
    offsets = np.cumsum([0] + [len(k) for k in keep])
    N = int(offsets[-1])
    A = np.zeros((4 * (n - 1), N))
    B = np.zeros((4 * (n - 1), N))
    for j in range(n - 1):
        rows = slice(4 * j, 4 * j + 4)
        for node, sgn in ((j, -1.0), (j + 1, 1.0)):
            cols = offsets[node] + np.arange(len(keep[node]))
            A[rows, cols] += -sgn * M[:, keep[node]] / h
            B[rows, cols] += 0.5 * np.eye(4)[:, keep[node]]
    return A, B


def _pencil_eigs_dense(A, B):
    w = sla.eig(A, B, right=False)
    return w[np.isfinite(w)]


def _pencil_eigs_near(A, B, lo, hi):
    """Finite eigenvalues of ``(A, B)`` in ``[lo, hi]`` by shift-invert Arnoldi.

    The shift sits near the middle of the window; ``k`` grows until the
    farthest computed eigenvalue lies outside the window, so none is missed.
    """
    A = sps.csc_matrix(A)
    B = sps.csc_matrix(B)
    N = A.shape[0]
    sigma = 0.5 * (lo + hi) + 0.1234567 * (hi - lo) / 7.0
    lu = spla.splu((A - sigma * B).tocsc())
    op = spla.LinearOperator((N, N), matvec=lambda x: lu.solve(B @ x), dtype=float)
    radius = max(hi - sigma, sigma - lo)
    k = min(16, N - 2)
    while True:
        mu = spla.eigs(op, k=k, which="LM", return_eigenvectors=False, tol=1e-14, v0=np.ones(N))
        mu = mu[np.abs(mu) > 0]
        lam = sigma + 1.0 / mu
        if k >= N - 2 or np.abs(lam - sigma).max() > radius:
            return lam
        k = min(2 * k, N - 2)


def spectrum_fd(op, n, search_range, imag_factor=10.0, dense=False):
    """Eigenvalues of the box-scheme discretisation on ``n`` nodes.

    The scheme is second order; its eigenvalues are ``(2/h) tan(kπh/4)``.
    Complex eigenvalues whose imaginary part exceeds ``imag_factor`` times
    the real error model ``λ³h²/12`` are discarded and listed separately.
    ``dense=True`` runs the full QZ decomposition instead of shift-invert
    Arnoldi; both return the same eigenvalues inside the window.
    """
    if n < 16:
        raise ValueError("spectrum_fd needs n >= 16")
    lo, hi = map(float, search_range)
    A, B = _fd_matrices(op.M_inf, n)
    w = _pencil_eigs_dense(A, B) if dense else _pencil_eigs_near(A, B, lo, hi)
    h = 1.0 / (n - 1)
    keep, imag, dropped = [], [], []
    for z in w:
        model = abs(z.real) ** 3 * h * h / 12.0 + 1e-12
        if lo <= z.real <= hi:
            if abs(z.imag) > imag_factor * model:
                dropped.append(complex(z))
            else:
                keep.append(float(z.real))
                imag.append(float(abs(z.imag)))
    order = np.argsort(keep)
    vals = [keep[i] for i in order]
    return SpectrumReport(
        "finite-difference",
        op.q0,
        vals,
        [1] * len(vals),
        n=n,
        imag_parts=[imag[i] for i in order],
        discarded=dropped,
    )


@dataclass(frozen=True)
class EigenvectorFn:
    """Closed-form eigenvector ``e(t)`` of ``A∞`` for ``λ ∈ (π/2)Z``."""

    lam: float
    q0: float
    kappa: float
    parity: str

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(self.lam * t), np.sin(self.lam * t)
        z = np.zeros_like(t)
        if self.parity == "even":
            return self.kappa * np.stack([z, c, -s, z], axis=-1)
        return -self.kappa * np.stack([c, -self.q0 * c, z, s], axis=-1)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(self.lam * t), np.sin(self.lam * t)
        z = np.zeros_like(t)
        L = self.lam
        if self.parity == "even":
            return self.kappa * L * np.stack([z, -s, -c, z], axis=-1)
        return -self.kappa * L * np.stack([-s, self.q0 * s, z, c], axis=-1)


def analytic_eigenvector(lam, q0, kappa=1.0, tol=1e-9):
    """Eigenvector for ``λ = kπ/2``: even ``k`` gives the even family, odd ``k`` the odd one."""
    if kappa == 0:
        raise ValueError("kappa must be non-zero")
    k = lam / HALF_PI
    kr = round(k)
    if abs(k - kr) > tol:
        raise NotInSpectrum(f"{lam} is not an integer multiple of π/2")
    return EigenvectorFn(float(lam), float(q0), float(kappa), "even" if kr % 2 == 0 else "odd")


def eigen_ode_residual(e, op, n=2001):
    """``max |ė - λM∞e|`` on a fine grid plus the end-point violations."""
    t = np.linspace(0.0, 1.0, n)
    E = e(t)
    if hasattr(e, "derivative"):
        dE = e.derivative(t)
    else:
        dE = np.gradient(E, t, axis=0, edge_order=2)
    ode = np.abs(dE - e.lam * E @ op.M_inf.T).max()
    bc = max(np.abs(E[0, list(_ZERO_AT_0)]).max(), np.abs(E[-1, list(_ZERO_AT_1)]).max())
    return float(ode + bc)


@dataclass(frozen=True)
class PerturbedEigenvector:
    """``base(t) + offset`` as a path, for residual experiments."""

    base: EigenvectorFn
    offset: np.ndarray

    @property
    def lam(self):
        return self.base.lam

    def __call__(self, t):
        return self.base(t) + self.offset

    def derivative(self, t):
        return self.base.derivative(t)


def hausdorff(a, b):
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[None, :]
    d = np.abs(a - b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def kato_distance(T_mat, A0, tol=1e-12):
    """Hausdorff distance between ``σ(T)`` and ``σ(T + A0)`` and the bound ``‖A0‖``."""
    T_mat = np.asarray(T_mat, dtype=float)
    A0 = np.asarray(A0, dtype=float)
    for name, X in (("T", T_mat), ("A0", A0)):
        if np.abs(X - X.T).max() > tol * max(1.0, np.abs(X).max()):
            raise NotSymmetric(f"{name} is not symmetric")
    s0 = np.linalg.eigvalsh(T_mat)
    s1 = np.linalg.eigvalsh(T_mat + A0)
    return hausdorff(s0, s1), float(np.linalg.norm(A0, 2))


def symmetric_surrogate(m):
    """Symmetric staggered discretisation of ``A∞`` on ``m`` cells per block.

    Under ``q0 = 0`` the operator splits into two 2×2 blocks, ``(γ2, γ3)``
    with ``γ3 = 0`` at both ends (spectrum πZ) and ``(γ1, γ4)`` with
    ``γ4(0) = 0``, ``γ1(1) = 0`` (spectrum π/2 + πZ). Each block becomes
    ``[[0, G], [Gᵀ, 0]]`` with a one-sided difference ``G``, so the result is
    exactly symmetric and its eigenvalues are ``±`` the singular values of ``G``.
    """
    # even block: γ3 on interior nodes 1..m-1, γ2 on the m cell midpoints
    h = 1.0 / m
    Ge = np.zeros((m, m - 1))
    for j in range(m):
        if j < m - 1:
            Ge[j, j] -= 1.0 / h
        if j > 0:
            Ge[j, j - 1] += 1.0 / h
    # odd block: γ4 on nodes 1..m, γ1 on midpoints 1/2..m-1/2, γ1(1) = 0 at the ghost
    ho = 1.0 / (m + 0.5)
    Go = np.zeros((m, m))
    for j in range(m):
        Go[j, j] += 1.0 / ho
        if j > 0:
            Go[j, j - 1] -= 1.0 / ho
    def block(G):
        r, c = G.shape
        K = np.zeros((r + c, r + c))
        K[:r, r:] = G
        K[r:, :r] = G.T
        return K

    return sla.block_diag(block(Ge), block(Go))


def random_symmetric(rng, n, norm):
    X = rng.normal(size=(n, n))
    X = 0.5 * (X + X.T)
    return X * (norm / np.linalg.norm(X, 2))


@dataclass
class GapInterval:
    n: int
    lo: float
    hi: float
    center: float
    half_width: float


def spectral_gaps(spectra, L, lam_range=None, margin=None):
    """Largest eigenvalue-free subinterval of each ``[nL, (n+1)L]``.

    ``spectra`` is a family of eigenvalue lists (one per s). Intervals that
    lie inside ``lam_range`` are scanned; by default the range spanned by all
    supplied eigenvalues. Gap ends that sit on an eigenvalue are pulled in by
    ``margin`` (default ``1e-6 L``) so reported gaps miss every eigenvalue.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    margin = 1e-6 * L if margin is None else margin
    pts = np.sort(np.concatenate([np.asarray(s, dtype=float) for s in spectra])) if spectra else np.array([])
    if lam_range is None:
        if pts.size == 0:
            lam_range = (0.0, L)
        else:
            lam_range = (pts.min(), pts.max())
    n_lo = int(np.ceil(lam_range[0] / L - 1e-12))
    n_hi = int(np.floor(lam_range[1] / L + 1e-12)) - 1
    out = []
    for n in range(n_lo, n_hi + 1):
        a, b = n * L, (n + 1) * L
        inside = pts[(pts >= a) & (pts <= b)]
        cuts = np.concatenate([[a], inside, [b]])
        is_eig = np.concatenate([[np.any(np.isclose(pts, a, atol=0, rtol=0))], np.ones(inside.size, bool), [np.any(pts == b)]])
        lengths = np.diff(cuts)
        k = int(np.argmax(lengths))
        lo = cuts[k] + (margin if is_eig[k] else 0.0)
        hi = cuts[k + 1] - (margin if is_eig[k + 1] else 0.0)
        if hi <= lo:
            raise NoGap(f"[{a:.6g}, {b:.6g}] is covered by the supplied spectra")
        out.append(GapInterval(n, lo, hi, 0.5 * (lo + hi), 0.5 * (hi - lo)))
    return out


def _g_inner(G, u, w):
    return np.einsum("...i,...ij,...j->...", u, G, w)


def build_trivialization(f, values, tol=1e-10):
    """Matrix field ``T`` with ``TᵀT = ΩĴ`` and ``TĴ = J0 T``.

    ``values`` is a ``(..., 4)`` array of chart points (for instance
    ``FieldGrid.values``). The contact-plane generator ``ê1`` is normalised
    in the metric ``ΩĴ`` and sent to ``(0, 1) ∈ C²``; ``∂τ`` is then
    orthonormalised against ``{ê1, Ĵê1}`` and sent to ``(1, 0)``.
    """
    values = np.asarray(values, dtype=float)
    M = eval_Jhat(values, f)
    G = eval_Omega(values, f) @ M
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    e1, _ = contact_frame(values, f)
    n1 = _g_inner(G, e1, e1)
    if np.any(n1 <= tol):
        raise FrameDegenerate("contact generator has vanishing length")
    f1 = e1 / np.sqrt(n1)[..., None]
    Mf1 = np.einsum("...ij,...j->...i", M, f1)
    d = np.zeros(values.shape)
    d[..., 0] = 1.0
    d = d - _g_inner(G, d, f1)[..., None] * f1 - _g_inner(G, d, Mf1)[..., None] * Mf1
    n2 = _g_inner(G, d, d)
    if np.any(n2 <= tol):
        raise FrameDegenerate("∂τ lies in the complex span of the contact generator")
    f2 = d / np.sqrt(n2)[..., None]
    Mf2 = np.einsum("...ij,...j->...i", M, f2)
    Tinv = np.stack([f2, Mf2, f1, Mf1], axis=-1)
    return np.linalg.inv(Tinv)


def trivialization_errors(f, values, T):
    """Max entrywise errors of ``TᵀT - ΩĴ``, ``TĴ - J0T`` and ``TᵀJ0T + Ω``."""
    M = eval_Jhat(values, f)
    O = eval_Omega(values, f)
    Tt = np.swapaxes(T, -1, -2)
    return (
        float(np.abs(Tt @ T - O @ M).max()),
        float(np.abs(T @ M - J0 @ T).max()),
        float(np.abs(Tt @ J0 @ T + O).max()),
    )
