"""Sampled fields ``v(s, t) ∈ R^4`` on a rectangular parameter grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, IoFailure

CSV_HEADER = ["s", "t", "tau", "theta", "x", "y"]


@dataclass
class FieldGrid:
    """Values of a map on the uniform grid ``s × t``.

    ``values[i, j]`` is the 4-vector ``(τ, θ, x, y)`` at ``(s[i], t[j])``.
    """

    s: np.ndarray
    t: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.s.size < 3 or self.t.size < 3:
            raise GridMismatch("a grid needs at least 3 nodes in each direction")
        if self.values.shape != (self.s.size, self.t.size, 4):
            raise GridMismatch(
                f"values have shape {self.values.shape}, expected {(self.s.size, self.t.size, 4)}"
            )

    @classmethod
    def uniform(cls, s_range, n_s, n_t, t_range=(0.0, 1.0)):
        s = np.linspace(s_range[0], s_range[1], n_s)
        t = np.linspace(t_range[0], t_range[1], n_t)
        return cls(s, t, np.zeros((n_s, n_t, 4)))

    @classmethod
    def from_function(cls, fn, s_range, n_s, n_t, t_range=(0.0, 1.0)):
        """Sample ``fn(S, T) -> (..., 4)`` on a uniform grid."""
        s = np.linspace(s_range[0], s_range[1], n_s)
        t = np.linspace(t_range[0], t_range[1], n_t)
        S, T = np.meshgrid(s, t, indexing="ij")
        return cls(s, t, fn(S, T))

    @property
    def n_s(self):
        return self.s.size

    @property
    def n_t(self):
        return self.t.size

    @property
    def h_s(self):
        return float(self.s[1] - self.s[0])

    @property
    def h_t(self):
        return float(self.t[1] - self.t[0])

    @property
    def s_range(self):
        return (float(self.s[0]), float(self.s[-1]))

    def mesh(self):
        return np.meshgrid(self.s, self.t, indexing="ij")

    def with_values(self, values):
        return FieldGrid(self.s.copy(), self.t.copy(), values, dict(self.meta))

    def copy(self):
        return self.with_values(self.values.copy())

    def to_csv(self, path):
        S, T = self.mesh()
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_HEADER)
                for i in range(self.n_s):
                    for j in range(self.n_t):
                        row = (S[i, j], T[i, j], *self.values[i, j])
                        w.writerow([format(float(v), ".17g") for v in row])
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def from_csv(cls, path):
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            with open(path) as fh:
                header = fh.readline().strip().split(",")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if header != CSV_HEADER:
            raise GridMismatch(f"unexpected header {header}")
        s = np.unique(data[:, 0])
        t = np.unique(data[:, 1])
        if len(data) != s.size * t.size:
            raise GridMismatch("rows do not form a full s × t grid")
        return cls(s, t, data[:, 2:].reshape(s.size, t.size, 4))
