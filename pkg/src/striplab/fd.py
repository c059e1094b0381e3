"""Finite-difference stencils on uniform grids."""

import numpy as np

# Fourth-order one-sided first-derivative weights for the two nodes nearest an edge.
_EDGE4 = (
    np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
)


def derivative(f, h, axis=0, order=2):
    """First derivative of samples ``f`` along ``axis``.

    ``order=2`` is central in the interior and one-sided second order at the
    edges. ``order=4`` uses the five-point central stencil with fourth-order
    one-sided closures. Needs at least 3 (order 2) or 5 (order 4) samples.
    """
    f = np.asarray(f, dtype=float)
    if order == 2:
        return np.gradient(f, h, axis=axis, edge_order=2)
    if order != 4:
        raise ValueError(f"unsupported order {order}")
    g = np.moveaxis(f, axis, 0)
    if g.shape[0] < 5:
        raise ValueError("fourth-order stencil needs at least 5 samples")
    out = np.empty_like(g)
    out[2:-2] = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / 12.0
    w0, w1 = _EDGE4
    out[0] = np.tensordot(w0, g[:5], axes=1)
    out[1] = np.tensordot(w1, g[:5], axes=1)
    out[-1] = -np.tensordot(w0, g[::-1][:5], axes=1)
    out[-2] = -np.tensordot(w1, g[::-1][:5], axes=1)
    return np.moveaxis(out / h, 0, axis)


def second_derivative(f, h, axis=0):
    """Three-point second difference; returns values at interior nodes only."""
    g = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / (h * h)
    return np.moveaxis(out, 0, axis)


def trapezoid_weights(n, h):
    w = np.full(n, float(h))
    w[0] = w[-1] = 0.5 * h
    return w
