"""B-spline bases via the Cox-de Boor recursion.

Conventions: a spline of order k (polynomial degree k) over a grid of G
intervals uses G + 2k + 1 strictly increasing knots and G + k basis
functions.  Inputs are clamped to the grid interior [t_k, t_{G+k}]; the
right edge is pulled in by a hair so the half-open degree-0 intervals
keep the partition of unity at the boundary.
"""

import numpy as np

from . import autodiff

_EDGE_EPS = 1e-9


def uniform_knots(grid_size, order, lo=-1.0, hi=1.0):
    """Uniform knot vector with k-fold extension beyond [lo, hi]."""
    if grid_size < 1 or order < 1:
        raise ValueError(f"need grid_size >= 1 and order >= 1, got {grid_size}, {order}")
    h = (hi - lo) / grid_size
    j = np.arange(grid_size + 2 * order + 1)
    return lo + (j - order) * h


def _clamp(x, knots, order):
    lo = knots[..., order]
    hi = knots[..., -order - 1]
    span = hi - lo
    xc = np.clip(x, lo, hi - _EDGE_EPS * span)
    inside = (x > lo) & (x < hi)
    return xc, inside


def _raise_degree(b, x_e, knots, degree):
    # one Cox-de Boor step: degree-1 bases -> degree bases
    t = knots
    left = (x_e - t[..., :-degree - 1]) / (t[..., degree:-1] - t[..., :-degree - 1])
    right = (t[..., degree + 1 :] - x_e) / (t[..., degree + 1 :] - t[..., 1:-degree])
    return left * b[..., :-1] + right * b[..., 1:]


def basis_matrix(x, knots, order):
    """All basis values at x.

    x: any shape; knots: (M,) shared or x.shape + (M,) per element.
    Returns x.shape + (G + k,).
    """
    x = np.asarray(x, dtype=np.float64)
    knots = np.asarray(knots, dtype=np.float64)
    xc, _ = _clamp(x, knots, order)
    x_e = xc[..., None]
    b = ((x_e >= knots[..., :-1]) & (x_e < knots[..., 1:])).astype(np.float64)
    for p in range(1, order + 1):
        b = _raise_degree(b, x_e, knots, p)
    return b


def basis_and_derivative(x, knots, order):
    """Basis values and d/dx, the latter via the degree-lowering identity

        dB_r^(k)/dx = k/(t_{r+k} - t_r) B_r^(k-1) - k/(t_{r+k+1} - t_{r+1}) B_{r+1}^(k-1)

    Derivatives are zeroed where x was clamped outside the grid interior.
    """
    x = np.asarray(x, dtype=np.float64)
    knots = np.asarray(knots, dtype=np.float64)
    xc, inside = _clamp(x, knots, order)
    x_e = xc[..., None]
    b = ((x_e >= knots[..., :-1]) & (x_e < knots[..., 1:])).astype(np.float64)
    for p in range(1, order):
        b = _raise_degree(b, x_e, knots, p)
    low = b  # degree k-1 bases
    k = order
    dcoef_l = k / (knots[..., k:-1] - knots[..., :-k - 1])
    dcoef_r = k / (knots[..., k + 1 :] - knots[..., 1:-k])
    deriv = dcoef_l * low[..., :-1] - dcoef_r * low[..., 1:]
    deriv = deriv * inside[..., None]
    full = _raise_degree(low, x_e, knots, k)
    return full, deriv


def basis_op(x, knots, order):
    """Differentiable basis evaluation: Tensor [d] -> Tensor [d, G + k]."""
    xt = x if isinstance(x, autodiff.Tensor) else autodiff.Tensor(x)
    full, deriv = basis_and_derivative(xt.data, knots, order)

    def vjp(g):
        return ((g * deriv).sum(axis=-1),)

    return autodiff.custom("bspline_basis", full, [xt], vjp)


def fit_least_squares(target, knots, order, n_samples=2048):
    """Least-squares spline coefficients for a callable on the grid interior."""
    knots = np.asarray(knots, dtype=np.float64)
    lo = knots[order]
    hi = knots[-order - 1]
    xs = np.linspace(lo, hi - _EDGE_EPS * (hi - lo), n_samples)
    design = basis_matrix(xs, knots, order)
    coef, *_ = np.linalg.lstsq(design, np.asarray(target(xs), dtype=np.float64), rcond=None)
    return coef
