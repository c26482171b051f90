"""Spline-edge network that turns pooled history statistics into a global
conditioning token.

Every edge applies phi(x) = w_b * silu(x) + w_s * sum_r c_r B_r(x) with an
order-k B-spline basis on fixed uniform knots over [-1, 1]; a layer output
coordinate is the sum of its incoming edges.  Edge derivatives admit the
closed bound |w_b| L_b + |w_s| (2 / h_min) ||c||_1 (L_b = 1.1 covers the
silu slope), which composes into layer and network Lipschitz bounds used
by the verification suite.
"""

import dataclasses

import numpy as np

from . import autodiff as ad
from . import bsplines

SILU_SLOPE_BOUND = 1.1  # sup |d silu/dx| = 1.0998...


@dataclasses.dataclass
class KanLayerParams:
    coeffs: np.ndarray  # (d_out, d_in, G + k)
    w_b: np.ndarray  # (d_out, d_in)
    w_s: np.ndarray  # (d_out, d_in)
    # fixed after init; the constant marker keeps the knot grid out of the
    # trainable-parameter walk and off gradient tapes
    knots: np.ndarray = dataclasses.field(metadata={"constant": True})
    order: int = 3


@dataclasses.dataclass
class KanParams:
    layers: list


def init_kan(rng, dims, grid_size=8, order=3, coeff_scale=0.1):
    """Network with widths `dims`, e.g. [d0, 2*d0, token_dim]."""
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        knots = np.tile(bsplines.uniform_knots(grid_size, order), (d_in, 1))
        layers.append(
            KanLayerParams(
                coeffs=rng.normal(0.0, coeff_scale, (d_out, d_in, grid_size + order)),
                w_b=np.ones((d_out, d_in)),
                w_s=np.ones((d_out, d_in)),
                knots=knots,
                order=order,
            )
        )
    return KanParams(layers)


def pool_history(history, mode="mean"):
    """Flatten (L, X, Y, C) history into a length L*C summary vector.

    mean: spatial average per frame and channel; center: value at the
    spatial midpoint (floor(X/2), floor(Y/2)).  Frame-major ordering.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 4:
        raise ValueError(f"history must be (L, X, Y, C), got {history.shape}")
    if mode == "mean":
        pooled = history.mean(axis=(1, 2))
    elif mode == "center":
        pooled = history[:, history.shape[1] // 2, history.shape[2] // 2, :]
    else:
        raise ValueError(f"unknown pooling mode {mode!r}")
    return pooled.reshape(-1)


class TokenNormalizer:
    """Expand-only running min/max, mapping observed values into [-1, 1]."""

    def __init__(self, dim):
        self.lo = np.full(dim, -1.0)
        self.hi = np.full(dim, 1.0)

    def update(self, z):
        self.lo = np.minimum(self.lo, z)
        self.hi = np.maximum(self.hi, z)

    def apply(self, z):
        center = 0.5 * (self.lo + self.hi)
        half = np.maximum(0.5 * (self.hi - self.lo), 1e-12)
        return (z - center) / half

    def state(self):
        return np.stack([self.lo, self.hi])

    @classmethod
    def from_state(cls, arr):
        obj = cls(arr.shape[1])
        obj.lo, obj.hi = arr[0].copy(), arr[1].copy()
        return obj


def kan_edge(x, w_b, w_s, coeffs, knots, order):
    """Scalar edge response; mirrors one (j, i) entry of a layer."""
    basis = bsplines.basis_matrix(np.atleast_1d(np.float64(x)), knots, order)[0]
    s = 1.0 / (1.0 + np.exp(-x))
    return w_b * (x * s) + w_s * float(basis @ coeffs)


def kan_layer_forward(x, p):
    """One layer on a Tensor [d_in] -> Tensor [d_out].

    p holds Tensor-valued coeffs/w_b/w_s (tape-wrapped) and constant knots.
    The edge evaluation (spline mix plus silu base path) runs as one taped
    op; the spline basis keeps its own op so reverse mode picks up the
    basis derivative with respect to the inputs.
    """
    knots = p.knots.data if isinstance(p.knots, ad.Tensor) else p.knots
    xt = x if isinstance(x, ad.Tensor) else ad.Tensor(x)
    coeffs = p.coeffs if isinstance(p.coeffs, ad.Tensor) else ad.Tensor(p.coeffs)
    w_b = p.w_b if isinstance(p.w_b, ad.Tensor) else ad.Tensor(p.w_b)
    w_s = p.w_s if isinstance(p.w_s, ad.Tensor) else ad.Tensor(p.w_s)
    bases = bsplines.basis_op(xt, knots, p.order)  # (d_in, R)
    xs = xt.data
    with np.errstate(over="ignore", invalid="ignore"):
        sig = 1.0 / (1.0 + np.exp(-xs))
        sil = xs * sig
    spline = np.einsum("jir,ir->ji", coeffs.data, bases.data)  # (d_out, d_in)
    edges = w_b.data * sil + w_s.data * spline
    out = edges.sum(axis=1)

    def vjp(g):
        gj = g[:, None]
        gws_spline = gj * w_s.data  # (d_out, d_in), shared by two grads
        return (
            (g @ w_b.data) * (sig * (1.0 + xs * (1.0 - sig))),   # x (silu path)
            np.einsum("ji,jir->ir", gws_spline, coeffs.data),    # bases
            gws_spline[:, :, None] * bases.data[None],           # coeffs
            gj * sil,                                            # w_b
            gj * spline,                                         # w_s
        )

    return ad.custom("kan_layer", out, (xt, bases, coeffs, w_b, w_s), vjp)


def kan_forward(params, z):
    """Full network: Tensor or array [d0] -> token Tensor."""
    x = z if isinstance(z, ad.Tensor) else ad.Tensor(z)
    for layer in params.layers:
        x = kan_layer_forward(x, layer)
    return x


# ---------------------------------------------------------------------------
# Lipschitz bounds


def knot_min_spacing(knots):
    return float(np.diff(np.asarray(knots, dtype=np.float64), axis=-1).min())


def edge_lipschitz_bound(w_b, w_s, coeffs, h_min):
    """|w_b| L_b + |w_s| (2 / h_min) ||c||_1 for a single edge."""
    return abs(w_b) * SILU_SLOPE_BOUND + abs(w_s) * (2.0 / h_min) * np.abs(coeffs).sum()


def layer_lipschitz_matrix(p):
    """Per-edge bounds as a (d_out, d_in) matrix."""
    h_min = knot_min_spacing(p.knots)
    return (
        np.abs(p.w_b) * SILU_SLOPE_BOUND
        + np.abs(p.w_s) * (2.0 / h_min) * np.abs(p.coeffs).sum(axis=2)
    )


def layer_lipschitz_bound(p, norm="inf"):
    mat = layer_lipschitz_matrix(p)
    if norm == "inf":
        return float(mat.sum(axis=1).max())
    if norm == "2":
        return float(np.linalg.svd(mat, compute_uv=False)[0])
    raise ValueError(f"unknown norm {norm!r}")


def kan_lipschitz_bound(params, norm="inf"):
    """Product of layer bounds; valid for the matching vector norms."""
    out = 1.0
    for layer in params.layers:
        out *= layer_lipschitz_bound(layer, norm)
    return out


def token_magnitude_bound(params, input_bound=1.0):
    """Per-coordinate cap on |output| for inputs with |z_i| <= input_bound.

    Uses |silu(x)| <= |x| and |sum_r c_r B_r(x)| <= max_r |c_r| (the bases
    are a partition of unity on the clamped domain), folded through the
    layers.  Returns the output-layer cap vector.
    """
    cap = np.full(params.layers[0].w_b.shape[1], float(input_bound))
    for p in params.layers:
        spline_cap = np.abs(p.coeffs).max(axis=2)
        cap = (np.abs(p.w_b) * cap[None, :] + np.abs(p.w_s) * spline_cap).sum(axis=1)
    return cap
