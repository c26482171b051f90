"""Multi-scale gated spectral trunk.

Fields live on uniform [0, 1] grids as (X, Y, C) arrays; 1D problems use
Y = 1 and degenerate axes are skipped by both the spectral mixing and the
resampling.  Each layer applies a gated per-mode channel mix along y then
x, a squeeze-excitation channel rescale, and a parallel pointwise linear
path.  The trunk sums a fine-resolution stack with a coarse stack run at
a block-averaged resolution and bilinearly upsampled back (both stacks
share input and output widths, so the sum is well defined).

Retained spectrum: for axis length n only the n//2 + 1 independent modes
exist for a real output; requested modes beyond that are truncated (with
a logged warning) and the modified spectrum is Hermitian-symmetrised
before inversion, which keeps every layer output exactly real.
"""

import dataclasses
import logging

import numpy as np

from . import autodiff as ad
from . import fourier
from .util import tensorize

log = logging.getLogger(__name__)
_warned_truncations = set()


@dataclasses.dataclass
class Field:
    """Sampled function on a uniform grid; coordinates are per axis."""

    values: np.ndarray  # (X, Y, C)
    x_coords: np.ndarray
    y_coords: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"field values must be (X, Y, C), got {self.values.shape}")
        if len(self.x_coords) != self.values.shape[0] or len(self.y_coords) != self.values.shape[1]:
            raise ValueError("coordinate arrays do not match field extents")


def corner_coords(n):
    """Periodic-grid coordinates j/n on [0, 1)."""
    return np.arange(n) / n


def center_coords(n):
    """Finite-volume cell centers (j + 1/2)/n."""
    return (np.arange(n) + 0.5) / n


@dataclasses.dataclass
class SqueezeExciteParams:
    w1: np.ndarray  # (d, d // r)
    w2: np.ndarray  # (d // r, d)


@dataclasses.dataclass
class SpectralLayerParams:
    w_y: np.ndarray  # complex (m, d, d)
    g_y: np.ndarray  # (m,)
    w_x: np.ndarray  # complex (m, d, d)
    g_x: np.ndarray  # (m,)
    se: SqueezeExciteParams
    local_w: np.ndarray  # (d, d)
    local_b: np.ndarray  # (d,)


@dataclasses.dataclass
class BranchParams:
    lift_w: np.ndarray  # (c_in, d)
    lift_b: np.ndarray  # (d,)
    layers: list


@dataclasses.dataclass
class AmfnoParams:
    fine: BranchParams
    coarse: BranchParams
    downsample: int


def init_squeeze_excite(rng, d, reduction):
    if d % reduction != 0:
        raise ValueError(f"se reduction {reduction} must divide width {d}")
    hidden = d // reduction
    w1 = rng.uniform(-1, 1, (d, hidden)) / np.sqrt(d)
    w2 = rng.uniform(-1, 1, (hidden, d)) / np.sqrt(hidden)
    return SqueezeExciteParams(w1, w2)


def init_spectral_layer(rng, d, modes, reduction):
    def cw():
        return (rng.uniform(-1, 1, (modes, d, d)) + 1j * rng.uniform(-1, 1, (modes, d, d))) / d

    return SpectralLayerParams(
        w_y=cw(),
        g_y=np.ones(modes),
        w_x=cw(),
        g_x=np.ones(modes),
        se=init_squeeze_excite(rng, d, reduction),
        local_w=rng.uniform(-1, 1, (d, d)) / np.sqrt(d),
        local_b=np.zeros(d),
    )


def init_branch(rng, c_in, d, depth, modes, reduction):
    return BranchParams(
        lift_w=rng.uniform(-1, 1, (c_in, d)) / np.sqrt(c_in),
        lift_b=np.zeros(d),
        layers=[init_spectral_layer(rng, d, modes, reduction) for _ in range(depth)],
    )


def init_amfno(rng, c_in, d, depth, modes, reduction, downsample, coarse_depth=None):
    if coarse_depth is None:
        coarse_depth = depth
    return AmfnoParams(
        fine=init_branch(rng, c_in, d, depth, modes, reduction),
        coarse=init_branch(rng, c_in, d, coarse_depth, modes, reduction),
        downsample=downsample,
    )


# ---------------------------------------------------------------------------
# resampling stencils

_resample_cache = {}


def block_average_matrix(n, s):
    """(n/s, n) matrix averaging s-cell blocks; contract: s divides n."""
    if n % s != 0:
        raise ValueError(f"grid extent {n} not divisible by downsample factor {s}")
    key = ("down", n, s)
    if key not in _resample_cache:
        mat = np.zeros((n // s, n))
        for i in range(n // s):
            mat[i, s * i : s * (i + 1)] = 1.0 / s
        _resample_cache[key] = mat
    return _resample_cache[key]


def bilinear_upsample_matrix(n, s):
    """(n, n/s) periodic linear interpolation from block centers."""
    key = ("up", n, s)
    if key not in _resample_cache:
        nc = n // s
        mat = np.zeros((n, nc))
        for i in range(n):
            # position of fine cell i in coarse index coordinates
            p = (i - (s - 1) / 2) / s
            j0 = int(np.floor(p))
            frac = p - j0
            mat[i, j0 % nc] += 1.0 - frac
            mat[i, (j0 + 1) % nc] += frac
        _resample_cache[key] = mat
    return _resample_cache[key]


def resample(v, s, direction):
    """Down- or upsample both spatial axes of (X, Y, C); skips length-1 axes."""
    out = v
    for axis in (0, 1):
        n = out.shape[axis]
        if n == 1:
            continue
        if direction == "down":
            mat = block_average_matrix(n, s)
        else:
            mat = bilinear_upsample_matrix(n * s, s)
        out = ad.axis_linear(out, mat, axis)
    return out


# ---------------------------------------------------------------------------
# layer ops

# Keeping only m of the n//2 + 1 independent modes makes both transform ends
# small dense maps: analysis is m rows of the DFT matrix, and synthesis
# (Hermitian embedding -> inverse DFT -> real part) collapses to the real
# part of one (n, m) complex matrix product.  The synthesis matrix is built
# by probing the staged ops with basis vectors, so the fused ops reproduce
# their convention (mode 0 and the Nyquist mode forced real) bin for bin.
_lowpass_cache = {}


def _lowpass_matrices(n, m):
    key = (n, m)
    if key not in _lowpass_cache:
        analysis = np.ascontiguousarray(fourier.dft_matrix(n)[:m])
        syn = np.empty((n, m), dtype=np.complex128)
        probe = np.zeros((m, 1), dtype=np.complex128)
        for k in range(m):
            cols = []
            for unit in (1.0, 1j):
                probe[k] = unit
                chain = ad.idft_1d(
                    ad.hermitian_spectrum(ad.Tensor(probe), n, axis=0), axis=0
                )
                cols.append(ad.real_part(chain).data[:, 0])
            probe[k] = 0.0
            # the imaginary probe returns Re(i * column) = -Im(column)
            syn[:, k] = cols[0] - 1j * cols[1]
        _lowpass_cache[key] = (
            analysis,
            np.ascontiguousarray(np.conj(analysis).T),
            syn,
            np.ascontiguousarray(np.conj(syn).T),
        )
    return _lowpass_cache[key]


def _contract_leading(mat, x):
    # mat @ x over x's leading axis, any trailing shape, contiguous result
    lead = x.shape[0]
    flat = mat @ x.reshape(lead, -1)
    return flat.reshape((mat.shape[0],) + x.shape[1:])


def _contract_axis(mat, x, axis):
    if axis == 0:
        return _contract_leading(mat, x)
    return np.moveaxis(np.tensordot(mat, x, axes=(1, axis)), 0, axis)


def dft_lowpass(v, m, axis):
    """Lowest m DFT modes of a real tensor along one axis, as one taped op."""
    if not isinstance(v, ad.Tensor):
        v = ad.Tensor(v)
    if v.is_complex:
        raise TypeError("dft_lowpass expects real input")
    n = v.shape[axis]
    analysis, analysis_adj, _, _ = _lowpass_matrices(n, m)
    out = _contract_axis(analysis, v.data, axis)

    def vjp(g):
        return (_contract_axis(analysis_adj, g, axis).real,)

    return ad.custom("dft_lowpass", out, (v,), vjp)


def hermitian_idft_real(y, n, axis):
    """Real field of extent n from modified low modes, as one taped op."""
    m = y.shape[axis]
    _, _, syn, syn_adj = _lowpass_matrices(n, m)
    out = np.ascontiguousarray(_contract_axis(syn, y.data, axis).real)

    def vjp(g):
        return (_contract_axis(syn_adj, g, axis),)

    return ad.custom("hermitian_idft_real", out, (y,), vjp)


def gated_axial_spectral(v, weight, gates, axis):
    """Gated spectral channel mix along one axis of a real (X, Y, C) tensor.

    DFT -> keep the lowest independent modes -> per-mode complex channel
    mix scaled by a real gate -> Hermitian embedding -> inverse DFT; the
    imaginary residue is discarded after symmetrisation (it is roundoff).
    """
    n = v.shape[axis]
    if n == 1:
        return v
    m = weight.shape[0]
    h_all = n // 2 + 1
    m_eff = min(m, h_all)
    if m > h_all and (m, n) not in _warned_truncations:
        _warned_truncations.add((m, n))
        log.warning(
            "requested %d modes but axis extent %d supports %d; truncating", m, n, h_all
        )
    low = dft_lowpass(v, m_eff, axis)
    if axis != 0:
        low = ad.transpose(low, (1, 0, 2))
    w = weight if m_eff == m else ad.slice_axis(weight, 0, 0, m_eff)
    g = gates if m_eff == m else ad.slice_axis(gates, 0, 0, m_eff)
    mixed = ad.complex_matmul(low, ad.transpose(w, (0, 2, 1)))
    gated = ad.mul(mixed, ad.reshape(g, (m_eff, 1, 1)))
    if axis != 0:
        gated = ad.transpose(gated, (1, 0, 2))
    return hermitian_idft_real(gated, n, axis)


def squeeze_excite(v, se):
    """Channel rescale a_c * v_c from global average statistics.

    Fused into one taped op: mean pool -> w1 -> relu -> w2 -> sigmoid ->
    channel-wise product, with the reverse chain written out by hand.
    """
    if not isinstance(v, ad.Tensor):
        v = ad.Tensor(v)
    w1 = se.w1 if isinstance(se.w1, ad.Tensor) else ad.Tensor(se.w1)
    w2 = se.w2 if isinstance(se.w2, ad.Tensor) else ad.Tensor(se.w2)
    x, y, _ = v.shape
    s = v.data.mean(axis=(0, 1))
    pre = s @ w1.data
    hid = np.maximum(pre, 0.0)
    with np.errstate(over="ignore"):  # exp overflow saturates to exactly 0
        a = 1.0 / (1.0 + np.exp(-(hid @ w2.data)))
    out = v.data * a

    def vjp(g):
        ga = (g * v.data).sum(axis=(0, 1))
        gz = ga * a * (1.0 - a)
        gw2 = np.outer(hid, gz)
        gh = (w2.data @ gz) * (pre > 0.0)
        gw1 = np.outer(s, gh)
        gs = w1.data @ gh
        gv = g * a + gs / (x * y)
        return gv, gw1, gw2

    return ad.custom("squeeze_excite", out, (v, w1, w2), vjp)


def pointwise_linear(v, w, b):
    """Per-point channel map for (X, Y, C) tensors, fused into one taped op."""
    if not isinstance(v, ad.Tensor):
        v = ad.Tensor(v)
    if not isinstance(w, ad.Tensor):
        w = ad.Tensor(w)
    if not isinstance(b, ad.Tensor):
        b = ad.Tensor(b)
    x, y, c = v.shape
    if w.data.ndim != 2 or w.data.shape[0] != c or b.data.shape != (w.data.shape[1],):
        raise ad.ShapeError("pointwise_linear", v.shape, w.data.shape, b.data.shape)
    co = w.data.shape[1]
    flat = v.data.reshape(x * y, c)
    out = (flat @ w.data + b.data).reshape(x, y, co)

    def vjp(g):
        gflat = g.reshape(x * y, co)
        return (
            (gflat @ w.data.T).reshape(x, y, c),
            flat.T @ gflat,
            gflat.sum(axis=0),
        )

    return ad.custom("pointwise_linear", out, (v, w, b), vjp)


def spectral_layer(v, p):
    """One trunk layer: axial spectral mix (y, then x) + SE + local path."""
    u = gated_axial_spectral(v, p.w_y, p.g_y, axis=1)
    u = gated_axial_spectral(u, p.w_x, p.g_x, axis=0)
    u = squeeze_excite(u, p.se)
    return ad.add(u, pointwise_linear(v, p.local_w, p.local_b))


def branch_forward(inp, bp):
    v = pointwise_linear(inp, bp.lift_w, bp.lift_b)
    last = len(bp.layers) - 1
    for i, layer in enumerate(bp.layers):
        v = spectral_layer(v, layer)
        if i != last:
            v = ad.gelu(v)
    return v


def amfno_forward(params, inp, tape=None):
    """Fine branch plus upsampled coarse branch on an (X, Y, C_in) input.

    `inp` may be a numpy array or Tensor (already lifted onto a tape by the
    caller); params are tape-wrapped here when a tape is given.
    """
    p = params
    if isinstance(p.fine.lift_w, np.ndarray):
        p = tensorize(p, tape, "trunk")
    v = inp if isinstance(inp, ad.Tensor) else ad.Tensor(inp)
    fine = branch_forward(v, p.fine)
    down = resample(v, p.downsample, "down")
    coarse = branch_forward(down, p.coarse)
    up = resample(coarse, p.downsample, "up")
    return ad.add(fine, up)
