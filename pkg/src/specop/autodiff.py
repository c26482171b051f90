"""Reverse-mode automatic differentiation over a flat tape.

A ``Tensor`` wraps a float64 or complex128 numpy array.  Ops record nodes
on the ``Tape`` that produced their inputs; node order is creation order,
so the tape is already topologically sorted and ``backward`` is a single
reverse sweep visiting each node once.

Gradients of complex tensors follow the interleaved real-pair convention:
the gradient array stores dL/dRe + 1j * dL/dIm, i.e. the two real channels
are differentiated independently (no Wirtinger calculus).  Useful
consequences, used by the vjps below:

    C = A @ B  (complex)   ->  dA = G @ conj(B)^T,   dB = conj(A)^T @ G
    y = dft(x)             ->  dx = n * idft(G)
    y = idft(x)            ->  dx = dft(G) / n

Every op validates shapes up front (ShapeError names the op and both
shapes) and checks its output for NaN/Inf (NumericError); non-finite
values never propagate silently.
"""

import numpy as np
from scipy.special import erf

from . import fourier


class ShapeError(ValueError):
    """Operand shapes incompatible for an op."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(shapes)
        super().__init__(f"op '{op}': incompatible shapes {self.shapes}")


class NumericError(ArithmeticError):
    """An op produced NaN or Inf."""

    def __init__(self, op, detail=None):
        self.op = op
        super().__init__(detail or f"op '{op}' produced non-finite values")


_F64 = np.dtype(np.float64)
_C128 = np.dtype(np.complex128)


def _coerce(arr):
    if isinstance(arr, np.ndarray):
        dt = arr.dtype
        if (dt == _F64 or dt == _C128) and arr.flags["C_CONTIGUOUS"]:
            return arr
    a = np.asarray(arr)
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    a = a.astype(dtype, copy=False)
    if not a.flags["C_CONTIGUOUS"]:
        a = np.ascontiguousarray(a)  # keeps ndim, unlike for scalars-in
    return a


class Tensor:
    """Immutable-by-convention array with an optional tape node."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape=None, node=None):
        self.data = _coerce(data)
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_complex(self):
        return self.data.dtype == np.complex128

    def interleaved(self):
        """Flat float64 view; complex elements appear as (real, imag) pairs."""
        return np.ascontiguousarray(self.data).view(np.float64).ravel()

    def item(self):
        return self.data.item()

    def __repr__(self):
        tag = "complex" if self.is_complex else "real"
        return f"Tensor(shape={self.data.shape}, {tag}, node={self.node})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class _Node:
    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op, parents, vjp):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Append-only op record; append order is the topological order."""

    def __init__(self):
        self.nodes = []
        self.leaves = {}  # node id -> (name, shape, dtype)

    def _append(self, op, parents, vjp):
        self.nodes.append(_Node(op, parents, vjp))
        return len(self.nodes) - 1

    def leaf(self, data, name):
        """Register a differentiable parameter; name keys the gradient map."""
        nid = self._append("leaf", (), None)
        t = Tensor(data, self, nid)
        self.leaves[nid] = (name, t.data.shape, t.data.dtype)
        return t

    def backward(self, loss):
        return backward(self, loss)


def backward(tape, loss):
    """Single reverse sweep from a scalar loss.

    Returns a map {parameter name -> Tensor gradient} covering every leaf
    on the tape; leaves not on the loss path get zero gradients.
    """
    if not isinstance(loss, Tensor) or loss.tape is not tape or loss.node is None:
        raise ValueError("loss is not a tensor recorded on this tape")
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    adj = [None] * len(tape.nodes)
    adj[loss.node] = np.ones((), dtype=loss.data.dtype)
    for nid in range(loss.node, -1, -1):
        g = adj[nid]
        if g is None:
            continue
        node = tape.nodes[nid]
        if node.vjp is None:
            continue
        for pid, contrib in zip(node.parents, node.vjp(g)):
            if pid is None or contrib is None:
                continue
            if adj[pid] is None:
                # vjp outputs are never mutated, so aliasing them is safe;
                # accumulation below rebinds instead of writing in place
                adj[pid] = contrib
            else:
                adj[pid] = adj[pid] + contrib
    out = {}
    for nid, (name, shape, dtype) in tape.leaves.items():
        g = adj[nid]
        if g is None:
            g = np.zeros(shape, dtype=dtype)
        else:
            # private buffer per leaf: identity-style vjps can hand the
            # same array to several parents
            g = g.copy()
        out[name] = Tensor(g)
    return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _common_tape(tensors):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ValueError("inputs recorded on different tapes")
            tape = t.tape
    return tape


def _check_finite(op, arr):
    # cheap screen first: any NaN or Inf element makes the sum non-finite
    # (opposite-sign infinities combine to NaN), so a finite sum proves the
    # array clean; a non-finite sum can also come from benign overflow of
    # the accumulator, which the exact elementwise confirmation rules out
    try:
        total = arr.sum()
    except FloatingPointError:  # caller runs numpy in seterr("raise") mode
        total = np.nan
    if np.isfinite(total):
        return
    if not np.isfinite(arr).all():
        raise NumericError(op)


def _result(op, out_data, inputs, vjp):
    """Wrap an op output, recording a tape node when any input is tracked."""
    _check_finite(op, out_data)
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise ValueError("inputs recorded on different tapes")
    if tape is None:
        return Tensor(out_data)
    parents = []
    tracked = False
    for t in inputs:
        if t.tape is tape and t.node is not None:
            parents.append(t.node)
            tracked = True
        else:
            parents.append(None)
    if not tracked:
        return Tensor(out_data)
    nid = tape._append(op, tuple(parents), vjp)
    return Tensor(out_data, tape, nid)


def custom(op, out_data, inputs, vjp):
    """Public hook: register an externally defined differentiable op."""
    return _result(op, out_data, list(inputs), vjp)


def _sum_to_shape(g, shape):
    """Reverse numpy broadcasting: reduce g down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _to_dtype_of(g, arr):
    # gradient flowing into a real operand keeps only the real channel
    if arr.dtype != np.complex128 and np.iscomplexobj(g):
        return g.real
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError("add", a.data.shape, b.data.shape) from None

    def vjp(g):
        return (
            _sum_to_shape(_to_dtype_of(g, a.data), a.data.shape),
            _sum_to_shape(_to_dtype_of(g, b.data), b.data.shape),
        )

    return _result("add", out, [a, b], vjp)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError("sub", a.data.shape, b.data.shape) from None

    def vjp(g):
        return (
            _sum_to_shape(_to_dtype_of(g, a.data), a.data.shape),
            _sum_to_shape(_to_dtype_of(-g, b.data), b.data.shape),
        )

    return _result("sub", out, [a, b], vjp)


def neg(a):
    a = _as_tensor(a)
    return _result("neg", -a.data, [a], lambda g: (-g,))


def mul(a, b):
    """Elementwise product with numpy broadcasting; mixed real/complex ok."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError("mul", a.data.shape, b.data.shape) from None

    def vjp(g):
        ga = g * np.conj(b.data)
        gb = g * np.conj(a.data)
        return (
            _sum_to_shape(_to_dtype_of(ga, a.data), a.data.shape),
            _sum_to_shape(_to_dtype_of(gb, b.data), b.data.shape),
        )

    return _result("mul", out, [a, b], vjp)


def scale(a, s):
    a = _as_tensor(a)
    s = float(s)
    return _result("scale", a.data * s, [a], lambda g: (g * s,))


def matmul(a, b):
    """Real matrix product, numpy semantics for stacked (batched) operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.is_complex or b.is_complex:
        raise TypeError("matmul is real-only; use complex_matmul")
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError("matmul", a.data.shape, b.data.shape)
    try:
        out = a.data @ b.data
    except ValueError:
        raise ShapeError("matmul", a.data.shape, b.data.shape) from None

    def vjp(g):
        ga = _sum_to_shape(g @ b.data.swapaxes(-1, -2), a.data.shape)
        gb = _sum_to_shape(a.data.swapaxes(-1, -2) @ g, b.data.shape)
        return ga, gb

    return _result("matmul", out, [a, b], vjp)


def complex_matmul(a, b):
    """Complex matrix product; vjps follow the real-pair convention."""
    a, b = _as_tensor(a), _as_tensor(b)
    if not (a.is_complex and b.is_complex):
        raise TypeError("complex_matmul requires complex operands; see as_complex")
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError("complex_matmul", a.data.shape, b.data.shape)
    try:
        out = a.data @ b.data
    except ValueError:
        raise ShapeError("complex_matmul", a.data.shape, b.data.shape) from None

    def vjp(g):
        ga = _sum_to_shape(g @ np.conj(b.data).swapaxes(-1, -2), a.data.shape)
        gb = _sum_to_shape(np.conj(a.data).swapaxes(-1, -2) @ g, b.data.shape)
        return ga, gb

    return _result("complex_matmul", out, [a, b], vjp)


# ---------------------------------------------------------------------------
# Fourier ops


def dft_1d(x, axis=-1):
    """Unnormalised forward DFT along one axis; output is complex."""
    x = _as_tensor(x)
    if x.data.shape == () or x.data.shape[axis] < 1:
        raise ShapeError("dft_1d", x.data.shape)
    n = x.data.shape[axis]
    out = fourier.fft_along(x.data, axis)

    def vjp(g):
        gx = n * fourier.ifft_along(g, axis)
        return (_to_dtype_of(gx, x.data),)

    return _result("dft_1d", out, [x], vjp)


def idft_1d(x, axis=-1):
    """Inverse DFT (1/n normalised) along one axis; output is complex."""
    x = _as_tensor(x)
    if x.data.shape == () or x.data.shape[axis] < 1:
        raise ShapeError("idft_1d", x.data.shape)
    n = x.data.shape[axis]
    out = fourier.ifft_along(x.data, axis)

    def vjp(g):
        gx = fourier.fft_along(g, axis) / n
        return (_to_dtype_of(gx, x.data),)

    return _result("idft_1d", out, [x], vjp)


def real_part(x):
    x = _as_tensor(x)
    return _result("real_part", np.ascontiguousarray(x.data.real), [x],
                   lambda g: (g.astype(np.complex128),))


def imag_part(x):
    x = _as_tensor(x)
    return _result("imag_part", np.ascontiguousarray(x.data.imag), [x],
                   lambda g: (1j * g,))


def as_complex(x):
    x = _as_tensor(x)
    if x.is_complex:
        return x
    return _result("as_complex", x.data.astype(np.complex128), [x],
                   lambda g: (g.real,))


def conj(x):
    x = _as_tensor(x)
    return _result("conj", np.conj(x.data), [x], lambda g: (np.conj(g),))


def hermitian_spectrum(low, n, axis=-1):
    """Embed modified low modes into a full Hermitian-symmetric spectrum.

    `low` holds modes 0..h-1 along `axis` with h <= n//2 + 1.  Mode 0 (and
    the Nyquist mode for even n, when present) is forced real; modes n-k
    mirror conj(mode k).  The inverse DFT of the result is real up to
    roundoff.
    """
    low = _as_tensor(low)
    if not low.is_complex:
        raise TypeError("hermitian_spectrum expects complex input")
    h = low.data.shape[axis]
    if h > n // 2 + 1:
        raise ShapeError("hermitian_spectrum", low.data.shape, (n,))
    moved = low.data.swapaxes(axis, -1)
    out = np.zeros(moved.shape[:-1] + (n,), dtype=np.complex128)
    out[..., 0] = moved[..., 0].real
    nyq = n % 2 == 0 and h == n // 2 + 1
    top = h - 1 if not nyq else h - 2
    if top >= 1:
        out[..., 1 : top + 1] = moved[..., 1 : top + 1]
        out[..., n - top :] = np.conj(moved[..., 1 : top + 1][..., ::-1])
    if nyq:
        out[..., n // 2] = moved[..., n // 2].real
    out = np.ascontiguousarray(out.swapaxes(axis, -1))

    def vjp(g):
        gm = g.swapaxes(axis, -1)
        gl = np.zeros(moved.shape, dtype=np.complex128)
        gl[..., 0] = gm[..., 0].real
        if top >= 1:
            gl[..., 1 : top + 1] = gm[..., 1 : top + 1] + np.conj(
                gm[..., n - top :][..., ::-1]
            )
        if nyq:
            gl[..., n // 2] = gm[..., n // 2].real
        return (gl.swapaxes(axis, -1),)

    return _result("hermitian_spectrum", out, [low], vjp)


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(x):
    x = _as_tensor(x)
    with np.errstate(over="ignore"):  # exp overflow saturates to exactly 0
        out = 1.0 / (1.0 + np.exp(-x.data))
    return _result("sigmoid", out, [x], lambda g: (g * out * (1.0 - out),))


def silu(x):
    x = _as_tensor(x)
    with np.errstate(over="ignore", invalid="ignore"):
        s = 1.0 / (1.0 + np.exp(-x.data))
        out = x.data * s

    def vjp(g):
        return (g * (s * (1.0 + x.data * (1.0 - s))),)

    return _result("silu", out, [x], vjp)


def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0.0), [x],
                   lambda g: (g * mask,))


def gelu(x):
    """Exact GELU, x * Phi(x) with the Gaussian CDF via erf."""
    x = _as_tensor(x)
    phi = 0.5 * (1.0 + erf(x.data / np.sqrt(2.0)))
    out = x.data * phi

    def vjp(g):
        pdf = np.exp(-0.5 * x.data**2) / np.sqrt(2.0 * np.pi)
        return (g * (phi + x.data * pdf),)

    return _result("gelu", out, [x], vjp)


def softmax(x, axis=-1):
    """Stable softmax (max subtracted before exponentiation)."""
    x = _as_tensor(x)
    if x.is_complex:
        raise TypeError("softmax is real-only")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _result("softmax", out, [x], vjp)


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum(x, axis=None):  # noqa: A001 - mirrors the op name, like numpy.sum
    x = _as_tensor(x)
    out = x.data.sum(axis=axis)
    shape = x.data.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape).astype(x.data.dtype, copy=True),)
        axes = axis if isinstance(axis, tuple) else (axis,)
        gx = np.expand_dims(g, axes)
        return (np.broadcast_to(gx, shape).astype(x.data.dtype, copy=True),)

    return _result("sum", out, [x], vjp)


def mean_pool(x, axes):
    """Mean over the given axes (e.g. spatial mean per channel)."""
    x = _as_tensor(x)
    axes = axes if isinstance(axes, tuple) else (axes,)
    count = 1
    for ax in axes:
        count *= x.data.shape[ax]
    out = x.data.mean(axis=axes)

    def vjp(g):
        gx = np.expand_dims(g, axes)
        return (np.broadcast_to(gx, x.data.shape).astype(x.data.dtype) / count,)

    return _result("mean_pool", out, [x], vjp)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.data.shape for t in tensors]) from None
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _result("concat", out, tensors, vjp)


def slice_axis(x, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    x = _as_tensor(x)
    n = x.data.shape[axis]
    if start < 0 or length < 1 or start + length > n:
        raise ShapeError("slice", x.data.shape, (axis, start, length))
    idx = [np.s_[:]] * x.data.ndim
    idx[axis] = np.s_[start : start + length]
    out = np.ascontiguousarray(x.data[tuple(idx)])

    def vjp(g):
        gx = np.zeros(x.data.shape, dtype=g.dtype)
        gx[tuple(idx)] = g
        return (gx,)

    return _result("slice", out, [x], vjp)


def transpose(x, axes):
    x = _as_tensor(x)
    out = np.ascontiguousarray(x.data.transpose(axes))
    inv = np.argsort(axes)

    def vjp(g):
        return (np.ascontiguousarray(g.transpose(inv)),)

    return _result("transpose", out, [x], vjp)


def reshape(x, shape):
    x = _as_tensor(x)
    out = x.data.reshape(shape)

    def vjp(g):
        return (g.reshape(x.data.shape),)

    return _result("reshape", out, [x], vjp)


def broadcast_to(x, shape):
    x = _as_tensor(x)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError("broadcast_to", x.data.shape, tuple(shape)) from None

    def vjp(g):
        return (_sum_to_shape(g, x.data.shape),)

    return _result("broadcast_to", out, [x], vjp)


def axis_linear(x, mat, axis):
    """Apply a constant real matrix along one axis: out = mat . x (axis-wise).

    The matrix is not differentiated; used for fixed resampling stencils.
    """
    x = _as_tensor(x)
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != x.data.shape[axis]:
        raise ShapeError("axis_linear", x.data.shape, mat.shape)
    moved = np.moveaxis(x.data, axis, -1)
    out = np.moveaxis(moved @ mat.T, -1, axis)

    def vjp(g):
        gm = np.moveaxis(g, axis, -1)
        return (np.moveaxis(gm @ mat, -1, axis),)

    return _result("axis_linear", out, [x], vjp)
