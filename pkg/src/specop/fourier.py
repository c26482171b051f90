"""Discrete Fourier transforms on numpy arrays.

Large power-of-two lengths go through an iterative radix-2 Cooley-Tukey
kernel vectorised over leading axes; short lengths and every non-power
length use a cached dense DFT matrix multiply, which has better constants
at the sizes this package actually runs.  Forward transform is
unnormalised, X[k] = sum_j x[j] exp(-2i pi k j / n); the inverse carries
the 1/n.
"""

import numpy as np

_twiddle_cache: dict[int, np.ndarray] = {}
_dft_cache: dict[int, np.ndarray] = {}
_rev_cache: dict[int, np.ndarray] = {}


def _bit_reverse_indices(n):
    if n not in _rev_cache:
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.int64)
        bits = n.bit_length() - 1
        for _ in range(bits):
            rev = (rev << 1) | (idx & 1)
            idx >>= 1
        _rev_cache[n] = rev
    return _rev_cache[n]


def _twiddles(n):
    # roots of unity exp(-2i pi k / n) for k < n/2, cached per length
    if n not in _twiddle_cache:
        k = np.arange(n // 2)
        _twiddle_cache[n] = np.exp(-2j * np.pi * k / n)
    return _twiddle_cache[n]


def dft_matrix(n):
    """Dense unnormalised DFT matrix F[k, j] = exp(-2i pi k j / n)."""
    if n not in _dft_cache:
        k = np.arange(n)
        _dft_cache[n] = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return _dft_cache[n]


def _fft_pow2(x):
    # x: (..., n) complex128, n a power of two
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    out = np.ascontiguousarray(x[..., _bit_reverse_indices(n)])
    half = 1
    while half < n:
        w = _twiddles(2 * half)
        blocks = out.reshape(out.shape[:-1] + (n // (2 * half), 2 * half))
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * w
        # butterflies write straight back into the block view
        np.add(even, odd, out=blocks[..., :half])
        np.subtract(even, odd, out=blocks[..., half:])
        half *= 2
    return out


# below this length a cached dense-matrix product beats the staged radix-2
# passes (same trick FFT libraries use: direct kernels for small sizes)
_DENSE_MAX = 64

_idft_cache = {}


def _idft_matrix(n):
    if n not in _idft_cache:
        _idft_cache[n] = np.conj(dft_matrix(n)) / n
    return _idft_cache[n]


def _dense_transform(moved, mat):
    # real input stays in a real GEMM: viewing the complex matrix as float64
    # interleaves (Re, Im) columns, and viewing the product back restores the
    # complex layout, at half the flops of the upcast complex product
    if moved.dtype == np.complex128:
        return moved @ mat
    if moved.dtype == np.float64:
        return (moved @ mat.view(np.float64)).view(np.complex128)
    return moved.astype(np.complex128) @ mat


def _dense_along(x, axis, mat):
    # the DFT matrix is symmetric, so a leading-axis transform of a
    # contiguous complex array collapses to one plain matmul with a
    # contiguous result; other layouts go through the trailing axis
    if axis == 0 and x.dtype == np.complex128 and x.flags.c_contiguous:
        n = x.shape[0]
        return (mat @ x.reshape(n, -1)).reshape(x.shape)
    return _dense_transform(x.swapaxes(axis, -1), mat).swapaxes(axis, -1)


def fft_along(x, axis):
    """Unnormalised forward DFT of a complex or real array along one axis."""
    x = np.asarray(x)
    n = x.shape[axis]
    if n == 1:
        return x.astype(np.complex128, copy=True)
    if n <= _DENSE_MAX or (n & (n - 1)) != 0:
        return _dense_along(x, axis % x.ndim, dft_matrix(n))
    moved = x.astype(np.complex128, copy=False).swapaxes(axis, -1)
    return _fft_pow2(moved).swapaxes(axis, -1)


def ifft_along(x, axis):
    """Inverse DFT along one axis, normalised by 1/n."""
    x = np.asarray(x)
    n = x.shape[axis]
    if n == 1:
        return x.astype(np.complex128, copy=True)
    if n <= _DENSE_MAX or (n & (n - 1)) != 0:
        return _dense_along(x, axis % x.ndim, _idft_matrix(n))
    xc = x.astype(np.complex128, copy=False)
    return np.conj(fft_along(np.conj(xc), axis)) / n


def fft_freqs(n):
    """Signed integer frequencies (0, 1, ..., n//2, -(n-1)//2, ..., -1)."""
    k = np.arange(n)
    return np.where(k <= n // 2, k, k - n)
