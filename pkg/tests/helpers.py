"""Independent oracles shared across the test suite.

Everything here is deliberately written the slow, obvious way (explicit
loops, textbook formulas) so it cannot share bugs with the package's
vectorised implementations.
"""

import numpy as np


def numeric_gradient(f, x, step=1e-6):
    """Central-difference gradient of scalar f at a real array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        fp = f(x)
        flat[i] = keep - step
        fm = f(x)
        flat[i] = keep
        gf[i] = (fp - fm) / (2.0 * step)
    return g


def numeric_gradient_complex(f, z, step=1e-6):
    """Real-pair central differences for a complex array: dL/dRe + 1j dL/dIm."""
    z = np.asarray(z, dtype=np.complex128)
    g = np.zeros_like(z)
    zf = z.ravel()
    gf = g.ravel()
    for i in range(zf.size):
        keep = zf[i]
        zf[i] = keep + step
        fp = f(z)
        zf[i] = keep - step
        fm = f(z)
        re = (fp - fm) / (2.0 * step)
        zf[i] = keep + 1j * step
        fp = f(z)
        zf[i] = keep - 1j * step
        fm = f(z)
        im = (fp - fm) / (2.0 * step)
        zf[i] = keep
        gf[i] = re + 1j * im
    return g


def naive_dft(x):
    """O(n^2) loop DFT of a 1d sequence, textbook definition."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        for j in range(n):
            out[k] += x[j] * np.exp(-2j * np.pi * k * j / n)
    return out


def naive_idft(x):
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    out = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            out[j] += x[k] * np.exp(2j * np.pi * k * j / n)
    return out / n


def rel_err(a, b, floor=1e-8):
    """Elementwise relative error with an absolute floor for tiny entries."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def naive_gated_axial(v, w, g, axis):
    """Loop-DFT reference for the gated axial spectral mix.

    Same layer convention (independent rfft modes, Hermitian mirror, real
    output) realised with explicit O(n^2) DFT loops and per-mode
    channel-by-channel matmul loops.
    """
    arr = np.moveaxis(np.asarray(v, dtype=np.float64), axis, 0)
    n = arr.shape[0]
    if n == 1:
        return np.asarray(v, dtype=np.float64).copy()
    d = arr.shape[-1]
    h_all = n // 2 + 1
    m_eff = min(w.shape[0], h_all)

    spec = np.zeros(arr.shape, dtype=np.complex128)
    for k in range(n):
        for j in range(n):
            spec[k] += arr[j] * np.exp(-2j * np.pi * k * j / n)

    low = np.zeros((m_eff,) + arr.shape[1:], dtype=np.complex128)
    for k in range(m_eff):
        for idx in np.ndindex(arr.shape[1:-1]):
            vec = spec[(k,) + idx]
            out = np.zeros(d, dtype=np.complex128)
            for c in range(d):
                for c2 in range(d):
                    out[c] += w[k, c, c2] * vec[c2]
            low[(k,) + idx] = g[k] * out

    full = np.zeros(arr.shape, dtype=np.complex128)
    full[0] = low[0].real
    nyquist = n % 2 == 0 and m_eff == h_all
    top = m_eff - 2 if nyquist else m_eff - 1
    for k in range(1, top + 1):
        full[k] = low[k]
        full[n - k] = np.conj(low[k])
    if nyquist:
        full[n // 2] = low[n // 2].real

    rec = np.zeros(arr.shape, dtype=np.float64)
    for j in range(n):
        acc = np.zeros(arr.shape[1:], dtype=np.complex128)
        for k in range(n):
            acc += full[k] * np.exp(2j * np.pi * k * j / n)
        rec[j] = (acc / n).real
    return np.moveaxis(rec, 0, axis)


def naive_bspline(x, k, i, t):
    """Recursive Cox-de Boor evaluation of a single basis function."""
    if k == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    c1 = 0.0
    if t[i + k] != t[i]:
        c1 = (x - t[i]) / (t[i + k] - t[i]) * naive_bspline(x, k - 1, i, t)
    c2 = 0.0
    if t[i + k + 1] != t[i + 1]:
        c2 = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * naive_bspline(x, k - 1, i + 1, t)
    return c1 + c2
