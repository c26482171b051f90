"""Error metrics over trajectory tensors (samples, frames, X, Y, C).

Definitions, fixed so the loop-oracle tests can pin them exactly:

  rmse            sqrt(mean of squared error); per channel and aggregate
  nrmse           per-channel rmse / rms of the truth channel
  max_sample_rms  max over samples of that sample's aggregate rmse
  conserved       per-channel rmse of spatial integrals sum * dx * dy
  boundary        rmse restricted to edge indices {0, n-1} of every spatial
                  axis with extent >= 2
  bands           error energy split into low/mid/high radial frequency
                  thirds via the 2d DFT and Parseval; the high band absorbs
                  the grid corners beyond the Nyquist circle
  rel_l2          per-channel ||error||_2 / ||truth||_2
"""

import csv

import numpy as np

from . import fourier


def _check(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 5:
        raise ValueError(f"expected matching rank-5 arrays, got {pred.shape} "
                         f"and {truth.shape}")
    return pred, truth


def rmse(pred, truth):
    """(per-channel array (C,), aggregate scalar)."""
    pred, truth = _check(pred, truth)
    sq = (pred - truth) ** 2
    return np.sqrt(sq.mean(axis=(0, 1, 2, 3))), float(np.sqrt(sq.mean()))


def nrmse(pred, truth):
    """Per-channel rmse normalised by the truth channel's rms."""
    pred, truth = _check(pred, truth)
    per, _ = rmse(pred, truth)
    scale = np.sqrt((truth ** 2).mean(axis=(0, 1, 2, 3)))
    if (scale == 0).any():
        raise ValueError("truth channel has zero rms, nrmse undefined")
    return per / scale


def max_sample_rms(pred, truth):
    pred, truth = _check(pred, truth)
    per_sample = np.sqrt(((pred - truth) ** 2).mean(axis=(1, 2, 3, 4)))
    return float(per_sample.max())


def conserved_integrals(fields):
    """Spatial integrals sum * dx * dy, shape (S, T, C)."""
    fields = np.asarray(fields, dtype=np.float64)
    x, y = fields.shape[2], fields.shape[3]
    return fields.sum(axis=(2, 3)) / (x * y)


def conserved_rmse(pred, truth):
    pred, truth = _check(pred, truth)
    diff = conserved_integrals(pred) - conserved_integrals(truth)
    return np.sqrt((diff ** 2).mean(axis=(0, 1)))


def boundary_mask(x, y):
    """Boolean (X, Y) mask of edge points on axes with extent >= 2."""
    mask = np.zeros((x, y), dtype=bool)
    if x >= 2:
        mask[0] = mask[-1] = True
    if y >= 2:
        mask[:, 0] = mask[:, -1] = True
    return mask


def boundary_rmse(pred, truth):
    """(per-channel, aggregate) rmse over boundary points only."""
    pred, truth = _check(pred, truth)
    mask = boundary_mask(pred.shape[2], pred.shape[3])
    if not mask.any():
        raise ValueError("no spatial axis has extent >= 2")
    sq = ((pred - truth) ** 2)[:, :, mask]  # (S, T, B, C)
    return np.sqrt(sq.mean(axis=(0, 1, 2))), float(np.sqrt(sq.mean()))


def band_masks(x, y):
    """Low/mid/high radial masks over the (X, Y) DFT mode grid.

    Radius uses signed mode frequencies; the Nyquist of the shorter active
    axis splits into thirds at floor(nyq/3) and floor(2 nyq/3).  Length-1
    axes contribute a zero frequency only.
    """
    active = [n for n in (x, y) if n > 1]
    if not active:
        raise ValueError("band metrics need a spatial axis with extent >= 2")
    kx = fourier.fft_freqs(x).astype(np.float64)
    ky = fourier.fft_freqs(y).astype(np.float64)
    r = np.sqrt(kx[:, None] ** 2 + ky[None, :] ** 2)
    nyq = min(active) // 2
    e1, e2 = nyq // 3, (2 * nyq) // 3
    low = r <= e1
    mid = (r > e1) & (r <= e2)
    high = r > e2
    return low, mid, high


def band_rms(err):
    """(low, mid, high) rms of an error tensor's frequency thirds.

    Parseval ties the three mean squares to the total:
    sum of the band mean squares equals the plain mean square error.
    """
    err = np.asarray(err, dtype=np.float64)
    if err.ndim != 5:
        raise ValueError(f"expected rank-5 error tensor, got {err.shape}")
    _, _, x, y, _ = err.shape
    masks = band_masks(x, y)
    spec = err.astype(np.complex128)
    if x > 1:
        spec = fourier.fft_along(spec, axis=2)
    if y > 1:
        spec = fourier.fft_along(spec, axis=3)
    power = (spec.real ** 2 + spec.imag ** 2) / (x * y) ** 2  # per-point ms
    out = []
    for m in masks:
        ms = power[:, :, m].sum(axis=2)  # (S, T, C) mean square in band
        out.append(float(np.sqrt(ms.mean())))
    return tuple(out)


def rel_l2(pred, truth):
    pred, truth = _check(pred, truth)
    num = np.sqrt(((pred - truth) ** 2).sum(axis=(0, 1, 2, 3)))
    den = np.sqrt((truth ** 2).sum(axis=(0, 1, 2, 3)))
    if (den == 0).any():
        raise ValueError("truth channel has zero norm, rel_l2 undefined")
    return num / den


def evaluate(pred, truth):
    """All aggregate metrics in one dict of plain floats / float lists."""
    pred, truth = _check(pred, truth)
    per, agg = rmse(pred, truth)
    b_per, b_agg = boundary_rmse(pred, truth)
    low, mid, high = band_rms(pred - truth)
    return {
        "rmse": agg,
        "rmse_per_channel": per.tolist(),
        "nrmse_per_channel": nrmse(pred, truth).tolist(),
        "max_sample_rms": max_sample_rms(pred, truth),
        "conserved_rmse_per_channel": conserved_rmse(pred, truth).tolist(),
        "boundary_rmse": b_agg,
        "boundary_rmse_per_channel": b_per.tolist(),
        "band_rms_low": low,
        "band_rms_mid": mid,
        "band_rms_high": high,
        "rel_l2_per_channel": rel_l2(pred, truth).tolist(),
    }


def per_slice_rows(pred, truth):
    """One metrics row per (sample, frame, channel) for the CSV report."""
    pred, truth = _check(pred, truth)
    sq = (pred - truth) ** 2
    slice_rmse = np.sqrt(sq.mean(axis=(2, 3)))  # (S, T, C)
    t_norm = np.sqrt((truth ** 2).sum(axis=(2, 3)))
    e_norm = np.sqrt(sq.sum(axis=(2, 3)))
    q_err = conserved_integrals(pred) - conserved_integrals(truth)
    rows = []
    for s in range(pred.shape[0]):
        for t in range(pred.shape[1]):
            for c in range(pred.shape[4]):
                denom = t_norm[s, t, c]
                rows.append({
                    "sample": s,
                    "frame": t,
                    "channel": c,
                    "rmse": float(slice_rmse[s, t, c]),
                    "rel_l2": float(e_norm[s, t, c] / denom) if denom > 0 else float("nan"),
                    "conserved_error": float(q_err[s, t, c]),
                })
    return rows


def write_metrics_csv(path, rows):
    fields = ["sample", "frame", "channel", "rmse", "rel_l2", "conserved_error"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})


def format_summary(summary):
    """Plain-text block for logs and report files."""
    width = max(len(k) for k in summary) + 2
    lines = [f"{'metric':<{width}}value"]
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, list):
            text = ", ".join(f"{v:.6g}" for v in value)
        else:
            text = f"{value:.6g}"
        lines.append(f"{key:<{width}}{text}")
    return "\n".join(lines)
