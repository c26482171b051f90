"""Figure export with CSV backing.

Every figure written here gets a sibling CSV holding exactly the plotted
numbers, so results stay inspectable without re-running the model and
the images can be regenerated by any other tool.
"""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_curves(png_path, csv_path, x, series, xlabel="", ylabel="", title=""):
    """Line plot of one or more named series over a shared x axis.

    series: dict label -> 1d array, all the same length as x.
    """
    x = np.asarray(x, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        y = np.asarray(y, dtype=np.float64)
        if y.shape != x.shape:
            raise ValueError(f"series {label!r} has shape {y.shape}, "
                             f"x has {x.shape}")
        ax.plot(x, y, marker="o", markersize=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([xlabel or "x"] + list(series))
        for i in range(x.size):
            writer.writerow([repr(float(x[i]))]
                            + [repr(float(series[k][i])) for k in series])


def save_field_comparison(png_path, csv_path, truth, pred, title=""):
    """Side-by-side heatmaps of truth, prediction and absolute error.

    truth, pred: (X, Y) arrays on the same grid.  The CSV stores one row
    per grid point with columns i, j, truth, pred, error.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.ndim != 2:
        raise ValueError(f"need matching (X, Y) fields, got {truth.shape} "
                         f"and {pred.shape}")
    err = np.abs(pred - truth)
    lo = min(truth.min(), pred.min())
    hi = max(truth.max(), pred.max())

    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, field, name, kw in (
        (axes[0], truth, "truth", {"vmin": lo, "vmax": hi}),
        (axes[1], pred, "prediction", {"vmin": lo, "vmax": hi}),
        (axes[2], err, "abs error", {}),
    ):
        im = ax.imshow(field.T, origin="lower", aspect="auto", **kw)
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "truth", "pred", "error"])
        for i in range(truth.shape[0]):
            for j in range(truth.shape[1]):
                writer.writerow([i, j, repr(float(truth[i, j])),
                                 repr(float(pred[i, j])),
                                 repr(float(err[i, j]))])
