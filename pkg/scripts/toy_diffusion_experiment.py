"""Small end-to-end diffusion-reaction experiment.

Generates a modest 1D dataset, trains the default model briefly, and
writes loss curves, a one-step comparison against the persistence
baseline, a rollout error curve, and a profile snapshot of one held-out
trajectory.  Runs in a few minutes on one CPU core.
"""

import argparse
import pathlib
import sys

import numpy as np

from specop import metrics, pde, plots, train
from specop.model import Model, ModelConfig
from specop.util import derive_seed


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/toy_diffusion",
                    help="output directory for figures and CSVs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=60)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--rollout-steps", type=int, default=20)
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    gen_cfg = pde.DiffusionReactionConfig()
    full = pde.generate_diffusion_reaction(gen_cfg, args.samples,
                                           seed=derive_seed(args.seed, "data"))
    tr, va, te = pde.split_dataset(full, 0.8, 0.1, seed=args.seed)
    print(f"dataset: {tr.n_samples} train / {va.n_samples} val / "
          f"{te.n_samples} test trajectories at X={gen_cfg.resolution}")

    mcfg = ModelConfig(in_channels=1, out_channels=1)
    m = Model.init(mcfg, seed=derive_seed(args.seed, "model"))
    result = train.train(m, tr, va, train.TrainConfig(epochs=args.epochs,
                                                      seed=args.seed))
    print(f"training {result.status} after {result.steps} steps")

    epochs = [row["epoch"] for row in result.history]
    plots.save_curves(
        out / "loss_curves.png", out / "loss_curves.csv",
        np.array(epochs, dtype=np.float64),
        {"train": np.array([row["train_loss"] for row in result.history]),
         "val": np.array([row["val_loss"] for row in result.history])},
        xlabel="epoch", ylabel="mse", title="one-step training loss")

    pred, truth = train.predict_one_step(result.model, te)
    model_nrmse = float(metrics.nrmse(pred, truth)[0])
    ppred, ptruth = train.persistence_one_step(te, mcfg.history_len)
    pers_nrmse = float(metrics.nrmse(ppred, ptruth)[0])
    print(f"held-out one-step nrmse: model {model_nrmse:.5f}, "
          f"persistence {pers_nrmse:.5f} "
          f"(ratio {model_nrmse / pers_nrmse:.3f})")

    steps = min(args.rollout_steps, te.n_frames - mcfg.history_len)
    curve = train.rollout_rmse_curve(result.model, te, steps)
    plots.save_curves(
        out / "rollout_rmse.png", out / "rollout_rmse.csv",
        np.arange(1, steps + 1, dtype=np.float64),
        {"median rmse": curve},
        xlabel="rollout step", ylabel="rmse",
        title="autoregressive rollout error")

    length = mcfg.history_len
    frames, _ = train.rollout(result.model, te.data[0, :length], steps)
    x_grid = np.arange(gen_cfg.resolution, dtype=np.float64) / gen_cfg.resolution
    last = frames.shape[0] - 1
    plots.save_curves(
        out / "rollout_profile.png", out / "rollout_profile.csv",
        x_grid,
        {"truth": te.data[0, length + last, :, 0, 0],
         "prediction": frames[last, :, 0, 0]},
        xlabel="x", ylabel="u",
        title=f"held-out sample after {last + 1} rollout steps")
    print(f"figures written under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
