"""Command line workflow: generate data, train, evaluate, verify, plot.

Exit codes: 0 success, 2 malformed configuration or bad usage, 3 missing
input file, 4 incompatible file contents, 5 verification failure, 1
unexpected error.  Every run writes the fully resolved configuration to
<out>/resolved.cfg so results can be reproduced from the artifact alone.

The numeric stack is imported inside the command handlers, not at module
level, so the [run] threads cap can reach the BLAS pools through the
environment before numpy loads.
"""

import argparse
import csv
import os
import sys
import traceback

from . import config as config_mod


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="specop",
        description="spectral neural operator workflows on synthetic PDE data",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int,
                        help="root random seed, overrides [run] seed")
    common.add_argument("--threads", type=int,
                        help="BLAS thread cap, overrides [run] threads")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="SECTION.KEY=VALUE",
                        help="config override, repeatable")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common],
                   help="generate a trajectory dataset")
    p = sub.add_parser("train", parents=[common],
                       help="train a model on a dataset")
    p.add_argument("--data", required=True, help="trajectory file")
    for name, text in (("eval", "one-step metrics against persistence"),
                       ("rollout", "autoregressive error curve"),
                       ("export-plots", "figures with CSV backing")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--data", required=True, help="trajectory file")
        p.add_argument("--model", required=True, help="checkpoint file")
    sub.add_parser("verify", parents=[common],
                   help="run the analytic bound checks")
    return parser


def _resolve(args):
    cfg = config_mod.default_config()
    if args.config:
        cfg = config_mod.load_config(args.config, base=cfg)
    config_mod.apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.threads is not None:
        cfg.run.threads = args.threads
    config_mod.validate(cfg)
    return cfg


def _apply_threads(n):
    if n <= 0:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


def _load_pair(args, cfg):
    """Dataset plus checkpoint, with an early channel compatibility check."""
    from . import skds

    ts = skds.load_trajectories(args.data)
    m = skds.load_checkpoint(args.model)
    if ts.data.shape[-1] != m.cfg.in_channels:
        raise skds.FormatError(
            f"dataset has {ts.data.shape[-1]} channels but the model "
            f"expects {m.cfg.in_channels}")
    return ts, m


def _eval_split(ts, cfg):
    from . import pde

    parts = pde.split_dataset(ts, cfg.data.train_frac, cfg.data.val_frac,
                              cfg.run.seed)
    part = dict(zip(("train", "val", "test"), parts))[cfg.eval.split]
    if part.n_samples == 0:
        raise config_mod.ConfigError(
            f"eval split {cfg.eval.split!r} is empty with train_frac "
            f"{cfg.data.train_frac} and val_frac {cfg.data.val_frac}")
    return part


def _write_rows_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})


def _cmd_gen_data(args, cfg):
    from . import pde, skds
    from .util import derive_seed

    gen = config_mod.generator_config(cfg)
    seed = derive_seed(cfg.run.seed, "data")
    if cfg.data.kind == "diffusion":
        ts = pde.generate_diffusion_reaction(gen, cfg.data.samples, seed)
    else:
        ts = pde.generate_shallow_water(gen, cfg.data.samples, seed)
    path = os.path.join(args.out, "dataset.skds")
    skds.save_trajectories(path, ts)
    x, y = ts.data.shape[2], ts.data.shape[3]
    print(f"wrote {ts.n_samples} {cfg.data.kind} trajectories, "
          f"{ts.n_frames} frames at {x}x{y}, to {path}")
    return 0


def _cmd_train(args, cfg):
    from . import pde, skds
    from . import train as train_mod
    from .model import Model
    from .util import derive_seed

    ts = skds.load_trajectories(args.data)
    tr, val, _ = pde.split_dataset(ts, cfg.data.train_frac, cfg.data.val_frac,
                                   cfg.run.seed)
    m = Model.init(config_mod.model_config(cfg),
                   seed=derive_seed(cfg.run.seed, "model"))
    result = train_mod.train(m, tr, val if val.n_samples else None,
                             config_mod.train_config(cfg))

    ckpt = os.path.join(args.out, "model.skds")
    skds.save_checkpoint(ckpt, m)
    if result.history:
        _write_rows_csv(os.path.join(args.out, "history.csv"),
                        list(result.history[0]), result.history)
    last = result.history[-1] if result.history else {}
    print(f"training {result.status}; {result.steps} steps, "
          f"final train loss {last.get('train_loss', float('nan')):.6g}, "
          f"checkpoint {ckpt}")
    return 0


def _cmd_eval(args, cfg):
    from . import metrics
    from . import train as train_mod

    ts, m = _load_pair(args, cfg)
    part = _eval_split(ts, cfg)
    pred, truth = train_mod.predict_one_step(m, part)
    base_pred, base_truth = train_mod.persistence_one_step(
        part, m.cfg.history_len)

    metrics.write_metrics_csv(os.path.join(args.out, "per_slice.csv"),
                              metrics.per_slice_rows(pred, truth))
    text = (f"one-step metrics on the {cfg.eval.split} split "
            f"({part.n_samples} samples)\n"
            + metrics.format_summary(metrics.evaluate(pred, truth))
            + "\npersistence baseline\n"
            + metrics.format_summary(metrics.evaluate(base_pred, base_truth)))
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


def _persistence_curve(part, length, steps):
    import numpy as np

    frozen = part.data[:, length - 1]
    errs = np.empty((part.n_samples, steps))
    for k in range(steps):
        diff = frozen - part.data[:, length + k]
        errs[:, k] = np.sqrt((diff ** 2).mean(axis=(1, 2, 3)))
    return np.median(errs, axis=0)


def _cmd_rollout(args, cfg):
    from . import train as train_mod

    ts, m = _load_pair(args, cfg)
    part = _eval_split(ts, cfg)
    steps = cfg.eval.rollout_steps
    length = m.cfg.history_len
    if part.n_frames < length + steps:
        raise config_mod.ConfigError(
            f"eval.rollout_steps {steps} needs at least {length + steps} "
            f"frames, dataset has {part.n_frames}")
    curve = train_mod.rollout_rmse_curve(m, part, steps)
    base = _persistence_curve(part, length, steps)
    rows = [{"step": k + 1, "rmse": float(curve[k]),
             "persistence_rmse": float(base[k])} for k in range(steps)]
    _write_rows_csv(os.path.join(args.out, "rollout_rmse.csv"),
                    ["step", "rmse", "persistence_rmse"], rows)
    print(f"rollout over {steps} steps on {part.n_samples} samples: "
          f"median rmse {curve[0]:.6g} (step 1) to {curve[-1]:.6g} "
          f"(step {steps}); persistence ends at {base[-1]:.6g}")
    return 0


def _cmd_verify(args, cfg):
    from . import verify

    reports = verify.run_all(seed=cfg.run.seed,
                             edge_trials=cfg.verify.edge_trials,
                             pairs=cfg.verify.pairs,
                             probe=cfg.verify.probe)
    print(verify.format_reports(reports))
    verify.write_reports_csv(os.path.join(args.out, "verification.csv"),
                             reports)
    return 0 if all(r.passed for r in reports) else 5


def _cmd_export_plots(args, cfg):
    import numpy as np

    from . import plots
    from . import train as train_mod

    ts, m = _load_pair(args, cfg)
    part = _eval_split(ts, cfg)
    length = m.cfg.history_len
    steps = min(cfg.eval.rollout_steps, part.n_frames - length)
    if steps < 1:
        raise config_mod.ConfigError("dataset too short to roll out")

    curve = train_mod.rollout_rmse_curve(m, part, steps)
    base = _persistence_curve(part, length, steps)
    plots.save_curves(
        os.path.join(args.out, "rollout_rmse.png"),
        os.path.join(args.out, "rollout_rmse.csv"),
        np.arange(1, steps + 1), {"model": curve, "persistence": base},
        xlabel="rollout step", ylabel="median rmse")

    frames, status = train_mod.rollout(m, part.data[0, :length], steps)
    written = ["rollout_rmse.png"]
    if frames.shape[0]:
        k = frames.shape[0] - 1
        truth, pred = part.data[0, length + k], frames[k]
        if truth.shape[1] == 1:
            # 1d system: show space-time sheets instead of one thin frame
            pred = frames[:, :, 0, 0].T
            truth = part.data[0, length:length + frames.shape[0], :, 0, 0].T
            name = f"channel 0, {frames.shape[0]} steps"
        else:
            truth, pred = truth[:, :, 0], pred[:, :, 0]
            name = f"channel 0 at rollout step {k + 1}"
        plots.save_field_comparison(
            os.path.join(args.out, "field_comparison.png"),
            os.path.join(args.out, "field_comparison.csv"),
            truth, pred, title=name)
        written.append("field_comparison.png")
    else:
        print(f"skipping field comparison: rollout {status}")
    print(f"wrote {', '.join(written)} to {args.out}")
    return 0


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "rollout": _cmd_rollout,
    "verify": _cmd_verify,
    "export-plots": _cmd_export_plots,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        _apply_threads(cfg.run.threads)
        os.makedirs(args.out, exist_ok=True)
        config_mod.write_config(os.path.join(args.out, "resolved.cfg"), cfg)
        return _HANDLERS[args.command](args, cfg)
    except config_mod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        # deferred import: these exception types live in numpy-backed modules
        from . import autodiff, skds

        if isinstance(exc, (skds.FormatError, autodiff.ShapeError)):
            print(f"error: {exc}", file=sys.stderr)
            return 4
        traceback.print_exc()
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
